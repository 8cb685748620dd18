//! The cutoff problem on the cylinder: `-Δu + b_ε·∇u = 0`, `u = cos(πρ/2)` at
//! `z = 1`, `u = 0` at `ρ = 1`, solved on `z ≥ 0` with `u = 0` at `z = 0`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{assemble_axisym, linear_solve, AxisymGrid, GridField, Problem, SolveReport};
use crate::barrier::{drift_lp_norm, drift_quadrature, Barrier, BarrierParams, DriftKind};
use crate::error::{Error, Result};
use crate::math::{self, cos, sqrt};

/// Axis heights at which the sweep records `u_ε(0, z)`.
pub const PROBE_HEIGHTS: [f64; 4] = [0.05, 0.1, 0.2, 0.4];

/// `‖∇u‖_{L₂(B_{1/2})}` from nodal data: cell-centred gradients, measure
/// `|Sⁿ⁻²| ρⁿ⁻² dρ dz`, cells whose centre lies in the ball; both halves of
/// the ball when the mesh is a half-cylinder (u odd in z).
pub fn grad_l2_half_ball(u: &GridField, n: usize) -> Result<f64> {
    let g = u.axisym().ok_or_else(|| Error::InvalidInput("gradient norm needs an axisymmetric field".into()))?;
    let (hr, hz) = (g.h_rho(), g.h_z());
    let sphere = math::unit_sphere_area(n - 1);
    let mut acc = 0.0;
    for j in 0..g.n_z {
        let zc = 0.5 * (g.z(j) + g.z(j + 1));
        for i in 0..g.n_rho {
            let rc = (i as f64 + 0.5) * hr;
            if rc * rc + zc * zc >= 0.25 {
                continue;
            }
            let (a, b, c, d) = (u.at(i, j), u.at(i + 1, j), u.at(i, j + 1), u.at(i + 1, j + 1));
            let dr = 0.5 * ((b - a) + (d - c)) / hr;
            let dz = 0.5 * ((c - a) + (d - b)) / hz;
            acc += (dr * dr + dz * dz) * sphere * math::powi(rc, n as i32 - 2) * hr * hz;
        }
    }
    if g.z_min == 0.0 {
        acc *= 2.0;
    }
    Ok(sqrt(acc))
}

fn boundary(rho: f64, z: f64) -> f64 {
    if z >= 1.0 {
        cos(PI * rho / 2.0)
    } else if z <= -1.0 {
        -cos(PI * rho / 2.0)
    } else {
        0.0
    }
}

/// Solves the cutoff problem on the half-cylinder. Requires `h_z ≤ ε/4`.
pub fn solve_cylinder_eps(params: &BarrierParams, grid: &AxisymGrid, tol: f64, max_iter: usize) -> Result<(GridField, SolveReport)> {
    params.validate()?;
    let required = params.eps / 4.0;
    if grid.h_z() > required * (1.0 + 1e-12) {
        return Err(Error::GridTooCoarse { h_z: grid.h_z(), required });
    }
    let bar = Barrier::new(*params)?;
    let drift = |rho: f64, z: f64| bar.b_eps(rho, z);
    let sys = assemble_axisym(grid, &Problem::new(params.n, &drift, &boundary))?;
    let (u, mut rep) = linear_solve(&sys, tol, max_iter)?;
    let grad = grad_l2_half_ball(&u, params.n)?;
    let l1 = drift_lp_norm(&bar, DriftKind::Eps, 1.0, &drift_quadrature(params.n))?;
    rep.grad_l2_half_ball = Some(grad);
    // ‖u_ε‖_∞ = 1 by the boundary data
    rep.gradient_ratio = Some(grad / sqrt(1.0 + l1));
    let mut gap = f64::INFINITY;
    for j in 0..=grid.n_z {
        let z = grid.z(j);
        for i in 0..=grid.n_rho {
            let rho = grid.rho(i);
            if bar.in_cone(rho, z) {
                gap = gap.min(u.at(i, j) - bar.v_eps(rho, z)?.v);
            }
        }
    }
    rep.barrier_gap = Some(gap);
    Ok((u, rep))
}

/// Grid for one sweep entry: `max(base, ⌈4/ε⌉)` cells in each direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    pub base: usize,
}

impl GridPolicy {
    pub fn grid_for(&self, eps: f64) -> Result<AxisymGrid> {
        let n = self.base.max(math::ceil(4.0 / eps - 1e-9) as usize);
        AxisymGrid::half(n, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub cells: usize,
    /// `(z, u_ε(0, z))` at [`PROBE_HEIGHTS`]
    pub probes: Vec<(f64, f64)>,
    pub u_origin: f64,
    pub u_two_eps: f64,
    pub b_lp_norm: f64,
    pub grad_l2: f64,
    pub gradient_ratio: f64,
    pub maximum_principle: bool,
    /// `|u_ε(0, z) - u_ε_prev(0, z)|` at the probes; empty on the first row.
    pub deltas: Vec<f64>,
    pub report: SolveReport,
}

/// Axis value by linear interpolation between nodes.
pub fn axis_value(u: &GridField, z: f64) -> f64 {
    u.interpolate(0.0, z)
}

/// Solves for each ε in decreasing order and records the axis probes.
pub fn epsilon_sweep(
    eps_list: &[f64],
    params: &BarrierParams,
    policy: GridPolicy,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<SweepRow>> {
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("eps list must be strictly decreasing".into()));
    }
    let mut rows: Vec<SweepRow> = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let p = params.with_eps(eps);
        let grid = policy.grid_for(eps)?;
        let (u, rep) = solve_cylinder_eps(&p, &grid, tol, max_iter)?;
        let bar = Barrier::new(p)?;
        let b_lp_norm = drift_lp_norm(&bar, DriftKind::Eps, p.p_target, &drift_quadrature(p.n))?;
        let probes: Vec<(f64, f64)> = PROBE_HEIGHTS.iter().map(|&z| (z, axis_value(&u, z))).collect();
        let deltas = match rows.last() {
            Some(prev) => probes.iter().zip(&prev.probes).map(|(a, b)| math::abs(a.1 - b.1)).collect(),
            None => Vec::new(),
        };
        rows.push(SweepRow {
            eps,
            cells: grid.n_z,
            u_origin: u.at(0, 0),
            u_two_eps: axis_value(&u, 2.0 * eps),
            probes,
            b_lp_norm,
            grad_l2: rep.grad_l2_half_ball.unwrap_or(f64::NAN),
            gradient_ratio: rep.gradient_ratio.unwrap_or(f64::NAN),
            maximum_principle: rep.maximum_principle.unwrap_or(false),
            deltas,
            report: rep,
        });
    }
    Ok(rows)
}
