#![allow(dead_code)]

use std::f64::consts::PI;

use driftlab_core::solver::{
    assemble_axisym, assemble_disc, linear_solve, neumann_series_solve, AxisymGrid, ConvectionScheme, DiscGrid,
    GridField, NeumannReport, Problem,
};
use driftlab_core::Error;

pub fn zero(_: f64, _: f64) -> f64 {
    0.0
}

pub fn no_drift(_: f64, _: f64) -> (f64, f64) {
    (0.0, 0.0)
}

pub fn one(_: f64, _: f64) -> f64 {
    1.0
}

pub fn cylinder_data(rho: f64, z: f64) -> f64 {
    if z >= 1.0 {
        (PI * rho / 2.0).cos()
    } else if z <= -1.0 {
        -(PI * rho / 2.0).cos()
    } else {
        0.0
    }
}

/// Max nodal error of `u = sin(πz)(1 - ρ²)` in n = 3 for a given drift.
pub fn mms_error(cells: usize, drift: &dyn Fn(f64, f64) -> (f64, f64), scheme: ConvectionScheme) -> f64 {
    let n = 3.0;
    let exact = |rho: f64, z: f64| (PI * z).sin() * (1.0 - rho * rho);
    // -Δu + b·∇u with Δ = ∂ρρ + (n-2)/ρ ∂ρ + ∂zz written out by hand
    let source = |rho: f64, z: f64| {
        let s = (PI * z).sin();
        let lap = -2.0 * s - 2.0 * (n - 2.0) * s - PI * PI * exact(rho, z);
        let (br, bz) = drift(rho, z);
        -lap + br * (-2.0 * rho * s) + bz * PI * (PI * z).cos() * (1.0 - rho * rho)
    };
    let g = AxisymGrid::half(cells, cells).unwrap();
    let prob = Problem::new(3, drift, &zero).with_source(&source).with_scheme(scheme);
    let sys = assemble_axisym(&g, &prob).unwrap();
    let (u, _) = linear_solve(&sys, 1e-13, 20_000).unwrap();
    let mut err: f64 = 0.0;
    for j in 0..=cells {
        for i in 0..=cells {
            err = err.max((u.at(i, j) - exact(g.rho(i), g.z(j))).abs());
        }
    }
    err
}

pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

pub fn smooth_drift(rho: f64, z: f64) -> (f64, f64) {
    (3.0 * rho, 2.0 + z)
}

/// Poisson problem `-Δu + s(-y, x)·∇u = 1` on the disc: (Neumann result, direct solve).
pub fn rotation_run(scale: f64) -> Result<(GridField, NeumannReport, GridField), Error> {
    let g = DiscGrid::new(48)?;
    let drift = move |x: f64, y: f64| (-scale * y, scale * x);
    let prob = Problem::new(2, &drift, &zero).with_source(&one);
    let full = assemble_disc(&g, &prob)?;
    let poisson = assemble_disc(&g, &prob.without_drift())?;
    let (direct, _) = linear_solve(&full, 1e-12, 10_000)?;
    let (u, rep) = neumann_series_solve(&poisson, &full, 1e-10, 400)?;
    Ok((u, rep, direct))
}

/// Rotation strength whose observed contraction factor is about `target`.
pub fn calibrated_rotation(target: f64) -> f64 {
    let (_, probe, _) = rotation_run(1.0).unwrap();
    target / *probe.factors.last().unwrap()
}

pub fn relative_l2(a: &GridField, b: &GridField) -> f64 {
    let num: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.values.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}
