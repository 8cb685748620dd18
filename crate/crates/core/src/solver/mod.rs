//! Finite differences for `-Δu + b·∇u = f` on the axisymmetric half-cylinder
//! (coordinates `(ρ, z)`, dimension n ≥ 3) and on the unit disc (n = 2, Cartesian
//! grid with staircase boundary).
//!
//! Diffusion uses the conservative form `ρ^(2-n) ∂_ρ(ρ^(n-2) ∂_ρ u)` with face
//! weights, and `(n-1) ∂²_ρ` on the axis. Convection is central where the row
//! stays an M-matrix and first-order upwind elsewhere.

mod cylinder;
mod neumann;
pub mod sparse;

pub use cylinder::{axis_value, epsilon_sweep, grad_l2_half_ball, solve_cylinder_eps, GridPolicy, SweepRow, PROBE_HEIGHTS};
pub use neumann::{neumann_series_solve, NeumannReport};

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use sparse::{bicgstab, is_m_matrix_row, Csr, Preconditioner};

/// Node grid on `ρ ∈ [0, 1]`, `z ∈ [z_min, 1]`. `n_rho`, `n_z` count cells, so
/// `h_ρ = 1/n_rho` and `h_z = (1 - z_min)/n_z`; the axis `ρ = 0` carries unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisymGrid {
    pub n_rho: usize,
    pub n_z: usize,
    pub z_min: f64,
}

impl AxisymGrid {
    /// Half-cylinder `z ∈ [0, 1]`.
    pub fn half(n_rho: usize, n_z: usize) -> Result<Self> {
        Self::new(n_rho, n_z, 0.0)
    }

    /// Full cylinder `z ∈ [-1, 1]` with the same `h_z` as `half(n_rho, n_z / 2)`.
    pub fn full(n_rho: usize, n_z: usize) -> Result<Self> {
        Self::new(n_rho, n_z, -1.0)
    }

    fn new(n_rho: usize, n_z: usize, z_min: f64) -> Result<Self> {
        if n_rho < 8 || n_z < 8 {
            return Err(Error::ParamOutOfRange {
                name: "grid",
                value: n_rho.min(n_z) as f64,
                constraint: "at least 8 cells per direction",
            });
        }
        Ok(AxisymGrid { n_rho, n_z, z_min })
    }

    pub fn h_rho(&self) -> f64 {
        1.0 / self.n_rho as f64
    }

    pub fn h_z(&self) -> f64 {
        (1.0 - self.z_min) / self.n_z as f64
    }

    pub fn rho(&self, i: usize) -> f64 {
        i as f64 * self.h_rho()
    }

    pub fn z(&self, j: usize) -> f64 {
        if j == self.n_z {
            1.0
        } else {
            self.z_min + j as f64 * self.h_z()
        }
    }

    /// Row-major, z-then-ρ: node `(i, j)` has index `j (n_rho + 1) + i`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.n_rho + 1) + i
    }

    pub fn node_count(&self) -> usize {
        (self.n_rho + 1) * (self.n_z + 1)
    }
}

/// Cartesian grid on `[-1, 1]²`; nodes strictly inside the unit disc are unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscGrid {
    pub cells: usize,
}

impl DiscGrid {
    pub fn new(cells: usize) -> Result<Self> {
        if cells < 8 {
            return Err(Error::ParamOutOfRange { name: "grid", value: cells as f64, constraint: "at least 8 cells" });
        }
        Ok(DiscGrid { cells })
    }

    pub fn h(&self) -> f64 {
        2.0 / self.cells as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -1.0 + i as f64 * self.h()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.cells + 1) + i
    }

    pub fn node_count(&self) -> usize {
        (self.cells + 1) * (self.cells + 1)
    }

    fn inside(&self, i: usize, j: usize) -> bool {
        let (x, y) = (self.coord(i), self.coord(j));
        i > 0 && j > 0 && i < self.cells && j < self.cells && x * x + y * y < 1.0 - 1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mesh {
    Axisym(AxisymGrid),
    Disc(DiscGrid),
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        match self {
            Mesh::Axisym(g) => g.node_count(),
            Mesh::Disc(g) => g.node_count(),
        }
    }
}

/// Nodal values on a mesh, in the mesh's index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub mesh: Mesh,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn axisym(&self) -> Option<&AxisymGrid> {
        match &self.mesh {
            Mesh::Axisym(g) => Some(g),
            Mesh::Disc(_) => None,
        }
    }

    /// `u(ρ_i, z_j)` on an axisymmetric mesh.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        match &self.mesh {
            Mesh::Axisym(g) => self.values[g.index(i, j)],
            Mesh::Disc(g) => self.values[g.index(i, j)],
        }
    }

    /// Bilinear interpolation at `(ρ, z)` (axisymmetric) or `(x, y)` (disc).
    pub fn interpolate(&self, a: f64, b: f64) -> f64 {
        let (n1, n2, lo1, h1, lo2, h2) = match &self.mesh {
            Mesh::Axisym(g) => (g.n_rho, g.n_z, 0.0, g.h_rho(), g.z_min, g.h_z()),
            Mesh::Disc(g) => (g.cells, g.cells, -1.0, g.h(), -1.0, g.h()),
        };
        let locate = |x: f64, lo: f64, h: f64, n: usize| {
            let s = ((x - lo) / h).clamp(0.0, n as f64);
            let k = (math::floor(s) as usize).min(n - 1);
            (k, s - k as f64)
        };
        let (i, t) = locate(a, lo1, h1, n1);
        let (j, s) = locate(b, lo2, h2, n2);
        let idx = |i: usize, j: usize| j * (n1 + 1) + i;
        let v = &self.values;
        (1.0 - s) * ((1.0 - t) * v[idx(i, j)] + t * v[idx(i + 1, j)]) + s * ((1.0 - t) * v[idx(i, j + 1)] + t * v[idx(i + 1, j + 1)])
    }

    /// `(z, u(0, z))` along the axis.
    pub fn axis_profile(&self) -> Vec<(f64, f64)> {
        match &self.mesh {
            Mesh::Axisym(g) => (0..=g.n_z).map(|j| (g.z(j), self.values[g.index(0, j)])).collect(),
            Mesh::Disc(_) => Vec::new(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(math::abs(*v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvectionScheme {
    /// Central where the row keeps nonpositive off-diagonals, upwind otherwise.
    Hybrid,
    Upwind,
    Central,
}

/// Coefficients of one assembled row before boundary elimination.
struct Row {
    diag: f64,
    /// (mesh node, coefficient)
    off: [(usize, f64); 4],
    upwind: bool,
}

/// Convection along one axis: returns (minus, plus, extra diagonal, upwinded).
fn convect(scheme: ConvectionScheme, a_minus: f64, a_plus: f64, v: f64, h: f64) -> (f64, f64, f64, bool) {
    let central = match scheme {
        ConvectionScheme::Central => true,
        ConvectionScheme::Upwind => false,
        ConvectionScheme::Hybrid => math::abs(v) / (2.0 * h) <= a_minus.min(a_plus),
    };
    if central {
        (-a_minus - v / (2.0 * h), -a_plus + v / (2.0 * h), 0.0, false)
    } else {
        (-a_minus - v.max(0.0) / h, -a_plus + v.min(0.0) / h, math::abs(v) / h, true)
    }
}

/// Assembled linear system on the unknown nodes of a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSystem {
    pub mesh: Mesh,
    /// Coordinate list (row, column, value) over unknowns.
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    /// Mesh node of each unknown.
    pub unknowns: Vec<usize>,
    /// Unknown index of each mesh node, if any.
    pub node_map: Vec<Option<usize>>,
    /// Dirichlet data at boundary nodes (0 at unknowns).
    pub boundary: Vec<f64>,
    pub m_matrix: Vec<bool>,
    pub central_rows: usize,
    pub upwind_rows: usize,
    pub has_source: bool,
}

impl SparseSystem {
    pub fn size(&self) -> usize {
        self.unknowns.len()
    }

    pub fn csr(&self) -> Csr {
        Csr::from_triplets(self.size(), &self.triplets)
    }

    pub fn all_m_matrix(&self) -> bool {
        self.m_matrix.iter().all(|&m| m)
    }

    fn build(mesh: Mesh, is_unknown: impl Fn(usize) -> bool, dirichlet: impl Fn(usize) -> f64) -> Self {
        let count = mesh.node_count();
        let mut node_map = vec![None; count];
        let mut unknowns = Vec::new();
        let mut boundary = vec![0.0; count];
        // unknowns are numbered from the top row down
        for k in (0..count).rev() {
            if is_unknown(k) {
                node_map[k] = Some(unknowns.len());
                unknowns.push(k);
            } else {
                boundary[k] = dirichlet(k);
            }
        }
        let size = unknowns.len();
        SparseSystem {
            mesh,
            triplets: Vec::with_capacity(5 * size),
            rhs: vec![0.0; size],
            unknowns,
            node_map,
            boundary,
            m_matrix: vec![true; size],
            central_rows: 0,
            upwind_rows: 0,
            has_source: false,
        }
    }

    fn push_row(&mut self, r: usize, row: Row, source: f64) {
        self.m_matrix[r] = is_m_matrix_row(row.diag, &row.off.map(|o| o.1));
        if row.upwind {
            self.upwind_rows += 1;
        } else {
            self.central_rows += 1;
        }
        self.triplets.push((r, r, row.diag));
        let mut rhs = source;
        for (node, c) in row.off {
            if c == 0.0 {
                continue;
            }
            match self.node_map[node] {
                Some(col) => self.triplets.push((r, col, c)),
                None => rhs -= c * self.boundary[node],
            }
        }
        self.rhs[r] = rhs;
    }
}

/// Problem data for assembly. Closures take mesh coordinates: `(ρ, z)` on the
/// cylinder, `(x, y)` on the disc.
pub struct Problem<'a> {
    /// Spatial dimension (ignored on the disc, which is always 2).
    pub n: usize,
    pub drift: &'a dyn Fn(f64, f64) -> (f64, f64),
    pub dirichlet: &'a dyn Fn(f64, f64) -> f64,
    pub source: Option<&'a dyn Fn(f64, f64) -> f64>,
    pub scheme: ConvectionScheme,
}

fn zero_drift(_: f64, _: f64) -> (f64, f64) {
    (0.0, 0.0)
}

impl<'a> Problem<'a> {
    pub fn new(n: usize, drift: &'a dyn Fn(f64, f64) -> (f64, f64), dirichlet: &'a dyn Fn(f64, f64) -> f64) -> Self {
        Problem { n, drift, dirichlet, source: None, scheme: ConvectionScheme::Hybrid }
    }

    pub fn with_source(mut self, source: &'a dyn Fn(f64, f64) -> f64) -> Self {
        self.source = Some(source);
        self
    }

    pub fn with_scheme(mut self, scheme: ConvectionScheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Same data with the drift removed.
    pub fn without_drift(&self) -> Problem<'a> {
        Problem { n: self.n, drift: &zero_drift, dirichlet: self.dirichlet, source: self.source, scheme: self.scheme }
    }
}

/// Five-point assembly on the half- or full cylinder: Dirichlet data at
/// `ρ = 1`, `z = z_min` and `z = 1`; the axis row uses `(n-1)∂²_ρ + ∂²_z`.
pub fn assemble_axisym(grid: &AxisymGrid, prob: &Problem) -> Result<SparseSystem> {
    if prob.n < 3 {
        return Err(Error::BadDimension { requested: prob.n, reason: "the axisymmetric operator needs n >= 3" });
    }
    let g = *grid;
    let (nr, nz) = (g.n_rho, g.n_z);
    let mut sys = SparseSystem::build(
        Mesh::Axisym(g),
        |k| {
            let (i, j) = (k % (nr + 1), k / (nr + 1));
            i < nr && j > 0 && j < nz
        },
        |k| (prob.dirichlet)(g.rho(k % (nr + 1)), g.z(k / (nr + 1))),
    );
    sys.has_source = prob.source.is_some();
    let (hr, hz) = (g.h_rho(), g.h_z());
    let az = 1.0 / (hz * hz);
    let m = prob.n as i32 - 2;
    for r in 0..sys.size() {
        let k = sys.unknowns[r];
        let (i, j) = (k % (nr + 1), k / (nr + 1));
        let (rho, z) = (g.rho(i), g.z(j));
        let (br, bz) = (prob.drift)(rho, z);
        if !(br.is_finite() && bz.is_finite()) {
            return Err(Error::NonFiniteDrift { node: k });
        }
        let (s_m, s_p, s_d, up_z) = convect(prob.scheme, az, az, bz, hz);
        let south = g.index(i, j - 1);
        let north = g.index(i, j + 1);
        let row = if i == 0 {
            let ae = 2.0 * (prob.n as f64 - 1.0) / (hr * hr);
            Row { diag: ae + 2.0 * az + s_d, off: [(g.index(1, j), -ae), (0, 0.0), (south, s_m), (north, s_p)], upwind: up_z }
        } else {
            let w_m = math::powi((i as f64 - 0.5) / i as f64, m);
            let w_p = math::powi((i as f64 + 0.5) / i as f64, m);
            let (aw, ae) = (w_m / (hr * hr), w_p / (hr * hr));
            let (r_m, r_p, r_d, up_r) = convect(prob.scheme, aw, ae, br, hr);
            Row {
                diag: aw + ae + 2.0 * az + r_d + s_d,
                off: [(g.index(i - 1, j), r_m), (g.index(i + 1, j), r_p), (south, s_m), (north, s_p)],
                upwind: up_r || up_z,
            }
        };
        let f = prob.source.map(|s| s(rho, z)).unwrap_or(0.0);
        sys.push_row(r, row, f);
    }
    Ok(sys)
}

/// Five-point assembly on the staircase unit disc; nodes outside the open
/// disc carry Dirichlet data.
pub fn assemble_disc(grid: &DiscGrid, prob: &Problem) -> Result<SparseSystem> {
    let g = *grid;
    let c = g.cells;
    let mut sys =
        SparseSystem::build(Mesh::Disc(g), |k| g.inside(k % (c + 1), k / (c + 1)), |k| {
            (prob.dirichlet)(g.coord(k % (c + 1)), g.coord(k / (c + 1)))
        });
    sys.has_source = prob.source.is_some();
    let h = g.h();
    let a = 1.0 / (h * h);
    for r in 0..sys.size() {
        let k = sys.unknowns[r];
        let (i, j) = (k % (c + 1), k / (c + 1));
        let (x, y) = (g.coord(i), g.coord(j));
        let (bx, by) = (prob.drift)(x, y);
        if !(bx.is_finite() && by.is_finite()) {
            return Err(Error::NonFiniteDrift { node: k });
        }
        let (xm, xp, xd, ux) = convect(prob.scheme, a, a, bx, h);
        let (ym, yp, yd, uy) = convect(prob.scheme, a, a, by, h);
        let row = Row {
            diag: 4.0 * a + xd + yd,
            off: [(g.index(i - 1, j), xm), (g.index(i + 1, j), xp), (g.index(i, j - 1), ym), (g.index(i, j + 1), yp)],
            upwind: ux || uy,
        };
        let f = prob.source.map(|s| s(x, y)).unwrap_or(0.0);
        sys.push_row(r, row, f);
    }
    Ok(sys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    /// Seconds; filled in by callers that have a clock.
    pub wall_time: f64,
    pub central_nodes: usize,
    pub upwind_nodes: usize,
    pub min: f64,
    pub max: f64,
    /// Solution within `[min, max]` of the boundary data up to 1e-12; `None`
    /// when a source term is present.
    pub maximum_principle: Option<bool>,
    pub axis_profile: Vec<(f64, f64)>,
    pub grad_l2_half_ball: Option<f64>,
    /// `‖∇u‖_{L₂(B_{1/2})} / (1 + ‖b‖_{L₁})^{1/2}`
    pub gradient_ratio: Option<f64>,
    /// `min (u - v_ε)` over nodes of the closed truncated cone.
    pub barrier_gap: Option<f64>,
}

pub const MAX_PRINCIPLE_TOL: f64 = 1e-12;

/// Scatters unknowns and boundary data into a [`GridField`].
pub fn expand(sys: &SparseSystem, x: &[f64]) -> GridField {
    let mut values = sys.boundary.clone();
    for (r, &k) in sys.unknowns.iter().enumerate() {
        values[k] = x[r];
    }
    GridField { mesh: sys.mesh, values }
}

fn report_for(sys: &SparseSystem, field: &GridField, iterations: usize, residual: f64) -> SolveReport {
    let min = field.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = field.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let maximum_principle = if sys.has_source {
        None
    } else {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (k, m) in sys.node_map.iter().enumerate() {
            if m.is_none() {
                lo = lo.min(sys.boundary[k]);
                hi = hi.max(sys.boundary[k]);
            }
        }
        Some(min >= lo - MAX_PRINCIPLE_TOL && max <= hi + MAX_PRINCIPLE_TOL)
    };
    SolveReport {
        iterations,
        residual,
        wall_time: 0.0,
        central_nodes: sys.central_rows,
        upwind_nodes: sys.upwind_rows,
        min,
        max,
        maximum_principle,
        axis_profile: field.axis_profile(),
        grad_l2_half_ball: None,
        gradient_ratio: None,
        barrier_gap: None,
    }
}

/// BiCGStab with ILU(0) from a zero initial guess; `tol` bounds `‖Ax - b‖₂/‖b‖₂`.
pub fn linear_solve(sys: &SparseSystem, tol: f64, max_iter: usize) -> Result<(GridField, SolveReport)> {
    linear_solve_from(sys, &vec![0.0; sys.size()], tol, max_iter, Preconditioner::Ilu0)
}

/// As [`linear_solve`] from the initial guess `x0` (one value per unknown).
/// With a zero right-hand side the tolerance is absolute.
pub fn linear_solve_from(
    sys: &SparseSystem,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
    pre: Preconditioner,
) -> Result<(GridField, SolveReport)> {
    if x0.len() != sys.size() {
        return Err(Error::InvalidInput("initial guess length does not match the system".into()));
    }
    let a = sys.csr();
    let mut x = x0.to_vec();
    let st = bicgstab(&a, &sys.rhs, &mut x, tol, max_iter, pre)?;
    let field = expand(sys, &x);
    let report = report_for(sys, &field, st.iterations, st.residual);
    Ok((field, report))
}
