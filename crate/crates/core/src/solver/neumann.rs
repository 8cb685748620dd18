//! Fixed-point solve `L₀ v_{k+1} = f - C v_k`, where `L₀` is the drift-free
//! operator and `C = A - L₀` the convection part of the same discretization.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::sparse::{bicgstab, Preconditioner};
use super::{expand, report_for, GridField, SolveReport, SparseSystem};
use crate::error::{Error, Result};
use crate::math::sqrt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannReport {
    pub iterations: usize,
    /// `‖v_{k+1} - v_k‖ / ‖v_k - v_{k-1}‖` per step
    pub factors: Vec<f64>,
    /// Last relative increment `‖v_{k+1} - v_k‖ / ‖v_{k+1}‖`
    pub increment: f64,
    pub inner_iterations: usize,
    pub solve: SolveReport,
}

/// Inner Poisson solves run at `tol / 100`, floored here.
const INNER_TOL_FLOOR: f64 = 1e-12;

fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

/// `poisson` and `full` must be assembled on the same mesh with the same data,
/// `poisson` with the drift removed. Raises `ContractionFailure` when the
/// increment ratio is ≥ 1 for three consecutive steps.
pub fn neumann_series_solve(poisson: &SparseSystem, full: &SparseSystem, tol: f64, max_iter: usize) -> Result<(GridField, NeumannReport)> {
    if poisson.unknowns != full.unknowns || poisson.mesh != full.mesh {
        return Err(Error::InvalidInput("Neumann series needs both systems on the same unknowns".into()));
    }
    let l0 = poisson.csr();
    let c = full.csr().sub(&l0);
    let n = full.size();
    let drift_free = c.vals.iter().all(|v| *v == 0.0);
    let mut v = vec![0.0; n];
    let mut cv = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut factors = Vec::new();
    let mut prev_step = f64::NAN;
    let mut growing = 0;
    let mut inner_iterations = 0;
    let mut increment = f64::INFINITY;
    let mut iterations = 0;
    let inner_tol = (tol * 1e-2).max(INNER_TOL_FLOOR);
    while iterations < max_iter {
        c.matvec(&v, &mut cv);
        for i in 0..n {
            rhs[i] = full.rhs[i] - cv[i];
        }
        let mut next = v.clone();
        let st = bicgstab(&l0, &rhs, &mut next, inner_tol, 20 * n + 100, Preconditioner::Ilu0)?;
        inner_iterations += st.iterations;
        iterations += 1;
        let step = norm(&next.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
        let size = norm(&next);
        increment = if size > 0.0 { step / size } else { step };
        v = next;
        if prev_step.is_finite() && prev_step > 0.0 {
            let f = step / prev_step;
            factors.push(f);
            growing = if f >= 1.0 { growing + 1 } else { 0 };
            if growing >= 3 {
                return Err(Error::ContractionFailure { iterations, factor: f });
            }
        }
        prev_step = step;
        if drift_free || increment <= tol {
            break;
        }
    }
    if increment > tol && !drift_free {
        return Err(Error::NoConvergence { iterations, residual: increment });
    }
    let field = expand(full, &v);
    let solve = report_for(full, &field, iterations, increment);
    Ok((field, NeumannReport { iterations, factors, increment, inner_iterations, solve }))
}
