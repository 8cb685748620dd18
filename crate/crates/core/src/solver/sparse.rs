//! Coordinate-list assembly, CSR storage and preconditioned BiCGStab.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{abs, sqrt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Csr {
    pub size: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Builds CSR from triplets, summing duplicates.
    pub fn from_triplets(size: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut count = vec![0usize; size + 1];
        for &(r, _, _) in triplets {
            count[r + 1] += 1;
        }
        for i in 0..size {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }
        // sort each row by column and merge duplicates
        let mut row_ptr = vec![0usize; size + 1];
        let mut out_c = Vec::with_capacity(cols.len());
        let mut out_v = Vec::with_capacity(vals.len());
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..size {
            scratch.clear();
            scratch.extend((count[r]..count[r + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|e| e.0);
            for &(c, v) in scratch.iter() {
                match out_c.last() {
                    Some(&last) if last == c && out_c.len() > row_ptr[r] => *out_v.last_mut().unwrap() += v,
                    _ => {
                        out_c.push(c);
                        out_v.push(v);
                    }
                }
            }
            row_ptr[r + 1] = out_c.len();
        }
        Csr { size, row_ptr, cols: out_c, vals: out_v }
    }

    pub fn identity(size: usize) -> Self {
        Csr { size, row_ptr: (0..=size).collect(), cols: (0..size).collect(), vals: vec![1.0; size] }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.size {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.size)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1]).find(|&k| self.cols[k] == r).map(|k| self.vals[k]).unwrap_or(0.0)
            })
            .collect()
    }

    /// `self - other`, both on the same sparsity superset.
    pub fn sub(&self, other: &Csr) -> Csr {
        let mut t = Vec::with_capacity(self.vals.len() + other.vals.len());
        for (m, s) in [(self, 1.0), (other, -1.0)] {
            for r in 0..m.size {
                for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                    t.push((r, m.cols[k], s * m.vals[k]));
                }
            }
        }
        Csr::from_triplets(self.size, &t)
    }
}

/// Preconditioner for [`bicgstab`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preconditioner {
    Jacobi,
    /// Incomplete LU with the sparsity pattern of the matrix.
    Ilu0,
}

enum Precond {
    Jacobi(Vec<f64>),
    Ilu { lu: Csr, diag_pos: Vec<usize> },
}

impl Precond {
    fn new(a: &Csr, kind: Preconditioner) -> Self {
        match kind {
            Preconditioner::Jacobi => {
                Precond::Jacobi(a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect())
            }
            Preconditioner::Ilu0 => {
                let (lu, diag_pos) = ilu0(a);
                Precond::Ilu { lu, diag_pos }
            }
        }
    }

    fn apply(&self, r: &[f64], out: &mut [f64]) {
        match self {
            Precond::Jacobi(d) => {
                for i in 0..r.len() {
                    out[i] = d[i] * r[i];
                }
            }
            Precond::Ilu { lu, diag_pos } => {
                let n = lu.size;
                for i in 0..n {
                    let mut acc = r[i];
                    for k in lu.row_ptr[i]..diag_pos[i] {
                        acc -= lu.vals[k] * out[lu.cols[k]];
                    }
                    out[i] = acc;
                }
                for i in (0..n).rev() {
                    let mut acc = out[i];
                    for k in diag_pos[i] + 1..lu.row_ptr[i + 1] {
                        acc -= lu.vals[k] * out[lu.cols[k]];
                    }
                    out[i] = acc / lu.vals[diag_pos[i]];
                }
            }
        }
    }
}

/// ILU(0) factors stored in place (unit-lower L below the diagonal, U on and
/// above); rows must have sorted columns and a stored diagonal.
fn ilu0(a: &Csr) -> (Csr, Vec<usize>) {
    let mut lu = a.clone();
    let n = a.size;
    let mut diag_pos = vec![0usize; n];
    for i in 0..n {
        diag_pos[i] = (lu.row_ptr[i]..lu.row_ptr[i + 1]).find(|&k| lu.cols[k] == i).expect("missing diagonal");
    }
    let mut pos = vec![usize::MAX; n];
    for i in 0..n {
        let (lo, hi) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
        for k in lo..hi {
            pos[lu.cols[k]] = k;
        }
        for k in lo..diag_pos[i] {
            let c = lu.cols[k];
            let f = lu.vals[k] / lu.vals[diag_pos[c]];
            lu.vals[k] = f;
            for m in diag_pos[c] + 1..lu.row_ptr[c + 1] {
                let p = pos[lu.cols[m]];
                if p != usize::MAX {
                    lu.vals[p] -= f * lu.vals[m];
                }
            }
        }
        for k in lo..hi {
            pos[lu.cols[k]] = usize::MAX;
        }
    }
    (lu, diag_pos)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovStats {
    pub iterations: usize,
    /// `‖Ax - b‖₂ / ‖b‖₂`, or the absolute residual when `b = 0`.
    pub residual: f64,
}

/// Right-preconditioned BiCGStab starting from `x`. Stops when the true
/// residual satisfies `‖Ax - b‖ ≤ tol ‖b‖` (`≤ tol` when `b = 0`).
pub fn bicgstab(a: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize, kind: Preconditioner) -> Result<KrylovStats> {
    let n = a.size;
    let pre = Precond::new(a, kind);
    let bnorm = norm2(b);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut r = vec![0.0; n];
    let residual = |x: &[f64], r: &mut [f64]| {
        a.matvec(x, r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        norm2(r) / scale
    };
    let mut res = residual(x, &mut r);
    if res <= tol {
        return Ok(KrylovStats { iterations: 0, residual: res });
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zv = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            // breakdown: restart from the current iterate
            res = residual(x, &mut r);
            if res <= tol {
                return Ok(KrylovStats { iterations: it, residual: res });
            }
            return Err(Error::NoConvergence { iterations: it, residual: res });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut y);
        a.matvec(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) / scale <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            res = residual(x, &mut r);
            if res <= tol {
                return Ok(KrylovStats { iterations: it, residual: res });
            }
            continue;
        }
        pre.apply(&s, &mut zv);
        a.matvec(&zv, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zv[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) / scale <= tol {
            res = residual(x, &mut r);
            if res <= tol {
                return Ok(KrylovStats { iterations: it, residual: res });
            }
        }
    }
    res = residual(x, &mut r);
    Err(Error::NoConvergence { iterations: max_iter, residual: res })
}

/// Row-wise M-matrix test on an unreduced stencil row: nonpositive
/// off-diagonals and weak diagonal dominance.
pub fn is_m_matrix_row(diag: f64, off: &[f64]) -> bool {
    off.iter().all(|&c| c <= 0.0) && diag >= off.iter().map(|c| abs(*c)).sum::<f64>() * (1.0 - 1e-14)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solves_at_once() {
        let a = Csr::identity(5);
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut x = [0.0; 5];
        let st = bicgstab(&a, &b, &mut x, 1e-12, 10, Preconditioner::Jacobi).unwrap();
        assert!(st.iterations <= 1);
        assert_eq!(x, b);
    }

    #[test]
    fn duplicates_are_summed() {
        let a = Csr::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0), (0, 1, -1.0)]);
        assert_eq!(a.row_ptr, vec![0, 2, 3]);
        assert_eq!(a.vals, vec![3.0, -1.0, 1.0]);
    }

    #[test]
    fn nonsymmetric_tridiagonal() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i > 0 {
                t.push((i, i - 1, -1.4));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.6));
            }
        }
        let a = Csr::from_triplets(n, &t);
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        a.matvec(&xs, &mut b);
        for kind in [Preconditioner::Jacobi, Preconditioner::Ilu0] {
            let mut x = vec![0.0; n];
            bicgstab(&a, &b, &mut x, 1e-12, 500, kind).unwrap();
            for (u, v) in x.iter().zip(&xs) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        // no fill-in, so ILU(0) is the exact LU and one iteration suffices
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.5));
            }
        }
        let a = Csr::from_triplets(n, &t);
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let st = bicgstab(&a, &b, &mut x, 1e-12, 5, Preconditioner::Ilu0).unwrap();
        assert!(st.iterations <= 1);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let n = 200;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        let a = Csr::from_triplets(n, &t);
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        assert!(matches!(bicgstab(&a, &b, &mut x, 1e-14, 2, Preconditioner::Jacobi), Err(Error::NoConvergence { iterations: 2, .. })));
    }
}
