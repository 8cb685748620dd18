//! The explicit counterexample pairs `(u, b)` and the explicit 1D solution.
//!
//! All four pairs are radial: `u = φ(|x|)` and `b = β(|x|) x/|x|`, so the strong
//! residual reduces to `-(φ'' + (n-1)φ'/r) + βφ'`, and each profile below carries
//! hand-derived first and second derivatives.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Point, RadialProfile, RadialScalar, RadialVector, ScalarField, VectorField};
use crate::math::{self, composite_nodes, exp, gauss_legendre, ln};
use crate::field::{QuadratureSpec, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExampleId {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
}

impl ExampleId {
    pub const ALL: [ExampleId; 4] = [ExampleId::Ex1, ExampleId::Ex2, ExampleId::Ex3, ExampleId::Ex4];

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ex1" | "1" => Some(ExampleId::Ex1),
            "ex2" | "2" => Some(ExampleId::Ex2),
            "ex3" | "3" => Some(ExampleId::Ex3),
            "ex4" | "4" => Some(ExampleId::Ex4),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExampleId::Ex1 => "ex1",
            ExampleId::Ex2 => "ex2",
            ExampleId::Ex3 => "ex3",
            ExampleId::Ex4 => "ex4",
        }
    }
}

/// Property claims attached to an example, checked by the norm and Hölder tools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Claim {
    DriftInL2,
    /// `b ∈ L_p` for every `p < n`.
    DriftInLpBelowN,
    SolutionInW12,
    SolutionUnbounded,
    SolutionContinuous,
    SolutionNotHolder,
    DriftNotDivergenceFree,
}

/// Radial solution profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolutionProfile {
    /// `ln |ln r|`
    LogLog,
    /// `1 / ln r`
    InverseLog,
    /// `ln r`
    Log,
}

impl RadialProfile for SolutionProfile {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let l = ln(r);
        match self {
            SolutionProfile::LogLog => (
                ln(math::abs(l)),
                1.0 / (r * l),
                -(l + 1.0) / (r * r * l * l),
            ),
            SolutionProfile::InverseLog => (
                1.0 / l,
                -1.0 / (r * l * l),
                (l + 2.0) / (r * r * l * l * l),
            ),
            SolutionProfile::Log => (l, 1.0 / r, -1.0 / (r * r)),
        }
    }
}

/// Radial drift profiles `β(r)` (value, β', unused).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DriftProfile {
    /// `-c / (r ln r)`
    InverseRLog { c: f64 },
    /// `c / r`
    InverseR { c: f64 },
    /// `(n-2)/r - 2/(r ln r)`
    Ex4 { n: usize },
}

impl RadialProfile for DriftProfile {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let l = ln(r);
        match *self {
            DriftProfile::InverseRLog { c } => (-c / (r * l), c * (l + 1.0) / (r * r * l * l), 0.0),
            DriftProfile::InverseR { c } => (c / r, -c / (r * r), 0.0),
            DriftProfile::Ex4 { n } => {
                let a = (n as f64 - 2.0) / r;
                let da = -(n as f64 - 2.0) / (r * r);
                (a - 2.0 / (r * l), da + 2.0 * (l + 1.0) / (r * r * l * l), 0.0)
            }
        }
    }
}

pub type ExampleSolution = RadialScalar<SolutionProfile>;
pub type ExampleDrift = RadialVector<DriftProfile>;

#[derive(Debug, Clone)]
pub struct ExampleCase {
    pub id: ExampleId,
    pub dim: usize,
    pub radius: f64,
    pub u: ExampleSolution,
    pub b: ExampleDrift,
    pub claims: Vec<Claim>,
}

/// Builds one of the four examples. Ex1/Ex2 live in the plane; Ex3/Ex4 take any
/// `n ≥ 3` (default 3).
pub fn make_example(id: ExampleId, n_override: Option<usize>) -> Result<ExampleCase> {
    let dim = match (id, n_override) {
        (ExampleId::Ex1 | ExampleId::Ex2, Some(n)) => {
            return Err(Error::BadDimension { requested: n, reason: "examples 1 and 2 are planar (n = 2)" })
        }
        (ExampleId::Ex1 | ExampleId::Ex2, None) => 2,
        (_, Some(n)) if n < 3 => return Err(Error::BadDimension { requested: n, reason: "examples 3 and 4 need n >= 3" }),
        (_, Some(n)) => n,
        (_, None) => 3,
    };
    let (radius, sol, drift, claims): (f64, _, _, &[Claim]) = match id {
        ExampleId::Ex1 => (
            1.0 / core::f64::consts::E,
            SolutionProfile::LogLog,
            DriftProfile::InverseRLog { c: 1.0 },
            &[Claim::DriftInL2, Claim::SolutionInW12, Claim::SolutionUnbounded],
        ),
        ExampleId::Ex2 => (
            0.5,
            SolutionProfile::InverseLog,
            DriftProfile::InverseRLog { c: 2.0 },
            &[Claim::DriftInL2, Claim::SolutionInW12, Claim::SolutionContinuous, Claim::SolutionNotHolder],
        ),
        ExampleId::Ex3 => (
            1.0,
            SolutionProfile::Log,
            DriftProfile::InverseR { c: dim as f64 - 2.0 },
            &[Claim::DriftInLpBelowN, Claim::SolutionInW12, Claim::SolutionUnbounded],
        ),
        ExampleId::Ex4 => (
            0.5,
            SolutionProfile::InverseLog,
            DriftProfile::Ex4 { n: dim },
            &[
                Claim::DriftInLpBelowN,
                Claim::SolutionInW12,
                Claim::SolutionContinuous,
                Claim::SolutionNotHolder,
                Claim::DriftNotDivergenceFree,
            ],
        ),
    };
    Ok(ExampleCase {
        id,
        dim,
        radius,
        u: RadialScalar { dim, center: Point::origin(dim), profile: sol },
        b: RadialVector { dim, profile: drift },
        claims: claims.to_vec(),
    })
}

/// `-Δu(p) + b(p)·∇u(p)` from the analytic derivatives.
pub fn strong_residual<S: ScalarField, V: VectorField>(u: &S, b: &V, p: &[f64]) -> Result<f64> {
    let d = u.singular_set().distance(p).min(b.singular_set().distance(p));
    if !(d > 0.0) {
        return Err(Error::SingularProbe { distance: d });
    }
    let n = p.len();
    let mut g = alloc::vec![0.0; n];
    let mut bv = alloc::vec![0.0; n];
    u.gradient(p, &mut g);
    b.value(p, &mut bv);
    Ok(-u.laplacian(p) + math::dot(&bv, &g))
}

impl ExampleCase {
    pub fn strong_residual(&self, p: &[f64]) -> Result<f64> {
        strong_residual(&self.u, &self.b, p)
    }
}

/// `u(x) = C1 ∫_0^x exp(∫_0^y b(t) dt) dy + C2` by nested Gauss quadrature.
///
/// The inner integral is accumulated panel by panel along the outer nodes, so
/// the cost is linear in the number of cells.
pub fn solve_1d<B: Fn(f64) -> f64>(b: B, c1: f64, c2: f64, x: f64, q: &QuadratureSpec) -> Result<f64> {
    q.validate()?;
    if c1 == 0.0 {
        return Ok(c2);
    }
    let order = match q.scheme {
        Scheme::Gauss(k) => k,
        Scheme::Midpoint => 1,
    };
    let rule = gauss_legendre(order);
    let cells = q.cells_per_axis;
    let h = x / cells as f64;
    let mut outer = 0.0;
    let mut inner_at_left = 0.0;
    for c in 0..cells {
        let lo = h * c as f64;
        for &(y, w) in &composite_nodes(lo, lo + h, 1, &rule) {
            let inner = inner_at_left + integrate_1d(&b, lo, y, &rule);
            let e = exp(inner);
            if !e.is_finite() {
                return Err(Error::NonFiniteSample { at: [y, 0.0, 0.0] });
            }
            outer += w * e;
        }
        inner_at_left += integrate_1d(&b, lo, lo + h, &rule);
    }
    Ok(c1 * outer + c2)
}

fn integrate_1d<B: Fn(f64) -> f64>(b: &B, a: f64, c: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    composite_nodes(a, c, 1, rule).into_iter().map(|(t, w)| w * b(t)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ex1_drift_value() {
        let c = make_example(ExampleId::Ex1, None).unwrap();
        assert_eq!(c.dim, 2);
        assert!((c.radius - 0.36787944117144233).abs() < 1e-15);
        let mut b = [0.0; 2];
        c.b.value(&[0.1, 0.0], &mut b);
        assert!((b[0] - 4.342944819032518).abs() < 1e-12);
        assert_eq!(b[1], 0.0);
    }

    #[test]
    fn ex2_value_at_inverse_e() {
        let c = make_example(ExampleId::Ex2, None).unwrap();
        let r = (-1.0f64).exp();
        assert!((c.u.value(&[r, 0.0]) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn ex3_formula() {
        let c = make_example(ExampleId::Ex3, None).unwrap();
        assert_eq!((c.dim, c.radius), (3, 1.0));
        let p = [0.3, -0.4, 0.0];
        assert!((c.u.value(&p) - 0.5f64.ln()).abs() < 1e-15);
        let mut b = [0.0; 3];
        c.b.value(&p, &mut b);
        // (n-2) x / |x|^2 with |x| = 0.5
        assert!((b[0] - 1.2).abs() < 1e-14 && (b[1] + 1.6).abs() < 1e-14);
    }

    #[test]
    fn dimension_overrides() {
        assert!(matches!(make_example(ExampleId::Ex1, Some(3)), Err(Error::BadDimension { .. })));
        assert!(matches!(make_example(ExampleId::Ex3, Some(2)), Err(Error::BadDimension { .. })));
        assert_eq!(make_example(ExampleId::Ex4, Some(5)).unwrap().dim, 5);
    }

    #[test]
    fn residual_terms_ex1() {
        let c = make_example(ExampleId::Ex1, None).unwrap();
        let p = [0.1, 0.0];
        // both terms equal -1/(r^2 ln^2 r) = -18.861...
        let lap = c.u.laplacian(&p);
        assert!((lap + 18.861169701161393).abs() < 1e-9, "{lap}");
        assert!(c.strong_residual(&p).unwrap().abs() < 1e-10);
    }

    #[test]
    fn residual_ex3_and_perturbation() {
        let c = make_example(ExampleId::Ex3, None).unwrap();
        let p = [0.5, 0.0, 0.0];
        assert!((c.u.laplacian(&p) - 4.0).abs() < 1e-12);
        assert!(c.strong_residual(&p).unwrap().abs() < 1e-12);
        let doubled = crate::field::Scaled { factor: 2.0, inner: &c.b };
        let r = strong_residual(&c.u, &doubled, &p).unwrap();
        assert!((r - 4.0).abs() < 1e-12);
    }

    #[test]
    fn residual_at_origin_is_singular() {
        let c = make_example(ExampleId::Ex2, None).unwrap();
        assert!(matches!(c.strong_residual(&[0.0, 0.0]), Err(Error::SingularProbe { .. })));
    }

    #[test]
    fn explicit_1d_solution() {
        let q = QuadratureSpec::gauss(4, 64);
        assert!((solve_1d(|_| 0.0, 1.0, 0.0, 0.7, &q).unwrap() - 0.7).abs() < 1e-14);
        let e1 = solve_1d(|_| 1.0, 1.0, 0.0, 1.0, &q).unwrap();
        assert!((e1 - (core::f64::consts::E - 1.0)).abs() < 1e-6);
        assert_eq!(solve_1d(|t| 1e3 * t, 0.0, 5.0, 0.3, &q).unwrap(), 5.0);
    }
}
