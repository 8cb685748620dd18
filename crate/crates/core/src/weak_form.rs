//! Quadrature of the two integral identities and of the trilinear form
//! `T(b, φ, ψ) = ∫ (b·∇φ) ψ` for solenoidal drifts, with mollifier test functions.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, dist, Domain, Point, QuadratureSpec, ScalarField, SingularSet, VectorField};
use crate::math::{self, exp};
use crate::norms::{self, TrailPoint};

/// `h(x) = exp(1 - 1/(1 - t²))`, `t = |x - c|/R`, zero for `t ≥ 1`; `h(c) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub center: Point,
    pub radius: f64,
}

impl BumpFunction {
    pub fn new(center: Point, radius: f64) -> Self {
        assert!(radius > 0.0);
        BumpFunction { center, radius }
    }

    /// (g(s), g'(s), g''(s)) for the profile in `s = t²`.
    fn profile(s: f64) -> (f64, f64, f64) {
        if s >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let a = 1.0 - s;
        let g = exp(1.0 - 1.0 / a);
        let g1 = -g / (a * a);
        let g2 = g * (2.0 * s - 1.0) / (a * a * a * a);
        (g, g1, g2)
    }

    pub fn support(&self) -> Domain {
        Domain::Ball { center: self.center.clone(), radius: self.radius }
    }

    /// Whether the closed support lies inside `dom`.
    pub fn inside(&self, dom: &Domain) -> bool {
        let c = self.center.as_slice();
        let slack = 1e-12;
        match dom {
            Domain::Ball { center, radius } => dist(c, center.as_slice()) + self.radius <= radius + slack,
            Domain::Cylinder { .. } => {
                let z = c[c.len() - 1];
                field::rho_of(c) + self.radius <= 1.0 + slack && math::abs(z) + self.radius <= 1.0 + slack
            }
            Domain::HalfCylinder { .. } => {
                let z = c[c.len() - 1];
                field::rho_of(c) + self.radius <= 1.0 + slack && z - self.radius >= -slack && z + self.radius <= 1.0 + slack
            }
        }
    }
}

impl ScalarField for BumpFunction {
    fn dim(&self) -> usize {
        self.center.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let d = dist(x, self.center.as_slice()) / self.radius;
        Self::profile(d * d).0
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let r2 = self.radius * self.radius;
        let mut s = 0.0;
        for (xi, ci) in x.iter().zip(self.center.as_slice()) {
            s += (xi - ci) * (xi - ci);
        }
        let (_, g1, _) = Self::profile(s / r2);
        for (o, (xi, ci)) in out.iter_mut().zip(x.iter().zip(self.center.as_slice())) {
            *o = g1 * 2.0 * (xi - ci) / r2;
        }
    }
    fn laplacian(&self, x: &[f64]) -> f64 {
        let r2 = self.radius * self.radius;
        let d2: f64 = x.iter().zip(self.center.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
        let (_, g1, g2) = Self::profile(d2 / r2);
        g2 * 4.0 * d2 / (r2 * r2) + g1 * 2.0 * self.dim() as f64 / r2
    }
}

/// Planar stream potential with value, gradient and Hessian.
pub trait StreamPotential {
    fn value(&self, x: f64, y: f64) -> f64;
    fn gradient(&self, x: f64, y: f64) -> [f64; 2];
    /// (ω_xx, ω_xy, ω_yy)
    fn hessian(&self, x: f64, y: f64) -> [f64; 3];
    fn singular_set(&self) -> SingularSet {
        SingularSet::Empty
    }
}

/// `b = (∂₂ω, -∂₁ω)`; solenoidal by construction.
#[derive(Debug, Clone)]
pub struct StreamField2D<W> {
    pub potential: W,
}

impl<W: StreamPotential> VectorField for StreamField2D<W> {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        let g = self.potential.gradient(x[0], x[1]);
        out[0] = g[1];
        out[1] = -g[0];
    }
    fn divergence(&self, _x: &[f64]) -> f64 {
        // ∂₁∂₂ω - ∂₂∂₁ω, and the mixed partials commute
        0.0
    }
    fn singular_set(&self) -> SingularSet {
        self.potential.singular_set()
    }
}

/// `ω = Σ c · xⁱ yʲ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialStream {
    pub terms: Vec<(u32, u32, f64)>,
}

fn mono(x: f64, k: u32) -> f64 {
    math::powi(x, k as i32)
}

fn dmono(x: f64, k: u32) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * mono(x, k - 1)
    }
}

fn ddmono(x: f64, k: u32) -> f64 {
    if k < 2 {
        0.0
    } else {
        (k * (k - 1)) as f64 * mono(x, k - 2)
    }
}

impl StreamPotential for PolynomialStream {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|&(i, j, c)| c * mono(x, i) * mono(y, j)).sum()
    }
    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for &(i, j, c) in &self.terms {
            g[0] += c * dmono(x, i) * mono(y, j);
            g[1] += c * mono(x, i) * dmono(y, j);
        }
        g
    }
    fn hessian(&self, x: f64, y: f64) -> [f64; 3] {
        let mut h = [0.0; 3];
        for &(i, j, c) in &self.terms {
            h[0] += c * ddmono(x, i) * mono(y, j);
            h[1] += c * dmono(x, i) * dmono(y, j);
            h[2] += c * mono(x, i) * ddmono(y, j);
        }
        h
    }
}

/// `ω = ln ln(1/|x|)` on the unit disc: `|b| = 1/(r |ln r|)`, in L₂ but unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogStream;

impl StreamPotential for LogLogStream {
    fn value(&self, x: f64, y: f64) -> f64 {
        let r = libm::hypot(x, y);
        math::ln(-math::ln(r))
    }
    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let r2 = x * x + y * y;
        let l = 0.5 * math::ln(r2);
        // φ'(r)/r with φ' = 1/(r ln r)
        let s = 1.0 / (r2 * l);
        [s * x, s * y]
    }
    fn hessian(&self, x: f64, y: f64) -> [f64; 3] {
        // ∂_i (x_i s(r)), s = 1/(r² ln r), s'(r)/r = -(2 ln r + 1)/(r⁴ ln² r)
        let r2 = x * x + y * y;
        let l = 0.5 * math::ln(r2);
        let s = 1.0 / (r2 * l);
        let t = -(2.0 * l + 1.0) / (r2 * r2 * l * l);
        [s + t * x * x, t * x * y, s + t * y * y]
    }
    fn singular_set(&self) -> SingularSet {
        SingularSet::Point(Point::origin(2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    pub value: f64,
    /// `∫ |integrand|`, the natural scale of `value`.
    pub abs_scale: f64,
    pub trail: Vec<TrailPoint>,
}

/// Trail levels: `δ·{100, 10, 1}` under polar refinement, else `cells/{4, 2, 1}`.
fn levels(q: &QuadratureSpec) -> Vec<(f64, QuadratureSpec)> {
    match &q.polar {
        Some(p) => [100.0, 10.0, 1.0].iter().map(|s| (p.delta * s, q.clone().with_delta(p.delta * s))).collect(),
        None => [4usize, 2, 1]
            .iter()
            .map(|d| {
                let c = (q.cells_per_axis / d).max(2);
                (c as f64, q.clone().with_cells(c))
            })
            .collect(),
    }
}

fn residual_with_trail<F: Fn(&[f64]) -> f64>(integrand: F, support: &Domain, q: &QuadratureSpec) -> Result<WeakResidual> {
    let mut trail = Vec::new();
    let mut last = (0.0, 0.0);
    for (level, spec) in levels(q) {
        let v = field::integrate(&integrand, support, &spec)?.value;
        let a = field::integrate(|x| math::abs(integrand(x)), support, &spec)?.value;
        trail.push(TrailPoint { level, value: v });
        last = (v, a);
    }
    Ok(WeakResidual { value: last.0, abs_scale: last.1, trail })
}

/// `∫ ∇u · (∇h + b h) dx` over the support of `h`.
pub fn weak_residual_grad_form<S: ScalarField + ?Sized, V: VectorField + ?Sized>(
    u: &S,
    b: &V,
    h: &BumpFunction,
    dom: &Domain,
    q: &QuadratureSpec,
) -> Result<WeakResidual> {
    if !h.inside(dom) {
        return Err(Error::SupportViolation);
    }
    let n = h.dim();
    let integrand = |x: &[f64]| {
        let hv = h.value(x);
        let mut gu = [0.0; 16];
        let mut gh = [0.0; 16];
        let mut bv = [0.0; 16];
        u.gradient(x, &mut gu[..n]);
        h.gradient(x, &mut gh[..n]);
        b.value(x, &mut bv[..n]);
        (0..n).map(|i| gu[i] * (gh[i] + bv[i] * hv)).sum()
    };
    residual_with_trail(integrand, &h.support(), q)
}

/// `∫ u (Δh + b·∇h) dx` over the support of `h`; `u` only needs values.
pub fn weak_residual_div_form<U: Fn(&[f64]) -> f64, V: VectorField + ?Sized>(
    u: U,
    b: &V,
    h: &BumpFunction,
    dom: &Domain,
    q: &QuadratureSpec,
) -> Result<WeakResidual> {
    if !h.inside(dom) {
        return Err(Error::SupportViolation);
    }
    let n = h.dim();
    let integrand = |x: &[f64]| {
        let mut gh = [0.0; 16];
        let mut bv = [0.0; 16];
        h.gradient(x, &mut gh[..n]);
        b.value(x, &mut bv[..n]);
        let drift: f64 = (0..n).map(|i| bv[i] * gh[i]).sum();
        u(x) * (h.laplacian(x) + drift)
    };
    residual_with_trail(integrand, &h.support(), q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trilinear {
    pub value: f64,
    pub abs_scale: f64,
    pub b_l2: f64,
    pub grad_phi_l2: f64,
    pub grad_psi_l2: f64,
    /// `|T| / (‖b‖₂ ‖∇φ‖₂ ‖∇ψ‖₂)`
    pub quotient: f64,
}

const DIVERGENCE_TOL: f64 = 1e-6;

fn check_solenoidal<V: VectorField + ?Sized>(b: &V, probes: &[Point]) -> Result<()> {
    let sing = b.singular_set();
    let mut worst: f64 = 0.0;
    for p in probes {
        let x = p.as_slice();
        let d = sing.distance(x);
        let h = 5e-3 * d.min(1.0);
        if !(d > 1e-6) {
            continue;
        }
        worst = worst.max(math::abs(field::fd_divergence6(b, x, h)));
    }
    if worst > DIVERGENCE_TOL {
        return Err(Error::NotDivergenceFree { max_divergence: worst });
    }
    Ok(())
}

fn probes_in(bump: &BumpFunction, count: usize) -> Vec<Point> {
    let n = bump.dim();
    (0..count as u64)
        .map(|i| {
            let u = math::halton(i, n);
            Point::new(u.iter().zip(bump.center.as_slice()).map(|(u, c)| c + 0.7 * bump.radius * (2.0 * u - 1.0)).collect())
        })
        .collect()
}

/// `T(b, φ, ψ) = ∫ (b·∇φ) ψ` and its Rayleigh quotient. `‖b‖₂` is taken over `dom`.
pub fn trilinear_form<V: VectorField + ?Sized>(
    b: &V,
    phi: &BumpFunction,
    psi: &BumpFunction,
    dom: &Domain,
    q: &QuadratureSpec,
) -> Result<Trilinear> {
    if !phi.inside(dom) || !psi.inside(dom) {
        return Err(Error::SupportViolation);
    }
    let mut probes = probes_in(phi, 16);
    probes.extend(probes_in(psi, 16));
    check_solenoidal(b, &probes)?;
    let n = phi.dim();
    let integrand = |x: &[f64]| {
        let mut g = [0.0; 16];
        let mut bv = [0.0; 16];
        phi.gradient(x, &mut g[..n]);
        b.value(x, &mut bv[..n]);
        (0..n).map(|i| bv[i] * g[i]).sum::<f64>() * psi.value(x)
    };
    let support = phi.support();
    let value = field::integrate(integrand, &support, q)?.value;
    let abs_scale = field::integrate(|x| math::abs(integrand(x)), &support, q)?.value;
    let b_l2 = norms::lp_norm(norms::magnitude(b), dom, 2.0, q)?.value;
    let plain = QuadratureSpec { polar: None, ..q.clone() };
    let grad_phi_l2 = norms::w12_seminorm(phi, &phi.support(), &plain)?.value;
    let grad_psi_l2 = norms::w12_seminorm(psi, &psi.support(), &plain)?.value;
    let denom = b_l2 * grad_phi_l2 * grad_psi_l2;
    Ok(Trilinear {
        value,
        abs_scale,
        b_l2,
        grad_phi_l2,
        grad_psi_l2,
        quotient: if denom > 0.0 { math::abs(value) / denom } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayleighSweep {
    pub max_quotient: f64,
    /// (stream index, pair index, quotient)
    pub quotients: Vec<(usize, usize, f64)>,
}

/// Largest Rayleigh quotient over every (stream, bump pair) combination.
pub fn rayleigh_sweep<V: VectorField>(
    streams: &[V],
    pairs: &[(BumpFunction, BumpFunction)],
    dom: &Domain,
    q: &QuadratureSpec,
) -> Result<RayleighSweep> {
    let mut quotients = Vec::new();
    let mut max_quotient: f64 = 0.0;
    for (i, b) in streams.iter().enumerate() {
        for (j, (phi, psi)) in pairs.iter().enumerate() {
            let t = trilinear_form(b, phi, psi, dom, q)?;
            max_quotient = max_quotient.max(t.quotient);
            quotients.push((i, j, t.quotient));
        }
    }
    Ok(RayleighSweep { max_quotient, quotients })
}

/// Seeded random polynomial stream potentials of total degree ≤ `degree`.
pub fn random_polynomial_streams(count: usize, degree: u32, seed: u64) -> Vec<StreamField2D<PolynomialStream>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut terms = Vec::new();
            for i in 0..=degree {
                for j in 0..=(degree - i) {
                    if i + j >= 1 {
                        terms.push((i, j, rng.random_range(-1.0..1.0)));
                    }
                }
            }
            StreamField2D { potential: PolynomialStream { terms } }
        })
        .collect()
}

/// Seeded pairs of overlapping bumps inside the planar ball `dom`.
pub fn random_bump_pairs(count: usize, dom: &Domain, seed: u64) -> Result<Vec<(BumpFunction, BumpFunction)>> {
    let (c, radius) = match dom {
        Domain::Ball { center, radius } if center.dim() == 2 => (center.as_slice().to_vec(), *radius),
        _ => return Err(Error::InvalidInput("bump pairs are drawn in a planar ball".into())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let r1 = radius * rng.random_range(0.15..0.35);
        let r2 = radius * rng.random_range(0.15..0.35);
        let a = rng.random_range(0.0..core::f64::consts::TAU);
        let s = rng.random_range(0.0..0.4) * radius;
        let c1 = [c[0] + s * math::cos(a), c[1] + s * math::sin(a)];
        let a2 = rng.random_range(0.0..core::f64::consts::TAU);
        let sep = rng.random_range(0.2..0.8) * (r1 + r2) * 0.5;
        let c2 = [c1[0] + sep * math::cos(a2), c1[1] + sep * math::sin(a2)];
        let phi = BumpFunction::new(Point::new(vec![c1[0], c1[1]]), r1);
        let psi = BumpFunction::new(Point::new(vec![c2[0], c2[1]]), r2);
        if phi.inside(dom) && psi.inside(dom) {
            out.push((phi, psi));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Constant, ZeroVector};

    #[test]
    fn bump_vanishes_outside_support() {
        let h = BumpFunction::new(Point::new(vec![0.1, 0.2]), 0.3);
        let mut g = [0.0; 2];
        for x in [[0.4, 0.2], [0.1, 0.5], [1.0, 1.0]] {
            assert_eq!(h.value(&x), 0.0);
            h.gradient(&x, &mut g);
            assert_eq!(g, [0.0, 0.0]);
            assert_eq!(h.laplacian(&x), 0.0);
        }
        assert_eq!(h.value(&[0.1, 0.2]), 1.0);
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let h = BumpFunction::new(Point::new(vec![0.0, 0.0, 0.1]), 0.5);
        for x in [[0.1, 0.2, 0.0], [-0.3, 0.1, 0.3], [0.0, 0.0, 0.45]] {
            let e = field::fd_check_gradient(&h, &Point::new(x.to_vec()), 1e-5).unwrap();
            assert!(e < 1e-7, "{e}");
            let lap = field::fd_laplacian(&h, &x, 1e-4);
            assert!((lap - h.laplacian(&x)).abs() < 1e-4 * (1.0 + lap.abs()));
        }
    }

    #[test]
    fn constant_solution_has_zero_residual() {
        let dom = Domain::ball(2, 1.0).unwrap();
        let h = BumpFunction::new(Point::new(vec![0.2, 0.0]), 0.4);
        let u = Constant { dim: 2, value: 3.0 };
        let b = StreamField2D { potential: PolynomialStream { terms: vec![(1, 1, 1.0)] } };
        let r = weak_residual_grad_form(&u, &b, &h, &dom, &QuadratureSpec::gauss(4, 16)).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn support_violation() {
        let dom = Domain::ball(2, 1.0).unwrap();
        let h = BumpFunction::new(Point::new(vec![0.8, 0.0]), 0.4);
        let u = Constant { dim: 2, value: 1.0 };
        let e = weak_residual_grad_form(&u, &ZeroVector { dim: 2 }, &h, &dom, &QuadratureSpec::default());
        assert!(matches!(e, Err(Error::SupportViolation)));
    }

    #[test]
    fn loglog_stream_hessian_matches_gradient_differences() {
        let w = LogLogStream;
        let (x, y, e) = (0.12, -0.05, 1e-6);
        let gx = w.gradient(x + e, y);
        let gm = w.gradient(x - e, y);
        let h = w.hessian(x, y);
        assert!(((gx[0] - gm[0]) / (2.0 * e) - h[0]).abs() < 1e-4 * h[0].abs());
        assert!(((gx[1] - gm[1]) / (2.0 * e) - h[1]).abs() < 1e-4 * h[1].abs().max(1.0));
        // gradient vs value
        let d = (w.value(x + e, y) - w.value(x - e, y)) / (2.0 * e);
        assert!((d - w.gradient(x, y)[0]).abs() < 1e-6 * d.abs());
    }

    #[test]
    fn non_solenoidal_drift_is_rejected() {
        struct Radial;
        impl VectorField for Radial {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, x: &[f64], out: &mut [f64]) {
                out.copy_from_slice(x);
            }
            fn divergence(&self, _: &[f64]) -> f64 {
                2.0
            }
        }
        let dom = Domain::ball(2, 1.0).unwrap();
        let phi = BumpFunction::new(Point::new(vec![0.0, 0.0]), 0.3);
        let e = trilinear_form(&Radial, &phi, &phi, &dom, &QuadratureSpec::gauss(4, 8));
        assert!(matches!(e, Err(Error::NotDivergenceFree { .. })));
    }

    #[test]
    fn zero_drift_gives_zero_trilinear() {
        let dom = Domain::ball(2, 1.0).unwrap();
        let phi = BumpFunction::new(Point::new(vec![0.0, 0.1]), 0.3);
        let psi = BumpFunction::new(Point::new(vec![0.1, 0.0]), 0.3);
        let t = trilinear_form(&ZeroVector { dim: 2 }, &phi, &psi, &dom, &QuadratureSpec::gauss(4, 8)).unwrap();
        assert_eq!(t.value, 0.0);
        assert_eq!(t.quotient, 0.0);
    }

    #[test]
    fn random_streams_are_reproducible() {
        let a = random_polynomial_streams(3, 3, 7);
        let b = random_polynomial_streams(3, 3, 7);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.potential, y.potential);
        }
        let dom = Domain::ball(2, 1.0).unwrap();
        assert_eq!(random_bump_pairs(4, &dom, 3).unwrap(), random_bump_pairs(4, &dom, 3).unwrap());
    }
}
