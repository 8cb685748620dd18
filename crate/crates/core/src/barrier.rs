//! The cone construction: a smooth cutoff η, the profile f on [ε, 1], the
//! stream function `H_ε = ρⁿ⁻¹ z^(-μ) η(z/ε) η(z/ρ)` with its drift
//! `b_ε = K ρ^(2-n) (∂_z H, -∂_ρ H)`, and the barrier `v_ε = f(z) cos(πρ/2z)`.
//!
//! Everything is axisymmetric and is evaluated in `(ρ, z)`; [`CartesianDrift`]
//! lifts a drift to ℝⁿ for divergence probes and norms.

use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, Domain, Point, QuadratureSpec, SingularSet, VectorField};
use num_complex::Complex64;

use crate::math::{self, abs, cos, exp, gauss_legendre, powf, sin, Scalar};

const STEP_PANELS: usize = 512;
const STEP_ORDER: usize = 8;

/// C^∞ step: 0 on `t ≤ 1/2`, 1 on `t ≥ 1`, and `S(2t - 1)` in between with
/// `S(s) = ∫₀ˢ m / ∫₀¹ m`, `m(s) = exp(-1/(s(1-s)))`.
///
/// `S` is tabulated at panel ends; the partial panel is integrated on the fly
/// with the same Gauss rule, so `η'` is the exact derivative of the value.
#[derive(Debug, Clone)]
pub struct SmoothStep {
    cumulative: Vec<f64>,
    total: f64,
    rule: (Vec<f64>, Vec<f64>),
}

fn bump_density<T: Scalar>(s: T) -> T {
    let r = s.re();
    if r <= 0.0 || r >= 1.0 {
        T::from(0.0)
    } else {
        (-(T::from(1.0) / (s * (T::from(1.0) - s)))).exp()
    }
}

impl Default for SmoothStep {
    fn default() -> Self {
        Self::new()
    }
}

impl SmoothStep {
    pub fn new() -> Self {
        let rule = gauss_legendre(STEP_ORDER);
        let mut cumulative = Vec::with_capacity(STEP_PANELS + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        let h = 1.0 / STEP_PANELS as f64;
        for k in 0..STEP_PANELS {
            acc += Self::panel(&rule, k as f64 * h, (k + 1) as f64 * h);
            cumulative.push(acc);
        }
        SmoothStep { cumulative, total: acc, rule }
    }

    fn panel<T: Scalar>(rule: &(Vec<f64>, Vec<f64>), a: f64, b: T) -> T {
        let half = (b - T::from(a)) * T::from(0.5);
        let mid = (b + T::from(a)) * T::from(0.5);
        let mut acc = T::from(0.0);
        for (x, w) in rule.0.iter().zip(&rule.1) {
            acc = acc + T::from(*w) * half * bump_density(mid + half * T::from(*x));
        }
        acc
    }

    fn s_value<T: Scalar>(&self, s: T) -> T {
        let k = ((s.re() * STEP_PANELS as f64) as usize).min(STEP_PANELS - 1);
        let a = k as f64 / STEP_PANELS as f64;
        (T::from(self.cumulative[k]) + Self::panel(&self.rule, a, s)) / T::from(self.total)
    }

    /// η at a real or complex argument; plateaus are decided on the real part.
    pub fn value_at<T: Scalar>(&self, t: T) -> T {
        let r = t.re();
        if r <= 0.5 {
            T::from(0.0)
        } else if r >= 1.0 {
            T::from(1.0)
        } else {
            self.s_value(T::from(2.0) * t - T::from(1.0))
        }
    }

    pub fn derivative_at<T: Scalar>(&self, t: T) -> T {
        let r = t.re();
        if r <= 0.5 || r >= 1.0 {
            T::from(0.0)
        } else {
            T::from(2.0 / self.total) * bump_density(T::from(2.0) * t - T::from(1.0))
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.value_at(t).clamp(0.0, 1.0)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.derivative_at(t)
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        if t <= 0.5 || t >= 1.0 {
            return 0.0;
        }
        let s = 2.0 * t - 1.0;
        let q = s * (1.0 - s);
        4.0 * bump_density(s) * (1.0 - 2.0 * s) / (q * q) / self.total
    }

    /// (η, η', η'')
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        (self.value(t), self.derivative(t), self.second_derivative(t))
    }
}

/// Closed-form constants of the construction for given `(n, μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub d_mu: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub k_min: f64,
}

pub fn derive_constants(n: usize, mu: f64) -> Result<Constants> {
    check_shape(n, mu)?;
    let d_mu = 0.5 + powf(2.0, 3.0 - mu) / ((2.0 - mu) * (mu - 1.0));
    let c1 = 1.0 / (6.0 * d_mu);
    let c2 = ((2.0 - mu) * d_mu / 2.0).max((2.0 - mu) * powf(2.0, mu - 3.0) * d_mu);
    let c3 = ((2.0 - mu) * powf(2.0, mu - 1.0)).max(2.0 - mu);
    let nf = n as f64;
    let k_min = (4.0 * nf / (nf - mu - 1.0)).max(PI * PI * c2 + c3);
    Ok(Constants { d_mu, c1, c2, c3, k_min })
}

fn check_shape(n: usize, mu: f64) -> Result<()> {
    if n < 3 {
        return Err(Error::BadDimension { requested: n, reason: "the cone construction needs n >= 3" });
    }
    let upper = 2.0f64.min(n as f64 - 1.0);
    if !(mu > 1.0 && mu < upper) {
        return Err(Error::ParamOutOfRange { name: "mu", value: mu, constraint: "1 < mu < min(2, n - 1)" });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub n: usize,
    pub mu: f64,
    pub eps: f64,
    pub p_target: f64,
    pub k: f64,
}

impl Default for BarrierParams {
    fn default() -> Self {
        BarrierParams { n: 3, mu: 1.25, eps: 0.05, p_target: 2.0, k: 70.0 }
    }
}

impl BarrierParams {
    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    pub fn constants(&self) -> Result<Constants> {
        derive_constants(self.n, self.mu)
    }

    /// Every constraint except the lower bound on K.
    pub fn validate_shape(&self) -> Result<()> {
        check_shape(self.n, self.mu)?;
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::ParamOutOfRange { name: "eps", value: self.eps, constraint: "0 < eps < 1/2" });
        }
        if !(self.p_target >= 1.0 && self.p_target < self.n as f64 / self.mu) {
            return Err(Error::ParamOutOfRange { name: "p", value: self.p_target, constraint: "1 <= p < n/mu" });
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::ParamOutOfRange { name: "K", value: self.k, constraint: "K > 0" });
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        let c = self.constants()?;
        if !(self.k > c.k_min) {
            return Err(Error::ParamOutOfRange {
                name: "K",
                value: self.k,
                constraint: "K > max(4n/(n-mu-1), pi^2 c2 + c3)",
            });
        }
        Ok(())
    }
}

/// Which piece of `h` to use; only matters at the seam `z = 2ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Quadratic,
    Power,
}

/// `f = g/g(1)` with `g(z) = ∫_ε^z h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FProfile {
    pub mu: f64,
    pub eps: f64,
    pub g_one: f64,
}

impl FProfile {
    pub fn new(mu: f64, eps: f64) -> Self {
        let mut p = FProfile { mu, eps, g_one: 1.0 };
        p.g_one = p.g(1.0, Branch::Power);
        p
    }

    pub fn branch(&self, z: f64) -> Branch {
        if z <= 2.0 * self.eps {
            Branch::Quadratic
        } else {
            Branch::Power
        }
    }

    /// Closed-form `g(2ε) = 1/6 + (1/3 + 2/(2-μ)) ε^(μ-1)`.
    pub fn g_seam(&self) -> f64 {
        1.0 / 6.0 + (1.0 / 3.0 + 2.0 / (2.0 - self.mu)) * powf(self.eps, self.mu - 1.0)
    }

    /// (h, h') on the requested branch.
    pub fn h(&self, t: f64, branch: Branch) -> (f64, f64) {
        let (mu, e) = (self.mu, self.eps);
        match branch {
            Branch::Quadratic => {
                let tau = t / e;
                let lo = 1.0 / e;
                let hi = powf(e, mu - 2.0);
                let h = lo * 0.5 * (tau - 2.0) * (tau - 2.0) + hi * (-0.5 * tau * tau + tau + 2.0 / (2.0 - mu));
                let dh = (lo * (tau - 2.0) + hi * (1.0 - tau)) / e;
                (h, dh)
            }
            Branch::Power => {
                let a = powf(2.0, 3.0 - mu);
                (a / (2.0 - mu) * powf(t, mu - 2.0), -a * powf(t, mu - 3.0))
            }
        }
    }

    pub fn g(&self, z: f64, branch: Branch) -> f64 {
        let (mu, e) = (self.mu, self.eps);
        match branch {
            Branch::Quadratic => {
                let tau = z / e;
                let d = tau - 2.0;
                (d * d * d + 1.0) / 6.0
                    + powf(e, mu - 1.0)
                        * (-(tau * tau * tau - 1.0) / 6.0 + (tau * tau - 1.0) / 2.0 + 2.0 * (tau - 1.0) / (2.0 - mu))
            }
            Branch::Power => {
                let a = powf(2.0, 3.0 - mu) / ((2.0 - mu) * (mu - 1.0));
                self.g_seam() + a * (powf(z, mu - 1.0) - powf(2.0 * e, mu - 1.0))
            }
        }
    }

    /// (f, f', f'') on a given branch.
    pub fn eval_branch(&self, z: f64, branch: Branch) -> (f64, f64, f64) {
        let (h, dh) = self.h(z, branch);
        (self.g(z, branch) / self.g_one, h / self.g_one, dh / self.g_one)
    }

    pub fn eval(&self, z: f64) -> (f64, f64, f64) {
        self.eval_branch(z, self.branch(z))
    }
}

/// (f, f', f'') at `z ∈ [ε, 1]`.
pub fn f_eps(z: f64, params: &BarrierParams) -> Result<(f64, f64, f64)> {
    if !(z >= params.eps && z <= 1.0) {
        return Err(Error::OutOfDomain { name: "z", value: z });
    }
    Ok(FProfile::new(params.mu, params.eps).eval(z))
}

/// Value, `∂_ρ`, `∂_z` and axisymmetric Laplacian of the barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierValue {
    pub v: f64,
    pub d_rho: f64,
    pub d_z: f64,
    pub laplacian: f64,
}

/// All pieces of the construction for one parameter set.
#[derive(Debug, Clone)]
pub struct Barrier {
    pub params: BarrierParams,
    pub constants: Constants,
    pub profile: FProfile,
    step: SmoothStep,
}

impl Barrier {
    /// Accepts any K > 0 so that undersized K can be examined; use
    /// [`BarrierParams::validate`] to enforce the lower bound.
    pub fn new(params: BarrierParams) -> Result<Self> {
        params.validate_shape()?;
        Ok(Barrier {
            constants: params.constants()?,
            profile: FProfile::new(params.mu, params.eps),
            step: SmoothStep::new(),
            params,
        })
    }

    pub fn step(&self) -> &SmoothStep {
        &self.step
    }

    /// `H_ε(ρ, z)`, odd in z.
    pub fn h_eps(&self, rho: f64, z: f64) -> f64 {
        self.stream(rho, z, true)
    }

    fn stream(&self, rho: f64, z: f64, cut: bool) -> f64 {
        let p = &self.params;
        let s = if z < 0.0 { -1.0 } else { 1.0 };
        let z = abs(z);
        if z == 0.0 {
            return 0.0;
        }
        let a = if cut { self.step.value(z / p.eps) } else { 1.0 };
        let b = if rho == 0.0 { 1.0 } else { self.step.value(z / rho) };
        s * math::powi(rho, p.n as i32 - 1) * powf(z, -p.mu) * a * b
    }

    fn drift(&self, rho: f64, z: f64, cut: bool) -> (f64, f64) {
        self.drift_at(rho, z, cut)
    }

    fn drift_at<T: Scalar>(&self, rho: T, z: T, cut: bool) -> (T, T) {
        let p = &self.params;
        let zero = T::from(0.0);
        let s = if z.re() < 0.0 { -1.0 } else { 1.0 };
        let z = if s < 0.0 { -z } else { z };
        let (a, da) = if cut {
            let t = z / T::from(p.eps);
            (self.step.value_at(t), self.step.derivative_at(t) / T::from(p.eps))
        } else {
            (T::from(1.0), zero)
        };
        if a.re() == 0.0 && da.re() == 0.0 {
            return (zero, zero);
        }
        let on_axis = rho.re() == 0.0;
        let (b, db) = if on_axis {
            (T::from(1.0), zero)
        } else {
            let t = z / rho;
            (self.step.value_at(t), self.step.derivative_at(t))
        };
        let zm = z.powf(-p.mu);
        let k = T::from(p.k);
        let n1 = T::from(p.n as f64 - 1.0);
        // ρ^(2-n) ∂_z H and ρ^(2-n) ∂_ρ H with the ρ powers cancelled
        let b_rho = k * (rho * (-T::from(p.mu) * zm / z * a * b + zm * da * b) + zm * a * db);
        let b_z = if on_axis { -k * zm * a * n1 * b } else { -k * zm * a * (n1 * b - (z / rho) * db) };
        (b_rho, T::from(s) * b_z)
    }

    /// `(b_ρ, b_z)` of `b_ε`; `b_ρ` even and `b_z` odd in z.
    pub fn b_eps(&self, rho: f64, z: f64) -> (f64, f64) {
        self.drift(rho, z, true)
    }

    /// The limit drift without the `η(z/ε)` cutoff.
    pub fn b_zero(&self, rho: f64, z: f64) -> Result<(f64, f64)> {
        if z == 0.0 {
            return Err(Error::SingularProbe { distance: 0.0 });
        }
        Ok(self.drift(rho, z, false))
    }

    /// `b_ε` on `{z/ρ ≥ 1, z ≥ ε}`: `(-μKρz^(-1-μ), -(n-1)Kz^(-μ))`.
    pub fn b_cone(&self, rho: f64, z: f64) -> (f64, f64) {
        let p = &self.params;
        (-p.mu * p.k * rho * powf(z, -1.0 - p.mu), -(p.n as f64 - 1.0) * p.k * powf(z, -p.mu))
    }

    pub fn in_cone(&self, rho: f64, z: f64) -> bool {
        z >= self.params.eps && z <= 1.0 && rho >= 0.0 && rho <= z
    }

    pub fn v_eps(&self, rho: f64, z: f64) -> Result<BarrierValue> {
        if !self.in_cone(rho, z) {
            return Err(Error::OutOfDomain { name: if rho > z { "rho" } else { "z" }, value: if rho > z { rho } else { z } });
        }
        let (f, f1, f2) = self.profile.eval(z);
        let th = PI * rho / (2.0 * z);
        let (c, s) = (cos(th), sin(th));
        let k = PI / (2.0 * z);
        let v = f * c;
        let d_rho = -f * s * k;
        let d_rr = -f * c * k * k;
        let q = th / z;
        let d_z = f1 * c + f * s * q;
        let d_zz = f2 * c + 2.0 * f1 * s * q - f * c * q * q - 2.0 * f * s * q / z;
        // (n-2)/ρ ∂_ρ v has the finite limit -(n-2) f k² on the axis
        let radial = if rho == 0.0 { -f * k * k } else { d_rho / rho };
        let laplacian = d_rr + (self.params.n as f64 - 2.0) * radial + d_zz;
        Ok(BarrierValue { v, d_rho, d_z, laplacian })
    }

    /// `Δv_ε - b_ε·∇v_ε` at a point of the closed cone, with the cone drift.
    pub fn barrier_operator(&self, rho: f64, z: f64) -> Result<f64> {
        let v = self.v_eps(rho, z)?;
        let (br, bz) = self.b_cone(rho, z);
        Ok(v.laplacian - br * v.d_rho - bz * v.d_z)
    }

    /// `b_ε` (or `b₀`) lifted to ℝⁿ.
    pub fn cartesian(&self, which: DriftKind) -> CartesianDrift<'_> {
        CartesianDrift { barrier: self, which }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftKind {
    Eps,
    Zero,
    /// `b_ε - b₀`
    Difference,
}

#[derive(Debug, Clone, Copy)]
pub struct CartesianDrift<'a> {
    barrier: &'a Barrier,
    which: DriftKind,
}

impl CartesianDrift<'_> {
    pub fn axisym(&self, rho: f64, z: f64) -> (f64, f64) {
        self.axisym_at(rho, z)
    }

    fn axisym_at<T: Scalar>(&self, rho: T, z: T) -> (T, T) {
        let b = self.barrier;
        let zero = || if z.re() == 0.0 { (T::from(0.0), T::from(0.0)) } else { b.drift_at(rho, z, false) };
        match self.which {
            DriftKind::Eps => b.drift_at(rho, z, true),
            DriftKind::Zero => zero(),
            DriftKind::Difference => {
                let (a, c) = b.drift_at(rho, z, true);
                let (d, e) = zero();
                (a - d, c - e)
            }
        }
    }

    fn value_at<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        let n = x.len();
        let mut r2 = T::from(0.0);
        for xi in &x[..n - 1] {
            r2 = r2 + *xi * *xi;
        }
        let rho = r2.sqrt();
        let (br, bz) = self.axisym_at(rho, x[n - 1]);
        for i in 0..n - 1 {
            out[i] = if rho.re() > 0.0 { br * x[i] / rho } else { T::from(0.0) };
        }
        out[n - 1] = bz;
    }

    /// Complex-step diagonal of the Jacobian, `∂ᵢbᵢ ≈ Im bᵢ(x + i h eᵢ) / h`.
    pub fn complex_step_partials(&self, x: &[f64], h: f64) -> Vec<f64> {
        let n = x.len();
        let mut y: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut out = alloc::vec![Complex64::new(0.0, 0.0); n];
        let mut d = alloc::vec![0.0; n];
        for i in 0..n {
            y[i].im = h;
            self.value_at(&y, &mut out);
            d[i] = out[i].im / h;
            y[i].im = 0.0;
        }
        d
    }

    /// Complex-step divergence; free of the cancellation that limits real
    /// finite differences on a field this large.
    pub fn complex_step_divergence(&self, x: &[f64], h: f64) -> f64 {
        self.complex_step_partials(x, h).iter().sum()
    }
}

impl VectorField for CartesianDrift<'_> {
    fn dim(&self) -> usize {
        self.barrier.params.n
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        self.value_at(x, out);
    }
    fn divergence(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn singular_set(&self) -> SingularSet {
        match self.which {
            DriftKind::Eps => SingularSet::Empty,
            _ => SingularSet::Plane(0.0),
        }
    }
}


#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub worst: f64,
    pub at: f64,
}

impl Margin {
    fn new() -> Self {
        Margin { worst: f64::INFINITY, at: f64::NAN }
    }
    fn update(&mut self, value: f64, at: f64) {
        if value < self.worst {
            self.worst = value;
            self.at = at;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FPropertiesReport {
    pub pass: bool,
    /// `f ≥ 0`
    pub nonnegative: Margin,
    /// `f' ≥ 0`
    pub monotone: Margin,
    /// `c₂ f' z^(2-μ) - f ≥ 0`
    pub growth: Margin,
    /// `c₃ f' z^(-μ) + f'' ≥ 0`
    pub concavity: Margin,
    pub f_eps: f64,
    pub f_two_eps: f64,
    pub f_one: f64,
    pub c1: f64,
    pub seam_growth: [f64; 2],
    pub seam_concavity: [f64; 2],
}

/// Worst margins of the three profile properties on `count` uniform points in [ε, 1].
pub fn check_f_properties(params: &BarrierParams, count: usize) -> Result<FPropertiesReport> {
    params.validate_shape()?;
    let c = params.constants()?;
    let prof = FProfile::new(params.mu, params.eps);
    let (e, mu) = (params.eps, params.mu);
    let growth = |z: f64, (f, f1, _): (f64, f64, f64)| c.c2 * f1 * powf(z, 2.0 - mu) - f;
    let concavity = |z: f64, (_, f1, f2): (f64, f64, f64)| c.c3 * f1 * powf(z, -mu) + f2;
    let mut r = FPropertiesReport {
        pass: false,
        nonnegative: Margin::new(),
        monotone: Margin::new(),
        growth: Margin::new(),
        concavity: Margin::new(),
        f_eps: prof.eval(e).0,
        f_two_eps: prof.eval(2.0 * e).0,
        f_one: prof.eval(1.0).0,
        c1: c.c1,
        seam_growth: [0.0; 2],
        seam_concavity: [0.0; 2],
    };
    let count = count.max(2);
    for i in 0..count {
        let z = if i + 1 == count { 1.0 } else { e + (1.0 - e) * i as f64 / (count - 1) as f64 };
        let v = prof.eval(z);
        r.nonnegative.update(v.0, z);
        r.monotone.update(v.1, z);
        r.growth.update(growth(z, v), z);
        r.concavity.update(concavity(z, v), z);
    }
    let z = 2.0 * e;
    for (k, br) in [Branch::Quadratic, Branch::Power].into_iter().enumerate() {
        let v = prof.eval_branch(z, br);
        r.seam_growth[k] = growth(z, v);
        r.seam_concavity[k] = concavity(z, v);
    }
    r.pass = r.nonnegative.worst >= 0.0
        && r.monotone.worst >= 0.0
        && r.growth.worst >= 0.0
        && r.concavity.worst >= 0.0
        && r.seam_growth.iter().chain(&r.seam_concavity).all(|m| *m >= 0.0)
        && r.f_eps == 0.0
        && r.f_one == 1.0
        && r.f_two_eps >= c.c1;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub k_admissible: bool,
    pub samples: usize,
    pub min: f64,
    /// (ρ, z) of the minimum
    pub argmin: [f64; 2],
    /// minimum over `0 < ρ ≤ z/2`
    pub min_inner: f64,
    /// minimum over `z/2 < ρ < z`
    pub min_outer: f64,
}

/// Minimum of `Δv_ε - b_ε·∇v_ε` over Halton samples of the open cone `Ω_ε`.
/// Halton indices start at `offset`.
pub fn check_barrier_inequality(params: &BarrierParams, samples: usize, offset: u64) -> Result<PositivityReport> {
    let bar = Barrier::new(*params)?;
    let e = params.eps;
    let mut r = PositivityReport {
        k_admissible: params.k > bar.constants.k_min,
        samples,
        min: f64::INFINITY,
        argmin: [f64::NAN; 2],
        min_inner: f64::INFINITY,
        min_outer: f64::INFINITY,
    };
    for i in 0..samples as u64 {
        let u = math::halton(offset + i, 2);
        let z = e + (1.0 - e) * u[0];
        let rho = z * u[1];
        if z <= e || rho <= 0.0 {
            continue;
        }
        let val = bar.barrier_operator(rho, z)?;
        if !val.is_finite() {
            return Err(Error::NonFiniteSample { at: [rho, 0.0, z] });
        }
        if val < r.min {
            r.min = val;
            r.argmin = [rho, z];
        }
        if rho <= z / 2.0 {
            r.min_inner = r.min_inner.min(val);
        } else {
            r.min_outer = r.min_outer.min(val);
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub probes: usize,
    pub max_abs: f64,
    pub at: [f64; 2],
}

/// Complex-step divergence of the lifted drift at `probes` off-axis Halton
/// points of the full cylinder (or `z > 0` only for `b₀`).
pub fn check_divergence(bar: &Barrier, which: DriftKind, probes: usize) -> DivergenceReport {
    let n = bar.params.n;
    let e = bar.params.eps;
    let lifted = bar.cartesian(which);
    let mut r = DivergenceReport { probes, max_abs: 0.0, at: [0.0; 2] };
    let mut x = alloc::vec![0.0; n];
    for i in 0..probes as u64 {
        let u = math::halton(i, 3);
        // concentrate half the probes where the cutoffs switch on
        let z = if i % 2 == 0 { 1.2 * e * u[0] + 0.3 * e } else { 0.05 + 0.9 * u[0] };
        let z = if which == DriftKind::Eps && u[2] < 0.5 { -z } else { z };
        let rho = (0.02 + 0.96 * u[1]) * (2.5 * abs(z)).min(1.0);
        let phi = 2.0 * PI * u[2];
        x.iter_mut().for_each(|c| *c = 0.0);
        x[0] = rho * cos(phi);
        x[1] = rho * sin(phi);
        x[n - 1] = z;
        let d = abs(lifted.complex_step_divergence(&x, 1e-30));
        if d > r.max_abs {
            r.max_abs = d;
            r.at = [rho, z];
        }
    }
    r
}

/// Largest relative gap between the general drift and the cone formulas on
/// Halton samples of `{z/ρ ≥ 1, ε ≤ z ≤ 1}`.
pub fn cone_consistency(bar: &Barrier, samples: usize) -> f64 {
    let e = bar.params.eps;
    let mut worst: f64 = 0.0;
    for i in 0..samples as u64 {
        let u = math::halton(i, 2);
        let z = e + (1.0 - e) * u[0];
        let rho = z * u[1];
        let (a, b) = bar.b_eps(rho, z);
        let (c, d) = bar.b_cone(rho, z);
        let scale = math::sqrt(c * c + d * d);
        worst = worst.max(math::sqrt((a - c) * (a - c) + (b - d) * (b - d)) / scale);
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    /// `max |b_ε| z^μ / K` over the probe grid
    pub constant: f64,
    /// largest `|b_ε|` seen where `z/ρ < 1/2` (should be 0)
    pub outside_support: f64,
}

/// Calibrates C in `|b_ε| ≤ C K z^(-μ) 1{z/ρ ≥ 1/2}` on a grid that is
/// log-spaced in z and uniform in `ρ/z ∈ [0, 3]`.
pub fn envelope_constant(bar: &Barrier, nz: usize, nt: usize) -> EnvelopeReport {
    let p = &bar.params;
    let mut r = EnvelopeReport { constant: 0.0, outside_support: 0.0 };
    let lo = math::ln(p.eps / 2.0);
    for i in 0..=nz {
        let z = exp(lo * (1.0 - i as f64 / nz as f64));
        for j in 0..=nt {
            let rho = (3.0 * z * j as f64 / nt as f64).min(1.0);
            let (a, b) = bar.b_eps(rho, z);
            let m = math::sqrt(a * a + b * b);
            if rho > 2.0 * z {
                r.outside_support = r.outside_support.max(m);
            } else {
                r.constant = r.constant.max(m * powf(z, p.mu) / p.k);
            }
        }
    }
    r
}

/// Quadrature for drift norms on the cylinder: graded in ρ and |z| about the origin.
pub fn drift_quadrature(n: usize) -> QuadratureSpec {
    QuadratureSpec::gauss(6, 64).with_polar(Point::origin(n), 96, 1e-10, field::CoreRule::Exclude)
}

/// `‖b‖_{L_p}` over the cylinder `{ρ < 1, |z| < 1}`.
pub fn drift_lp_norm(bar: &Barrier, which: DriftKind, p: f64, q: &QuadratureSpec) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::ParamOutOfRange { name: "p", value: p, constraint: "p >= 1" });
    }
    let lifted = bar.cartesian(which);
    let dom = Domain::Cylinder { dim: bar.params.n };
    let i = field::integrate_axisym(
        |rho, z| {
            let (a, b) = lifted.axisym(rho, z);
            powf(math::sqrt(a * a + b * b), p)
        },
        bar.params.n,
        &dom,
        q,
    )?;
    Ok(powf(i.value, 1.0 / p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub params: BarrierParams,
    pub constants: Constants,
    pub f_properties: FPropertiesReport,
    pub positivity: PositivityReport,
    pub divergence: DivergenceReport,
    pub cone_consistency: f64,
    pub envelope: EnvelopeReport,
    pub b_norm: f64,
    pub b_minus_b0_norm: f64,
}

impl BarrierReport {
    pub fn pass(&self) -> bool {
        self.f_properties.pass
            && self.positivity.min > 0.0
            && self.divergence.max_abs <= 1e-6
            && self.cone_consistency <= 1e-10
            && self.envelope.outside_support == 0.0
            && self.b_norm.is_finite()
    }
}

/// Runs every check for one parameter set; `samples` barrier samples and
/// divergence probes as in the property suite.
pub fn barrier_report(params: &BarrierParams, samples: usize, offset: u64) -> Result<BarrierReport> {
    params.validate()?;
    let bar = Barrier::new(*params)?;
    let q = drift_quadrature(params.n);
    Ok(BarrierReport {
        params: *params,
        constants: bar.constants,
        f_properties: check_f_properties(params, samples)?,
        positivity: check_barrier_inequality(params, samples, offset)?,
        divergence: check_divergence(&bar, DriftKind::Eps, 1000),
        cone_consistency: cone_consistency(&bar, 1000),
        envelope: envelope_constant(&bar, 200, 300),
        b_norm: drift_lp_norm(&bar, DriftKind::Eps, params.p_target, &q)?,
        b_minus_b0_norm: drift_lp_norm(&bar, DriftKind::Difference, params.p_target, &q)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_plateaus_are_exact() {
        let s = SmoothStep::new();
        for t in [-3.0, 0.0, 0.25, 0.5] {
            assert_eq!(s.eval(t), (0.0, 0.0, 0.0));
        }
        for t in [1.0, 1.5, 40.0] {
            assert_eq!(s.eval(t), (1.0, 0.0, 0.0));
        }
        assert!((s.value(0.75) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn step_derivatives_are_consistent() {
        let s = SmoothStep::new();
        for t in [0.55, 0.6, 0.7, 0.77, 0.9, 0.97] {
            let d = field::central_diff6(|x| s.value(x), t, 1e-3);
            assert!((d - s.derivative(t)).abs() < 1e-8, "{t}: {d} {}", s.derivative(t));
            let d2 = field::central_diff6(|x| s.derivative(x), t, 1e-3);
            assert!((d2 - s.second_derivative(t)).abs() < 1e-6 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn constants_default_set() {
        let c = derive_constants(3, 1.25).unwrap();
        assert!((c.d_mu - 18.4391).abs() < 1e-4);
        assert!((c.c1 - 0.009039).abs() < 1e-6);
        assert!((c.c2 - 6.9147).abs() < 1e-4);
        assert!((c.c3 - 0.8919).abs() < 1e-4);
        assert!((c.k_min - 69.14).abs() < 1e-2);
        let c4 = derive_constants(4, 1.5).unwrap();
        assert!((4.0 * 4.0 / 1.5 - 10.6667f64).abs() < 1e-3 && c4.k_min >= 16.0 / 1.5);
        assert!(matches!(derive_constants(3, 1.0), Err(Error::ParamOutOfRange { .. })));
        assert!(matches!(derive_constants(2, 1.5), Err(Error::BadDimension { .. })));
    }

    #[test]
    fn profile_endpoints_and_seam() {
        let p = FProfile::new(1.5, 0.01);
        assert!((p.g_seam() - 0.6).abs() < 1e-14);
        assert!((p.g(0.02, Branch::Quadratic) - 0.6).abs() < 1e-12);
        assert_eq!(p.eval(0.01).0, 0.0);
        assert_eq!(p.eval(1.0).0, 1.0);
        let (h0, _) = p.h(0.02, Branch::Quadratic);
        let (h1, _) = p.h(0.02, Branch::Power);
        assert!((h0 - h1).abs() < 1e-10 * h1);
        let (_, d0) = p.h(0.01, Branch::Quadratic);
        assert!((d0 + 1e4).abs() < 1e-8);
    }

    #[test]
    fn barrier_boundary_values() {
        let bar = Barrier::new(BarrierParams::default().with_eps(0.1)).unwrap();
        assert!(bar.v_eps(0.5, 0.5).unwrap().v.abs() < 1e-16);
        assert_eq!(bar.v_eps(0.0, 1.0).unwrap().v, 1.0);
        assert!(bar.v_eps(0.0, 0.2).unwrap().v >= bar.constants.c1);
        assert!(matches!(bar.v_eps(0.3, 0.2), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn barrier_derivatives_match_differences() {
        let bar = Barrier::new(BarrierParams::default().with_eps(0.1)).unwrap();
        let v = |r: f64, z: f64| bar.v_eps(r, z).unwrap().v;
        for (r, z) in [(0.1, 0.3), (0.2, 0.25), (0.05, 0.6)] {
            let b = bar.v_eps(r, z).unwrap();
            let dr = field::central_diff6(|t| v(t, z), r, 1e-4);
            let dz = field::central_diff6(|t| v(r, t), z, 1e-4);
            assert!((dr - b.d_rho).abs() < 1e-8 * (1.0 + dr.abs()));
            assert!((dz - b.d_z).abs() < 1e-8 * (1.0 + dz.abs()));
            let drr = field::central_diff6(|t| bar.v_eps(t, z).unwrap().d_rho, r, 1e-4);
            let dzz = field::central_diff6(|t| bar.v_eps(r, t).unwrap().d_z, z, 1e-4);
            let lap = drr + b.d_rho / r + dzz;
            assert!((lap - b.laplacian).abs() < 1e-6 * (1.0 + lap.abs()));
        }
    }

    #[test]
    fn drift_parity_and_axis() {
        let bar = Barrier::new(BarrierParams::default().with_eps(0.1)).unwrap();
        for (r, z) in [(0.05, 0.07), (0.1, 0.3), (0.3, 0.2)] {
            let (a, b) = bar.b_eps(r, z);
            let (c, d) = bar.b_eps(r, -z);
            assert_eq!(a, c);
            assert_eq!(b, -d);
        }
        assert_eq!(bar.b_eps(0.0, 0.5).0, 0.0);
        assert_eq!(bar.b_eps(0.0, 0.5), bar.b_cone(0.0, 0.5));
        assert_eq!(bar.b_eps(0.3, 0.01), (0.0, 0.0));
        assert_eq!(bar.b_zero(0.1, 0.4).unwrap(), bar.b_eps(0.1, 0.4));
        assert!(matches!(bar.b_zero(0.1, 0.0), Err(Error::SingularProbe { .. })));
    }

    #[test]
    fn drift_is_the_curl_of_h() {
        let bar = Barrier::new(BarrierParams::default().with_eps(0.1)).unwrap();
        let k = bar.params.k;
        for (r, z) in [(0.06, 0.07), (0.1, 0.15), (0.04, 0.3), (0.2, 0.3)] {
            let dz = field::central_diff6(|t| bar.h_eps(r, t), z, 1e-5);
            let dr = field::central_diff6(|t| bar.h_eps(t, z), r, 1e-5);
            let (a, b) = bar.b_eps(r, z);
            assert!((k * dz / r - a).abs() < 1e-6 * (1.0 + a.abs()), "{a} vs {}", k * dz / r);
            assert!((-k * dr / r - b).abs() < 1e-6 * (1.0 + b.abs()), "{b} vs {}", -k * dr / r);
        }
    }

    #[test]
    fn complex_step_partials_match_differences() {
        let bar = Barrier::new(BarrierParams::default()).unwrap();
        let l = bar.cartesian(DriftKind::Eps);
        let x = [0.04, 0.02, 0.045];
        let cs = l.complex_step_partials(&x, 1e-30);
        let mut y = x;
        let mut out = [0.0; 3];
        for i in 0..3 {
            let fd = field::central_diff6(
                |t| {
                    y[i] = t;
                    l.value(&y, &mut out);
                    out[i]
                },
                x[i],
                1e-5,
            );
            y[i] = x[i];
            assert!((fd - cs[i]).abs() < 1e-6 * cs[i].abs(), "{i}: {fd} {}", cs[i]);
        }
        let total: f64 = cs.iter().sum();
        let scale: f64 = cs.iter().map(|d| d.abs()).sum();
        assert!(scale > 1e4);
        assert!(total.abs() < 1e-12 * scale);
    }

    #[test]
    fn small_k_breaks_positivity() {
        let p = BarrierParams::default().with_eps(0.1).with_k(1.0);
        let r = check_barrier_inequality(&p, 2000, 0).unwrap();
        assert!(!r.k_admissible);
        assert!(r.min < 0.0);
    }
}
