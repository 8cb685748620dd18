//! Geometry, closed-form fields and quadrature shared by every other module.
//!
//! Fields are evaluated on plain coordinate slices (`&[f64]`, Cartesian, length
//! `n`); [`Point`] is the owned form used at API boundaries. Quadrature is done
//! in polar coordinates on balls and in `(ρ, angle, z)` coordinates on cylinders,
//! so smooth integrands converge spectrally in the angular directions and
//! radial singularities can be graded geometrically.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, composite_nodes, exp, gauss_legendre, powi, sqrt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        assert!(!coords.is_empty(), "a point needs at least one coordinate");
        Point(coords)
    }

    pub fn origin(n: usize) -> Self {
        Point(vec![0.0; n])
    }

    /// The point `(0, …, 0, z)` on the symmetry axis.
    pub fn on_axis(n: usize, z: f64) -> Self {
        let mut c = vec![0.0; n];
        c[n - 1] = z;
        Point(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Distance to the `x_n` axis.
    pub fn rho(&self) -> f64 {
        rho_of(&self.0)
    }

    pub fn z(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn norm(&self) -> f64 {
        math::norm(&self.0)
    }
}

pub fn rho_of(x: &[f64]) -> f64 {
    math::norm(&x[..x.len() - 1])
}

/// Integration domains. Cylinders have unit radius and axis `x_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Ball { center: Point, radius: f64 },
    /// `{ρ < 1, -1 < z < 1}`
    Cylinder { dim: usize },
    /// `{ρ < 1, 0 < z < 1}`
    HalfCylinder { dim: usize },
}

impl Domain {
    /// Ball of radius `radius` centered at the origin of ℝⁿ.
    pub fn ball(n: usize, radius: f64) -> Result<Self> {
        Self::ball_at(Point::origin(n), radius)
    }

    pub fn ball_at(center: Point, radius: f64) -> Result<Self> {
        if center.dim() < 2 {
            return Err(Error::ParamOutOfRange { name: "n", value: center.dim() as f64, constraint: "n >= 2" });
        }
        if !(radius > 0.0) {
            return Err(Error::ParamOutOfRange { name: "R", value: radius, constraint: "R > 0" });
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } => center.dim(),
            Domain::Cylinder { dim } | Domain::HalfCylinder { dim } => *dim,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Ball { center, radius } => dist(x, center.as_slice()) < *radius,
            Domain::Cylinder { .. } => {
                let z = x[x.len() - 1];
                rho_of(x) < 1.0 && z > -1.0 && z < 1.0
            }
            Domain::HalfCylinder { .. } => {
                let z = x[x.len() - 1];
                rho_of(x) < 1.0 && z > 0.0 && z < 1.0
            }
        }
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        match self {
            Domain::Ball { center, radius } => math::unit_ball_volume(center.dim()) * powi(*radius, center.dim() as i32),
            Domain::Cylinder { dim } => 2.0 * math::unit_ball_volume(dim - 1),
            Domain::HalfCylinder { dim } => math::unit_ball_volume(dim - 1),
        }
    }

    fn z_range(&self) -> (f64, f64) {
        match self {
            Domain::Cylinder { .. } => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Points where a closed-form field is not defined or not smooth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SingularSet {
    Empty,
    Point(Point),
    /// The axis `ρ = 0`.
    Axis,
    /// The hyperplane `z = c`.
    Plane(f64),
}

impl SingularSet {
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            SingularSet::Empty => f64::INFINITY,
            SingularSet::Point(p) => dist(x, p.as_slice()),
            SingularSet::Axis => rho_of(x),
            SingularSet::Plane(c) => math::abs(x[x.len() - 1] - c),
        }
    }
}

/// Scalar function with hand-derived gradient and Laplacian.
pub trait ScalarField {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn laplacian(&self, x: &[f64]) -> f64;
    fn singular_set(&self) -> SingularSet {
        SingularSet::Empty
    }
}

/// Vector field with hand-derived divergence.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64], out: &mut [f64]);
    fn divergence(&self, x: &[f64]) -> f64;
    fn singular_set(&self) -> SingularSet {
        SingularSet::Empty
    }
}

impl<T: ScalarField + ?Sized> ScalarField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
    fn laplacian(&self, x: &[f64]) -> f64 {
        (**self).laplacian(x)
    }
    fn singular_set(&self) -> SingularSet {
        (**self).singular_set()
    }
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        (**self).value(x, out)
    }
    fn divergence(&self, x: &[f64]) -> f64 {
        (**self).divergence(x)
    }
    fn singular_set(&self) -> SingularSet {
        (**self).singular_set()
    }
}

/// Radial profile `φ(r)` with its first two derivatives.
pub trait RadialProfile {
    fn eval(&self, r: f64) -> (f64, f64, f64);
}

/// `u(x) = φ(|x - c|)`, gradient `φ'(r) (x-c)/r`, Laplacian `φ'' + (n-1)φ'/r`.
#[derive(Debug, Clone)]
pub struct RadialScalar<P> {
    pub dim: usize,
    pub center: Point,
    pub profile: P,
}

impl<P: RadialProfile> ScalarField for RadialScalar<P> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.profile.eval(dist(x, self.center.as_slice())).0
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let r = dist(x, self.center.as_slice());
        let (_, d1, _) = self.profile.eval(r);
        for (o, (xi, ci)) in out.iter_mut().zip(x.iter().zip(self.center.as_slice())) {
            *o = d1 * (xi - ci) / r;
        }
    }
    fn laplacian(&self, x: &[f64]) -> f64 {
        let r = dist(x, self.center.as_slice());
        let (_, d1, d2) = self.profile.eval(r);
        d2 + (self.dim as f64 - 1.0) * d1 / r
    }
    fn singular_set(&self) -> SingularSet {
        SingularSet::Point(self.center.clone())
    }
}

/// `b(x) = β(|x|) x/|x|`, divergence `β' + (n-1)β/r`.
#[derive(Debug, Clone)]
pub struct RadialVector<P> {
    pub dim: usize,
    pub profile: P,
}

impl<P: RadialProfile> VectorField for RadialVector<P> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        let r = math::norm(x);
        let (beta, _, _) = self.profile.eval(r);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = beta * xi / r;
        }
    }
    fn divergence(&self, x: &[f64]) -> f64 {
        let r = math::norm(x);
        let (beta, d1, _) = self.profile.eval(r);
        d1 + (self.dim as f64 - 1.0) * beta / r
    }
    fn singular_set(&self) -> SingularSet {
        SingularSet::Point(Point::origin(self.dim))
    }
}

/// Scalar multiple of a vector field.
pub struct Scaled<V> {
    pub factor: f64,
    pub inner: V,
}

impl<V: VectorField> VectorField for Scaled<V> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        self.inner.value(x, out);
        out.iter_mut().for_each(|v| *v *= self.factor);
    }
    fn divergence(&self, x: &[f64]) -> f64 {
        self.factor * self.inner.divergence(x)
    }
    fn singular_set(&self) -> SingularSet {
        self.inner.singular_set()
    }
}

/// Constant scalar field.
#[derive(Debug, Clone, Copy)]
pub struct Constant {
    pub dim: usize,
    pub value: f64,
}

impl ScalarField for Constant {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _: &[f64]) -> f64 {
        self.value
    }
    fn gradient(&self, _: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
    fn laplacian(&self, _: &[f64]) -> f64 {
        0.0
    }
}

/// The zero vector field.
#[derive(Debug, Clone, Copy)]
pub struct ZeroVector {
    pub dim: usize,
}

impl VectorField for ZeroVector {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
    fn divergence(&self, _: &[f64]) -> f64 {
        0.0
    }
}

/// `|x|^β` about a center; used for Hölder and FD checks.
#[derive(Debug, Clone, Copy)]
pub struct PowerProfile {
    pub beta: f64,
}

impl RadialProfile for PowerProfile {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let b = self.beta;
        (math::powf(r, b), b * math::powf(r, b - 1.0), b * (b - 1.0) * math::powf(r, b - 2.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    Midpoint,
    Gauss(usize),
}

/// What happens inside the innermost radius `delta` of a polar refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoreRule {
    /// The δ-ball is left out and its measure is reported.
    Exclude,
    /// The δ-ball is integrated with the substitution `t = δ·exp(1 - 1/τ)`, which
    /// turns `1/(t |ln t|^2)`-type radial densities into bounded ones. Radii
    /// below [`RESOLVE_FLOOR`] are dropped.
    Resolve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarRefinement {
    pub center: Point,
    /// Number of geometric annuli between `delta` and the outer radius.
    pub annuli: usize,
    pub delta: f64,
    pub core: CoreRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    pub cells_per_axis: usize,
    pub polar: Option<PolarRefinement>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { scheme: Scheme::Gauss(4), cells_per_axis: 64, polar: None }
    }
}

impl QuadratureSpec {
    pub fn gauss(order: usize, cells: usize) -> Self {
        QuadratureSpec { scheme: Scheme::Gauss(order), cells_per_axis: cells, polar: None }
    }

    pub fn midpoint(cells: usize) -> Self {
        QuadratureSpec { scheme: Scheme::Midpoint, cells_per_axis: cells, polar: None }
    }

    pub fn with_polar(mut self, center: Point, annuli: usize, delta: f64, core: CoreRule) -> Self {
        self.polar = Some(PolarRefinement { center, annuli, delta, core });
        self
    }

    pub fn with_cells(mut self, cells: usize) -> Self {
        self.cells_per_axis = cells;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        if let Some(p) = self.polar.as_mut() {
            p.delta = delta;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells_per_axis < 2 {
            return Err(Error::ParamOutOfRange {
                name: "cells_per_axis",
                value: self.cells_per_axis as f64,
                constraint: "cells_per_axis >= 2",
            });
        }
        if let Scheme::Gauss(0) = self.scheme {
            return Err(Error::ParamOutOfRange { name: "quad_order", value: 0.0, constraint: "order >= 1" });
        }
        if let Some(p) = &self.polar {
            if !(p.delta > 0.0) {
                return Err(Error::ParamOutOfRange { name: "delta", value: p.delta, constraint: "delta > 0" });
            }
            if p.annuli == 0 {
                return Err(Error::ParamOutOfRange { name: "annuli", value: 0.0, constraint: "annuli >= 1" });
            }
        }
        Ok(())
    }

    fn rule(&self) -> (Vec<f64>, Vec<f64>) {
        match self.scheme {
            Scheme::Midpoint => (vec![0.0], vec![2.0]),
            Scheme::Gauss(k) => gauss_legendre(k),
        }
    }

    fn points_per_cell(&self) -> usize {
        match self.scheme {
            Scheme::Midpoint => 1,
            Scheme::Gauss(k) => k,
        }
    }
}

/// Quadrature result. `excluded_measure` is the volume of the δ-region left out
/// under [`CoreRule::Exclude`] (zero otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub excluded_measure: f64,
    pub evaluations: usize,
}

/// Quadrature rule on the unit sphere Sⁿ⁻¹: (direction, weight) pairs.
/// `m` is the number of nodes along each polar angle; the azimuth gets `2m`.
pub fn sphere_rule(n: usize, m: usize) -> Vec<(Vec<f64>, f64)> {
    assert!(n >= 2);
    if n == 2 {
        let k = 2 * m;
        let w = 2.0 * PI / k as f64;
        return (0..k)
            .map(|i| {
                let th = 2.0 * PI * (i as f64 + 0.5) / k as f64;
                (vec![math::cos(th), math::sin(th)], w)
            })
            .collect();
    }
    let inner = sphere_rule(n - 1, m);
    let gl = gauss_legendre(m.min(24));
    let cells = (m + 23) / 24;
    let mut out = Vec::with_capacity(inner.len() * m);
    for (phi, wphi) in composite_nodes(0.0, PI, cells, &gl) {
        let (s, c) = (math::sin(phi), math::cos(phi));
        let wt = wphi * powi(s, (n - 2) as i32);
        for (dir, w) in &inner {
            let mut d = Vec::with_capacity(n);
            d.push(c);
            d.extend(dir.iter().map(|v| s * v));
            out.push((d, wt * w));
        }
    }
    out
}

/// Smallest radius visited by [`CoreRule::Resolve`]; `1/t²` still fits in an f64 there.
pub const RESOLVE_FLOOR: f64 = 1e-150;

/// Nodes for `∫_0^a g(t) dt` with `t = a·exp(1 - 1/τ)`, τ ∈ (0, 1].
fn double_log_nodes(a: f64, cells: usize, rule: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64)> {
    composite_nodes(0.0, 1.0, cells, rule)
        .into_iter()
        .map(|(tau, w)| {
            let t = a * exp(1.0 - 1.0 / tau);
            (t, w * t / (tau * tau))
        })
        .filter(|(t, _)| *t > RESOLVE_FLOOR)
        .collect()
}

/// Nodes on `[a, b]` (0 < a < b) split into `pieces` geometric intervals, each
/// further split so no sub-interval is longer than `max_len`.
fn geometric_nodes(a: f64, b: f64, pieces: usize, max_len: f64, rule: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64)> {
    let ratio = math::powf(b / a, 1.0 / pieces as f64);
    let mut out = Vec::with_capacity(pieces * rule.0.len());
    let mut lo = a;
    for i in 0..pieces {
        let hi = if i + 1 == pieces { b } else { lo * ratio };
        let split = math::ceil((hi - lo) / max_len).max(1.0) as usize;
        out.extend(composite_nodes(lo, hi, split, rule));
        lo = hi;
    }
    out
}

fn check(v: f64, x: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        let mut at = [0.0; 3];
        for (a, c) in at.iter_mut().zip(x) {
            *a = *c;
        }
        Err(Error::NonFiniteSample { at })
    }
}

/// Counts returned by the node visitors.
#[derive(Debug, Clone, Copy, Default)]
pub struct NodeStats {
    pub excluded_measure: f64,
    pub nodes: usize,
}

/// Calls `visit(x, w)` for every quadrature node of `dom`.
///
/// Balls are integrated in polar coordinates about the refinement center when it
/// lies inside the ball (about the ball's center otherwise); each ray is cut at
/// its exit distance, so off-center singular points are handled exactly.
/// Cylinders use `(ρ, Sⁿ⁻², z)` product nodes.
pub fn for_each_node<V: FnMut(&[f64], f64)>(dom: &Domain, q: &QuadratureSpec, mut visit: V) -> Result<NodeStats> {
    q.validate()?;
    match dom {
        Domain::Ball { center, radius } => Ok(visit_ball(center.as_slice(), *radius, q, &mut visit)),
        Domain::Cylinder { dim } | Domain::HalfCylinder { dim } => {
            let n = *dim;
            let m = q.cells_per_axis * q.points_per_cell();
            let dirs = if n >= 3 { sphere_rule(n - 1, m) } else { vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)] };
            let area: f64 = dirs.iter().map(|d| d.1).sum();
            let mut x = vec![0.0; n];
            let mut stats = visit_axisym(n, dom, q, |rho, z, w| {
                for (d, wd) in &dirs {
                    for (xi, di) in x.iter_mut().zip(d) {
                        *xi = rho * di;
                    }
                    x[n - 1] = z;
                    visit(&x, w * wd / area);
                }
            })?;
            stats.nodes *= dirs.len();
            Ok(stats)
        }
    }
}

/// Integrates `f` over `dom`; see [`for_each_node`] for the node layout.
pub fn integrate<F: Fn(&[f64]) -> f64>(f: F, dom: &Domain, q: &QuadratureSpec) -> Result<Integral> {
    let mut total = 0.0;
    let mut bad = None;
    let stats = for_each_node(dom, q, |x, w| {
        let v = f(x);
        if !v.is_finite() {
            if bad.is_none() {
                bad = Some(check(v, x).unwrap_err());
            }
            return;
        }
        total += w * v;
    })?;
    match bad {
        Some(e) => Err(e),
        None => Ok(Integral { value: total, excluded_measure: stats.excluded_measure, evaluations: stats.nodes }),
    }
}

fn visit_ball<V: FnMut(&[f64], f64)>(center: &[f64], radius: f64, q: &QuadratureSpec, visit: &mut V) -> NodeStats {
    let n = center.len();
    let rule = q.rule();
    let m = q.cells_per_axis * q.points_per_cell();
    let dirs = sphere_rule(n, m);
    let polar = q
        .polar
        .as_ref()
        .filter(|p| p.center.dim() == n && dist(p.center.as_slice(), center) < radius);
    let pole: Vec<f64> = match polar {
        Some(p) => p.center.0.clone(),
        None => center.to_vec(),
    };
    let offset: Vec<f64> = pole.iter().zip(center).map(|(a, b)| a - b).collect();
    let off2 = math::dot(&offset, &offset);
    let mut x = vec![0.0; n];
    let mut stats = NodeStats::default();
    for (dir, wdir) in &dirs {
        let od = math::dot(&offset, dir);
        let tmax = -od + sqrt((od * od - off2 + radius * radius).max(0.0));
        if tmax <= 0.0 {
            continue;
        }
        let nodes: Vec<(f64, f64)> = match polar {
            None => composite_nodes(0.0, tmax, q.cells_per_axis, &rule),
            Some(p) => {
                let inner = p.delta.min(tmax);
                let mut v = Vec::new();
                if tmax > p.delta {
                    v = geometric_nodes(p.delta, tmax, p.annuli, radius / q.cells_per_axis as f64, &rule);
                }
                match p.core {
                    CoreRule::Exclude => stats.excluded_measure += wdir * powi(inner, n as i32) / n as f64,
                    CoreRule::Resolve => v.extend(double_log_nodes(inner, p.annuli.max(8), &rule)),
                }
                v
            }
        };
        for (t, wt) in nodes {
            for ((xi, pi), di) in x.iter_mut().zip(&pole).zip(dir) {
                *xi = pi + t * di;
            }
            visit(&x, wdir * wt * powi(t, (n - 1) as i32));
            stats.nodes += 1;
        }
    }
    stats
}

/// Integrates an axisymmetric function `g(ρ, z)` over a cylinder domain of
/// dimension `n`, with measure `|Sⁿ⁻²| ρⁿ⁻² dρ dz`.
///
/// With polar refinement the center must lie on the axis; both `ρ` and `|z - z_c|`
/// are graded geometrically down to δ and the box `ρ < δ, |z - z_c| < δ` is
/// excluded or resolved according to the core rule.
pub fn integrate_axisym<G: FnMut(f64, f64) -> f64>(mut g: G, n: usize, dom: &Domain, q: &QuadratureSpec) -> Result<Integral> {
    q.validate()?;
    let mut total = 0.0;
    let mut bad = None;
    let stats = visit_axisym(n, dom, q, |rho, z, w| {
        let v = g(rho, z);
        if !v.is_finite() {
            bad.get_or_insert(Error::NonFiniteSample { at: [rho, 0.0, z] });
            return;
        }
        total += w * v;
    })?;
    match bad {
        Some(e) => Err(e),
        None => Ok(Integral { value: total, excluded_measure: stats.excluded_measure, evaluations: stats.nodes }),
    }
}

/// Calls `visit(ρ, z, w)` for the axisymmetric node set of a cylinder domain;
/// `w` already includes the `|Sⁿ⁻²| ρⁿ⁻²` measure factor.
pub fn visit_axisym<V: FnMut(f64, f64, f64)>(n: usize, dom: &Domain, q: &QuadratureSpec, mut visit: V) -> Result<NodeStats> {
    let (zlo, zhi) = match dom {
        Domain::Ball { .. } => return Err(Error::InvalidInput("axisymmetric quadrature needs a cylinder domain".into())),
        d => d.z_range(),
    };
    let rule = q.rule();
    let sphere = if n >= 3 { math::unit_sphere_area(n - 1) } else { 2.0 };
    let measure = |rho: f64| sphere * powi(rho, n as i32 - 2);
    let mut stats = NodeStats::default();
    match &q.polar {
        None => {
            let rn = composite_nodes(0.0, 1.0, q.cells_per_axis, &rule);
            let zcells = libm::round((zhi - zlo) * q.cells_per_axis as f64).max(1.0) as usize;
            let zn = composite_nodes(zlo, zhi, zcells, &rule);
            for &(rho, wr) in &rn {
                let mr = wr * measure(rho);
                for &(z, wz) in &zn {
                    visit(rho, z, mr * wz);
                    stats.nodes += 1;
                }
            }
        }
        Some(p) => {
            let zc = p.center.z();
            let d = p.delta;
            // (coordinate, weight, inside the core interval)
            let mut rn: Vec<(f64, f64, bool)> =
                geometric_nodes(d, 1.0, p.annuli, 1.0 / q.cells_per_axis as f64, &rule).into_iter().map(|(a, w)| (a, w, false)).collect();
            let core_cells = p.annuli.max(8);
            let core_r = match p.core {
                CoreRule::Resolve => double_log_nodes(d, core_cells, &rule),
                CoreRule::Exclude => composite_nodes(0.0, d, 1, &rule),
            };
            rn.extend(core_r.into_iter().map(|(a, w)| (a, w, true)));
            let mut zn: Vec<(f64, f64, bool)> = Vec::new();
            for (side, extent) in [(1.0, zhi - zc), (-1.0, zc - zlo)] {
                if extent <= 0.0 {
                    continue;
                }
                let inner = d.min(extent);
                if extent > d {
                    zn.extend(
                        geometric_nodes(d, extent, p.annuli, 1.0 / q.cells_per_axis as f64, &rule).into_iter().map(|(t, w)| (zc + side * t, w, false)),
                    );
                }
                let core = match p.core {
                    CoreRule::Resolve => double_log_nodes(inner, core_cells, &rule),
                    CoreRule::Exclude => composite_nodes(0.0, inner, 1, &rule),
                };
                zn.extend(core.into_iter().map(|(t, w)| (zc + side * t, w, true)));
            }
            for &(rho, wr, rc) in &rn {
                let mr = wr * measure(rho);
                for &(z, wz, zcore) in &zn {
                    if rc && zcore && p.core == CoreRule::Exclude {
                        stats.excluded_measure += mr * wz;
                        continue;
                    }
                    visit(rho, z, mr * wz);
                    stats.nodes += 1;
                }
            }
        }
    }
    Ok(stats)
}

/// Max-norm difference between the analytic gradient and central differences.
pub fn fd_check_gradient<S: ScalarField + ?Sized>(f: &S, p: &Point, h: f64) -> Result<f64> {
    let x = p.as_slice();
    let n = x.len();
    let d = f.singular_set().distance(x);
    if d <= 2.0 * h {
        return Err(Error::SingularProbe { distance: d });
    }
    let mut g = vec![0.0; n];
    f.gradient(x, &mut g);
    let mut y = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        y[i] = x[i] + h;
        let fp = f.value(&y);
        y[i] = x[i] - h;
        let fm = f.value(&y);
        y[i] = x[i];
        worst = worst.max(math::abs(g[i] - (fp - fm) / (2.0 * h)));
    }
    Ok(worst)
}

/// Second-order central-difference Laplacian.
pub fn fd_laplacian<S: ScalarField + ?Sized>(f: &S, x: &[f64], h: f64) -> f64 {
    let mut y = x.to_vec();
    let f0 = f.value(x);
    let mut acc = 0.0;
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let fp = f.value(&y);
        y[i] = x[i] - h;
        let fm = f.value(&y);
        y[i] = x[i];
        acc += (fp - 2.0 * f0 + fm) / (h * h);
    }
    acc
}

/// Second-order central-difference divergence.
pub fn fd_divergence<V: VectorField + ?Sized>(v: &V, x: &[f64], h: f64) -> f64 {
    let n = x.len();
    let mut y = x.to_vec();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        y[i] = x[i] + h;
        v.value(&y, &mut a);
        y[i] = x[i] - h;
        v.value(&y, &mut b);
        y[i] = x[i];
        acc += (a[i] - b[i]) / (2.0 * h);
    }
    acc
}

/// Sixth-order central-difference divergence.
pub fn fd_divergence6<V: VectorField + ?Sized>(v: &V, x: &[f64], h: f64) -> f64 {
    let n = x.len();
    let mut y = x.to_vec();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        acc += central_diff6(
            |t| {
                y[i] = t;
                v.value(&y, &mut out);
                out[i]
            },
            x[i],
            h,
        );
        y[i] = x[i];
    }
    acc
}

/// Sixth-order central difference of a scalar function of one variable.
pub fn central_diff6<G: FnMut(f64) -> f64>(mut g: G, x: f64, h: f64) -> f64 {
    (-g(x - 3.0 * h) + 9.0 * g(x - 2.0 * h) - 45.0 * g(x - h) + 45.0 * g(x + h) - 9.0 * g(x + 2.0 * h)
        + g(x + 3.0 * h))
        / (60.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_disc() -> Domain {
        Domain::ball(2, 1.0).unwrap()
    }

    #[test]
    fn disc_area_with_midpoint() {
        let r = integrate(|_| 1.0, &unit_disc(), &QuadratureSpec::midpoint(64)).unwrap();
        assert!((r.value - PI).abs() < 0.01, "{}", r.value);
    }

    #[test]
    fn zero_integrand_is_exactly_zero() {
        for dom in [unit_disc(), Domain::Cylinder { dim: 3 }, Domain::HalfCylinder { dim: 4 }] {
            let r = integrate(|_| 0.0, &dom, &QuadratureSpec::gauss(2, 4)).unwrap();
            assert_eq!(r.value, 0.0);
        }
    }

    #[test]
    fn inverse_square_on_unit_ball_with_polar_refinement() {
        let dom = Domain::ball(3, 1.0).unwrap();
        let q = QuadratureSpec::gauss(4, 8).with_polar(Point::origin(3), 32, 1e-4, CoreRule::Exclude);
        let r = integrate(|x| 1.0 / math::dot(x, x), &dom, &q).unwrap();
        assert!((r.value / (4.0 * PI) - 1.0).abs() < 0.01);
        // the excluded δ-ball has volume 4π δ³/3
        assert!((r.excluded_measure - 4.0 * PI / 3.0 * 1e-12).abs() < 1e-15);
    }

    #[test]
    fn missing_polar_refinement_is_reported() {
        let dom = Domain::ball(2, 1.0).unwrap();
        // midpoint nodes at the pole: radial node t=0 never occurs, but an integrand
        // that is infinite somewhere on a node must be flagged.
        let e = integrate(|x| if x[0] > 0.0 { f64::NAN } else { 1.0 }, &dom, &QuadratureSpec::gauss(2, 4));
        assert!(matches!(e, Err(Error::NonFiniteSample { .. })));
    }

    #[test]
    fn constants_integrate_to_measure() {
        let q = QuadratureSpec::gauss(3, 6);
        for dom in [
            Domain::ball(2, 0.7).unwrap(),
            Domain::ball(3, 1.3).unwrap(),
            Domain::ball(4, 0.5).unwrap(),
            Domain::ball_at(Point::new(vec![0.2, -0.1, 0.3]), 0.4).unwrap(),
            Domain::Cylinder { dim: 3 },
            Domain::HalfCylinder { dim: 3 },
            Domain::Cylinder { dim: 4 },
        ] {
            let r = integrate(|_| 2.5, &dom, &q).unwrap();
            assert!((r.value - 2.5 * dom.measure()).abs() < 1e-10 * dom.measure(), "{dom:?}: {}", r.value);
        }
    }

    #[test]
    fn off_center_pole_still_covers_the_ball() {
        let dom = Domain::ball(2, 1.0).unwrap();
        let q = QuadratureSpec::gauss(4, 16).with_polar(Point::new(vec![0.5, 0.2]), 24, 1e-6, CoreRule::Resolve);
        let r = integrate(|x| x[0] * x[0], &dom, &q).unwrap();
        assert!((r.value - PI / 4.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn axisym_polar_matches_plain_for_smooth_integrand() {
        let dom = Domain::HalfCylinder { dim: 3 };
        let g = |rho: f64, z: f64| math::cos(rho) * (1.0 + z * z);
        let plain = integrate_axisym(g, 3, &dom, &QuadratureSpec::gauss(4, 16)).unwrap();
        let q = QuadratureSpec::gauss(4, 16).with_polar(Point::origin(3), 24, 1e-5, CoreRule::Resolve);
        let graded = integrate_axisym(g, 3, &dom, &q).unwrap();
        assert!((plain.value - graded.value).abs() < 1e-10);
    }

    #[test]
    fn fd_gradient_of_quadratic() {
        let f = RadialScalar { dim: 2, center: Point::origin(2), profile: PowerProfile { beta: 2.0 } };
        let e = fd_check_gradient(&f, &Point::new(vec![1.0, 1.0]), 1e-3).unwrap();
        assert!(e <= 1e-6);
        assert!(matches!(fd_check_gradient(&f, &Point::new(vec![1e-4, 0.0]), 1e-3), Err(Error::SingularProbe { .. })));
    }

    #[test]
    fn negated_gradient_is_detected() {
        struct Wrong;
        impl ScalarField for Wrong {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, x: &[f64]) -> f64 {
                x[0] * x[0] + x[1] * x[1]
            }
            fn gradient(&self, x: &[f64], out: &mut [f64]) {
                out[0] = -2.0 * x[0];
                out[1] = -2.0 * x[1];
            }
            fn laplacian(&self, _: &[f64]) -> f64 {
                4.0
            }
        }
        let e = fd_check_gradient(&Wrong, &Point::new(vec![1.0, 1.0]), 1e-3).unwrap();
        // |∂_i f| = 2, so the sign flip costs 2·2 per component
        assert!((e - 4.0).abs() < 1e-6);
    }
}
