//! Scalar helpers shared across modules: `libm` wrappers, Gauss–Legendre rules,
//! low-discrepancy sequences, and a few closed-form measures.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
#[inline]
pub fn powi(x: f64, k: i32) -> f64 {
    let mut acc = 1.0;
    let mut base = if k < 0 { 1.0 / x } else { x };
    let mut e = k.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}
#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}
#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}
#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}
#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}
#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// Real or complex scalar; lets closed-form fields be evaluated at complex
/// arguments for complex-step differentiation. Branch decisions use `re()`.
pub trait Scalar:
    Copy + From<f64> + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn re(self) -> f64;
    fn exp(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn sqrt(self) -> Self;
}

impl Scalar for f64 {
    fn re(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        exp(self)
    }
    fn powf(self, p: f64) -> Self {
        powf(self, p)
    }
    fn sqrt(self) -> Self {
        sqrt(self)
    }
}

impl Scalar for Complex64 {
    fn re(self) -> f64 {
        self.re
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn powf(self, p: f64) -> Self {
        Complex64::powf(self, p)
    }
    fn sqrt(self) -> Self {
        Complex64::sqrt(self)
    }
}

pub fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    let n = order as f64;
    for i in 0..order {
        // Chebyshev-type initial guess, then Newton on P_n.
        let mut x = cos(PI * (i as f64 + 0.75) / (n + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if abs(dx) < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(order, x);
        if d != 0.0 {
            dp = d;
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Returns (P_n(x), P_n'(x)).
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule on [a, b]: `cells` equal panels with the given reference rule.
pub fn composite_nodes(a: f64, b: f64, cells: usize, rule: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(cells * rule.0.len());
    let h = (b - a) / cells as f64;
    for c in 0..cells {
        let lo = a + h * c as f64;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// `i`-th point of the Halton sequence in [0,1)^dim (dim ≤ 12). Index 0 is skipped
/// so the first point is not the corner.
pub fn halton(i: u64, dim: usize) -> Vec<f64> {
    (0..dim).map(|d| radical_inverse(i + 1, PRIMES[d])).collect()
}

/// Γ(k/2) for positive integer k.
pub fn gamma_half(k: usize) -> f64 {
    assert!(k >= 1);
    if k % 2 == 0 {
        // Γ(m) = (m-1)!
        let m = k / 2;
        (1..m).map(|j| j as f64).product()
    } else {
        // Γ(m + 1/2) = (2m)! / (4^m m!) √π
        let mut g = sqrt(PI);
        let mut x = 0.5;
        while x < k as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    powi(PI, (n / 2) as i32) * if n % 2 == 1 { sqrt(PI) } else { 1.0 } / gamma_half(n + 2)
}

/// Surface area of the unit sphere Sⁿ⁻¹ ⊂ ℝⁿ.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Least-squares slope and RMS residual of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (intercept + slope * a);
            e * e
        })
        .sum();
    (slope, intercept, sqrt(rss / m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for order in 1..=12 {
            let (x, w) = gauss_legendre(order);
            for deg in 0..(2 * order) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * powi(*x, deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!(abs(q - exact) < 1e-13, "order {order} deg {deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn ball_volumes() {
        assert!(abs(unit_ball_volume(1) - 2.0) < 1e-15);
        assert!(abs(unit_ball_volume(2) - PI) < 1e-15);
        assert!(abs(unit_ball_volume(3) - 4.0 * PI / 3.0) < 1e-14);
        assert!(abs(unit_ball_volume(4) - PI * PI / 2.0) < 1e-14);
        assert!(abs(unit_sphere_area(3) - 4.0 * PI) < 1e-14);
        assert!(abs(unit_sphere_area(2) - 2.0 * PI) < 1e-15);
    }

    #[test]
    fn halton_is_in_unit_cube() {
        for i in 0..200 {
            for c in halton(i, 5) {
                assert!((0.0..1.0).contains(&c));
            }
        }
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn powi_matches_pow() {
        for k in -5..8 {
            assert!(abs(powi(1.7, k) - powf(1.7, k as f64)) < 1e-12);
        }
    }
}
