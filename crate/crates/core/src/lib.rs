//! Numerical laboratory for the drift equation `-Δu + b·∇u = 0` with singular,
//! possibly divergence-free drift `b`.
//!
//! The crate is `no_std` (with `alloc`): everything here is pure computation.
//! IO, command-line handling and file formats live in the `driftlab` crate.
//!
//! Modules:
//! - [`field`]: points, domains, closed-form fields with exact derivatives, quadrature.
//! - [`examples`]: the four explicit counterexample pairs and the 1D explicit solution.
//! - [`norms`]: L_p, W¹₂, Orlicz `L_{2,ln}`, Morrey, BMO and a Hölder-exponent estimator.
//! - [`weak_form`]: quadrature of the two integral identities and the trilinear form.
//! - [`barrier`]: the cutoff drift `b_ε`, its limit `b₀`, the auxiliary profile `f_ε`
//!   and the barrier `v_ε`, with sampled verification of their properties.
//! - [`solver`]: finite differences on the axisymmetric half-cylinder and on the disc,
//!   BiCGStab, the Neumann-series mode and the ε-sweep.
#![no_std]

extern crate alloc;

pub mod barrier;
pub mod error;
pub mod examples;
pub mod field;
pub mod math;
pub mod norms;
pub mod solver;
pub mod weak_form;

pub use error::{Error, Result};
pub use field::{Domain, Point, QuadratureSpec, ScalarField, VectorField};
