use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An integrand returned NaN or ±∞ at a quadrature node.
    NonFiniteSample { at: [f64; 3] },
    /// A finite-difference stencil or a pointwise evaluation touched the singular set.
    SingularProbe { distance: f64 },
    /// A dimension override that the selected example does not admit.
    BadDimension { requested: usize, reason: &'static str },
    /// A parameter outside the admissible range of the construction.
    ParamOutOfRange { name: &'static str, value: f64, constraint: &'static str },
    /// A point outside the domain of a piecewise definition.
    OutOfDomain { name: &'static str, value: f64 },
    /// The Orlicz bisection bracket does not enclose the level set.
    BracketFailure { k: f64, integral: f64 },
    /// Oscillation vanished at every scale; the Hölder slope is undefined.
    DegenerateOscillation,
    /// A test function whose support leaves the integration domain.
    SupportViolation,
    /// Finite-difference divergence check failed for a field that must be solenoidal.
    NotDivergenceFree { max_divergence: f64 },
    NonFiniteDrift { node: usize },
    GridTooCoarse { h_z: f64, required: f64 },
    NoConvergence { iterations: usize, residual: f64 },
    /// Neumann-series iteration stopped contracting.
    ContractionFailure { iterations: usize, factor: f64 },
    InvalidInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFiniteSample { at } => {
                write!(f, "non-finite integrand sample near {:?}; polar refinement missing?", at)
            }
            Error::SingularProbe { distance } => {
                write!(f, "probe within {distance:e} of the singular set")
            }
            Error::BadDimension { requested, reason } => {
                write!(f, "dimension {requested} not allowed: {reason}")
            }
            Error::ParamOutOfRange { name, value, constraint } => {
                write!(f, "parameter {name} = {value} violates {constraint}")
            }
            Error::OutOfDomain { name, value } => write!(f, "{name} = {value} outside domain"),
            Error::BracketFailure { k, integral } => {
                write!(f, "Orlicz bracket failure: integral {integral} at k = {k}")
            }
            Error::DegenerateOscillation => write!(f, "oscillation is zero at every scale"),
            Error::SupportViolation => write!(f, "test-function support leaves the domain"),
            Error::NotDivergenceFree { max_divergence } => {
                write!(f, "field is not divergence free (max |div| = {max_divergence:e})")
            }
            Error::NonFiniteDrift { node } => write!(f, "non-finite drift at node {node}"),
            Error::GridTooCoarse { h_z, required } => {
                write!(f, "grid too coarse: h_z = {h_z} > {required}")
            }
            Error::NoConvergence { iterations, residual } => {
                write!(f, "no convergence after {iterations} iterations (residual {residual:e})")
            }
            Error::ContractionFailure { iterations, factor } => {
                write!(f, "Neumann series not contracting after {iterations} steps (factor {factor})")
            }
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
