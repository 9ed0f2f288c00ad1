use thiserror::Error;

/// Crate-wide error type. Variant names follow the failure modes of the
/// individual operations; `OutsideClosedCone` is deliberately *not* here —
/// a jet leaving the closed cone is a value, not a failure (see
/// [`crate::symfun::FValue`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("eigensolver did not reach residual {tol:e} within {sweeps} sweeps (off-diagonal norm {off:e})")]
    NonConvergence { tol: f64, sweeps: usize, off: f64 },

    #[error("symmetric-function index k={k} out of range 1..={n}")]
    BadK { k: usize, n: usize },

    #[error("point outside the field's domain: {0}")]
    OutOfDomain(String),

    #[error("grid node {0:?} is too close to the boundary for a centered stencil")]
    TooCloseToBoundary(Vec<usize>),

    #[error("field value must be positive, got {0}")]
    NonPositiveU(f64),

    #[error("empty evaluation region")]
    EmptyRegion,

    #[error("Mobius map evaluated on (or too near) an inversion pole at {0:?}")]
    HitsPole(Vec<f64>),

    #[error("dimension mismatch: {0}")]
    DomainMismatch(String),

    #[error("concave envelope implemented for n <= 3, got n = {0}")]
    DimensionTooHigh(usize),

    #[error("finite-difference Hessians exceed the C^1,1 proxy bound {bound:e} on {count} of {total} nodes")]
    UnboundedHessian { bound: f64, count: usize, total: usize },

    #[error("ordering psi1 <= psi2 violated by {gap:e} at {at:?}")]
    OrderViolation { gap: f64, at: Vec<f64> },

    #[error("bad deformation parameters: {0}")]
    BadParams(String),

    #[error("bisection bracket failure: {0}")]
    BracketFailure(String),

    #[error("no starting radius: sphere comparison fails even at lambda = {0:e}")]
    NoStartingRadius(f64),

    #[error("input is not certified as a solution: {0}")]
    NotASolution(String),

    #[error("invalid grid: {0}")]
    BadGrid(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed grid file: {0}")]
    BadGridFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
