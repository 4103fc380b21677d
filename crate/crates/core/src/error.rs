//! Error type shared across the crate.

/// Errors raised by model construction, integration, and analysis.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("component {index} = {value} must be strictly positive")]
    NonPositive { index: usize, value: f64 },

    #[error("parameter constraint violated: {0}")]
    Constraint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("interpolation nodes {i} and {j} coincide (t = {t})")]
    DuplicateNodes { i: usize, j: usize, t: f64 },

    #[error("t = {t} lies outside the interpolation interval [{start}, {end}]")]
    OutOfInterval { t: f64, start: f64, end: f64 },

    #[error(
        "linear system singular or ill-conditioned (cond ~ {cond:.3e}) at dt = {dt:.6e}, state {state:?}"
    )]
    SingularStep { dt: f64, cond: f64, state: Vec<f64> },

    #[error("Newton iteration did not converge after {iters} iterations (last residual {residual:.3e})")]
    NewtonDiverged { iters: usize, residual: f64 },

    #[error("step {index} failed: {source}")]
    StepFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("node transition {node} failed: {source}")]
    NodeFailed {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("interval {interval} failed: {source}")]
    IntervalFailed {
        interval: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("study cell (S = {corrections}, n = {nodes}, dt0 = {dt0}) failed: {source}")]
    CellFailed {
        corrections: usize,
        nodes: usize,
        dt0: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("step size underflow (h = {h:.3e} at t = {t:.6})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("target accuracy {target:.3e} unreachable: {reason}")]
    TargetUnreachable { target: f64, reason: String },

    #[error("trajectory grids do not match: {0}")]
    GridMismatch(String),

    #[error("error value {value} is not positive; no convergence order is defined")]
    NonPositiveError { value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
