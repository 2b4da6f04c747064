use thiserror::Error;

/// Errors raised anywhere in the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precision error: {0}")]
    Precision(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("singular factor in product representation at x = {0}")]
    Singularity(String),

    #[error("singular linear system (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("bootstrap order {order} is inconsistent: residual {residual:.3e}")]
    InconsistentSystem { order: usize, residual: f64 },

    #[error(
        "resonant roots: u[{first}]·q^{shift} collides with u[{second}] (distance {distance:.3e})"
    )]
    Resonance {
        first: usize,
        second: usize,
        shift: usize,
        distance: f64,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("expected {expected} zeros of W in the annulus, found {found}")]
    RootCount { expected: usize, found: i64 },

    #[error("evaluation point {x} is within {distance:.3e} of a singularity at {location}")]
    NearPole {
        x: String,
        location: String,
        distance: f64,
    },

    #[error("root {index} is not a simple zero of the Wronskian")]
    DegenerateRoot { index: usize },

    #[error("analytic and offset limits disagree at root {index}: {discrepancy:.3e}")]
    LimitMismatch { index: usize, discrepancy: f64 },

    #[error(
        "Newton iteration did not converge after {iterations} steps (residual {residual:.3e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("branch mismatch: {0}")]
    Branch(String),

    #[error("pole of the kernel at x = {0}")]
    Pole(String),
}

pub type Result<T> = std::result::Result<T, Error>;
