use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is numerically singular (pivot {pivot:.3e} below threshold)")]
    SingularMatrix { pivot: f64 },
    #[error("root finder did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("power series has zero constant term")]
    ZeroConstantTerm,
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("method `{0}` fails even the first-order consistency conditions")]
    Inconsistent(String),
    #[error("second characteristic polynomial of `{0}` is not a Schur polynomial")]
    NotSchur(String),
    #[error("tail of coefficient sequence does not converge (estimated ratio {tau})")]
    TailNotConverged { tau: f64 },
    #[error("method `{0}` is not admitted (requires nullstable, Schur sigma, order <= step count)")]
    MethodNotAdmitted(String),
    #[error("starting-weight moment system is singular")]
    SingularSystem,
    #[error("sample length {got} does not match expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("starting-value system is singular (step size too large)")]
    SingularStartSystem,
    #[error("kernel value {value:.3e} at diagonal node {node} below 0.5")]
    DiagonalKernelTooSmall { node: usize, value: f64 },
    #[error("step ladder is empty: sqrt(delta) >= admissible step ceiling")]
    EmptyLadder,
    #[error("unknown problem id {0}")]
    UnknownProblem(u32),
    #[error("invalid method coefficients: {0}")]
    InvalidMethod(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
