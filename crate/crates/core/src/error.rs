use thiserror::Error;

/// Errors raised by mesh construction, coefficient evaluation, the solvers
/// and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-monotone mesh: step {index} has length {step:e}")]
    NonMonotoneMesh { index: usize, step: f64 },

    #[error("quadrature did not converge on [{lower:e}, {upper:e}] after {subdivisions} subdivisions (error estimate {error:e})")]
    QuadratureNonconvergence {
        lower: f64,
        upper: f64,
        subdivisions: usize,
        error: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular diagonal entry [M]_{{{index},{index}}} = {value:e}")]
    SingularDiagonal { index: usize, value: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error comes from bad user input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::InvalidInput(_)
                | Error::Parse(_)
                | Error::NonMonotoneMesh { .. }
                | Error::DimensionMismatch { .. }
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
