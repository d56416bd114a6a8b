use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("matrix dimension {rows}x{cols} exceeds the maximum of {max}x{max}")]
    DimensionTooLarge { rows: usize, cols: usize, max: usize },

    #[error("matrix is not Hermitian: asymmetry {asymmetry:.3e} exceeds {tolerance:.1e}")]
    NotHermitian { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive semidefinite: minimum eigenvalue {min_eigenvalue:.3e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid trace {trace} (expected {expected})")]
    InvalidTrace { trace: f64, expected: f64 },

    #[error("vector norm {norm} is not 1")]
    NotNormalized { norm: f64 },

    #[error("matrix is not unitary: deviation {deviation:.3e}")]
    NotUnitary { deviation: f64 },

    #[error("effects do not sum to identity: deviation {deviation:.3e}")]
    Incomplete { deviation: f64 },

    #[error("channel is not trace preserving: deviation {deviation:.3e}")]
    NotTracePreserving { deviation: f64 },

    #[error("local operation changed the receiver's marginal: deviation {deviation:.3e}")]
    MarginalViolation { deviation: f64 },

    #[error("non-finite entry in matrix")]
    NonFinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scenario shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{algorithm} did not converge after {iterations} iterations")]
    NoConvergence { algorithm: &'static str, iterations: usize },

    #[error("singular Newton system at iteration {iteration}")]
    SingularSystem { iteration: usize },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
