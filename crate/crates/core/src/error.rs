use alloc::string::String;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Every failure the core library can report.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Operand sizes or spatial dimensions do not match.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A matrix that must be positive definite is not.
    #[error("matrix is not positive definite (offending eigenvalue {eigenvalue:e})")]
    NotPositiveDefinite {
        /// The smallest eigenvalue (or failing Cholesky pivot).
        eigenvalue: f64,
    },

    /// A numeric input is NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// An input collection is empty where at least one entry is required.
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// An argument is outside its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A constitutive law was evaluated outside its domain of definition.
    #[error("constitutive domain error: {0}")]
    Domain(String),

    /// Parameter calibration failed.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// An element has a non-positive Jacobian determinant.
    #[error("element {element} has non-positive Jacobian determinant {det_j:e}")]
    SingularJacobian {
        /// Element index.
        element: usize,
        /// Offending determinant.
        det_j: f64,
    },

    /// The global linear system is singular (zero pivot).
    #[error("singular system: zero pivot at equation {equation}")]
    SingularSystem {
        /// Equation index (in solver ordering) of the failing pivot.
        equation: usize,
    },

    /// Newton's method did not converge.
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged {
        /// Iterations performed.
        iterations: usize,
        /// Final residual norm.
        residual: f64,
    },

    /// The data-driven fixed point did not settle within the iteration cap.
    #[error("fixed point not reached at step {step}: {change_count} assignments still changing after {iterations} iterations")]
    NonConvergence {
        /// Time step index (1-based).
        step: usize,
        /// Fixed-point iterations performed.
        iterations: usize,
        /// Reassignments in the last iteration.
        change_count: usize,
    },

    /// A problem definition is inconsistent.
    #[error("invalid problem: {0}")]
    Problem(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
