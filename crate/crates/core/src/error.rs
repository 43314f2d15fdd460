use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("potential is not smooth at the queried point (coordinate {coordinate} on a kink)")]
    NonSmooth { coordinate: usize },

    #[error("potential exposes no Hessian evaluator")]
    MissingHessian,

    #[error("Hessian is not symmetric (asymmetry {asymmetry:.3e})")]
    NonSymmetricHessian { asymmetry: f64 },

    #[error("empirical covariance is singular (smallest eigenvalue {min_eigenvalue:.3e})")]
    SingularCovariance { min_eigenvalue: f64 },

    #[error("quadrature failed to converge on [{lo}, {hi}] (error estimate {error:.3e})")]
    Quadrature { lo: f64, hi: f64, error: f64 },

    #[error("target density vanishes at a required quantile ({at})")]
    ZeroDensity { at: f64 },

    #[error("potential is not radially symmetric (spot check differs by {deviation:.3e})")]
    NonRadial { deviation: f64 },

    #[error("Jacobian determinant is not positive at a probe ({det:.3e})")]
    NonPositiveDeterminant { det: f64 },

    #[error("map exposes no Jacobian evaluator")]
    MissingJacobian,

    #[error("Jacobian eigenvalue {value:.3e} is not strictly positive")]
    DegenerateEigenvalue { value: f64 },

    #[error("MALA acceptance rate {rate:.3} outside [0.1, 0.9]; step needs tuning")]
    Tuning { rate: f64 },

    #[error("non-finite gradient encountered during sampling")]
    NanGradient,

    #[error("solver did not converge after {iterations} iterations (best residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("duplicate support point at index {index}")]
    DuplicatePoint { index: usize },

    #[error("numerical instability: {0}")]
    Unstable(String),

    #[error("unsupported concentration kind for this check: {0}")]
    UnsupportedKind(String),

    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
