use thiserror::Error;

/// Errors produced by model assembly, configuration parsing and the
/// time-stepping schemes.
#[derive(Debug, Error)]
pub enum VtsiError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("eigenvalue solver failed to converge")]
    EigenDidNotConverge,

    #[error("singular coupling matrix at step {step} (t = {time} s): {detail}")]
    SingularCoupling {
        step: usize,
        time: f64,
        detail: String,
    },

    #[error("singular static system: {0}")]
    SingularStatics(String),

    #[error("complementarity pivoting terminated on a ray (no solution) at step {step}")]
    RayTermination { step: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, VtsiError>;
