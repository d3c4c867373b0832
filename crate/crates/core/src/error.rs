use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    EigenNonConvergence { sweeps: usize, off_norm: f64 },

    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {error:e}")]
    QuadratureNonConvergence { estimate: f64, error: f64 },

    #[error("grids are incommensurate: spacing {left:e} vs {right:e}")]
    IncommensurateGrids { left: f64, right: f64 },

    #[error("empty grid")]
    EmptyGrid,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
