use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("size mismatch: expected {expected} values, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("data must be nonnegative (found {value} at index {index})")]
    NegativeData { index: usize, value: f64 },

    #[error("data must be strictly positive (found {value} at index {index})")]
    NonPositive { index: usize, value: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("solver produced a negative value {value:e} at index {index}")]
    NegativeSolution { index: usize, value: f64 },

    #[error("extension mesh too coarse near y = 0: {0}")]
    MeshTooCoarse(String),

    #[error("total mass vanished at t = {t}; rescaling is undefined past extinction")]
    VanishingMass { t: f64 },

    #[error("volume vanished; the rescaled flow cannot be normalized")]
    VanishingVolume,

    #[error("point cloud contains the origin (index {0})")]
    OriginInCloud(usize),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
