use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid sinogram geometry: {0}")]
    InvalidSinogram(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("sinogram geometry mismatch: {0}")]
    SpecMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("sparse operator needs about {estimate} bytes, above the limit of {limit} bytes")]
    MemoryLimit { estimate: u64, limit: u64 },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
