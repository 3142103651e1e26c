use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("basis index r={r} outside 2..={max} for dimension {dim}")]
    InvalidBasisIndex { r: usize, dim: usize, max: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error(
        "sampling error: propagation over {distance:.6e} m aliases the transfer function \
         (limit {limit:.6e} m); use a grid of at least {min_pixels}x{min_pixels} pixels or a larger pitch"
    )]
    Sampling {
        distance: f64,
        limit: f64,
        min_pixels: usize,
    },

    #[error("invalid mode set: {0}")]
    InvalidModeSet(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate transfer matrix: no power captured")]
    DegenerateTransfer,

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("insufficient data: sent state b={b} in setting (k={k}, l={l}) has zero total counts")]
    InsufficientData { b: usize, k: usize, l: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no threshold: {0}")]
    NoThreshold(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
