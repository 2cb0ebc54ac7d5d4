use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sin(theta) = {0} is outside [-1, 1]")]
    SinOutOfRange(f64),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index ({range}, {doppler}) out of bounds for cube {n_range}x{n_doppler}")]
    BinOutOfBounds {
        range: usize,
        doppler: usize,
        n_range: usize,
        n_doppler: usize,
    },

    #[error("range truncation {requested} exceeds fast-time length {available}")]
    RangeTruncation { requested: usize, available: usize },

    #[error("invalid scene policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("matrix is not positive definite at pivot {pivot}; use a diagonal loading > 0")]
    NotPositiveDefinite { pivot: usize },

    #[error("estimator failed at bin (range {range}, doppler {doppler}): {source}")]
    EstimatorFailed {
        range: usize,
        doppler: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("truth map is constant; NMSE is undefined")]
    ConstantTruth,

    #[error("map {rows}x{cols} is smaller than the {window}x{window} SSIM window")]
    MapTooSmall {
        rows: usize,
        cols: usize,
        window: usize,
    },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
