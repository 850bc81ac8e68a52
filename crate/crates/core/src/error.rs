use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("non-positive price {value} on {date}")]
    NonPositivePrice { date: String, value: f64 },
    #[error("series has {len} valid rows, need at least 2")]
    EmptySeries { len: usize },
    #[error("series too short: length {len}, need {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("fit range too narrow: {points} points, need {needed}")]
    RangeTooNarrow { points: usize, needed: usize },
    #[error("zero fluctuation at window size {n}")]
    ZeroFluctuation { n: usize },
    #[error("non-positive energy at scale {scale}")]
    NonPositiveEnergy { scale: f64 },
    #[error("band [{lo}, {hi}] has no overlap with the scale grid")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("sample too small: {len}, need {needed}")]
    SampleTooSmall { len: usize, needed: usize },
    #[error("sample too large: {len}, maximum {max}")]
    SampleTooLarge { len: usize, max: usize },
    #[error("incomplete Hurst vector for {market}")]
    IncompleteVector { market: String },
    #[error("degenerate vector: |h - m| = {norm:e}")]
    DegenerateVector { norm: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
