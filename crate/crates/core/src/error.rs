use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("labels contain a single class; {0}")]
    SingleClass(&'static str),

    #[error("no positive labels")]
    NoPositives,

    #[error("all {0} bootstrap resamples were single-class")]
    DegenerateBootstrap(usize),

    #[error("empty release quota")]
    EmptyReleaseQuota,

    #[error("index {index} out of bounds for {len} parameters")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("{path}:{line}: {msg}")]
    Csv { path: String, line: u64, msg: String },

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("{0}")]
    Store(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
