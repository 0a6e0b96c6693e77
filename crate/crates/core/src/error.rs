use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The configuration document could not be parsed.
    #[error("malformed configuration at `{key}`: {message}")]
    Malformed { key: String, message: String },

    /// One or more configuration invariants failed. Every violation is listed.
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("element layout error: {0}")]
    Layout(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("zero-length path between {0}")]
    ZeroDistance(&'static str),

    #[error("degenerate channel: combining weights undefined for a zero channel")]
    DegenerateChannel,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error("checkpoint parse error: {0}")]
    CheckpointParse(String),

    #[error("search space too large: {0} candidates exceeds the limit of {1}")]
    SearchSpace(f64, f64),

    #[error("invalid data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
