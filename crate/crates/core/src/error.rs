use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid activation: {0}")]
    InvalidActivation(String),

    #[error("pre-activation {value} lies on breakpoint {breakpoint} (layer {layer}, neuron {neuron})")]
    BreakpointHit {
        layer: usize,
        neuron: usize,
        breakpoint: usize,
        value: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("frozen batch statistics required for frozen-batch evaluation")]
    MissingFrozenStats,

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty sample")]
    EmptySample,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hyperplane normal is zero")]
    ZeroWeight,

    #[error("batch-norm scale gamma is zero for neuron {0}")]
    ZeroGamma(usize),

    #[error("count does not fit in 64 bits")]
    CountOverflow,

    #[error("could not generate a valid arrangement after {0} attempts")]
    GenerationFailed(usize),

    #[error("parent affine map has rank {rank} < {required} (sigma_min = {sigma_min:e})")]
    RankDeficient {
        rank: usize,
        required: usize,
        sigma_min: f64,
    },

    #[error("window has in-region support {coverage:.4} below threshold {threshold:.4}")]
    WindowNotContained { coverage: f64, threshold: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
            _ => Error::Format(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.to_string())
        } else {
            Error::Format(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
