use thiserror::Error;

/// Errors raised by the engine, the oracle, the ledger and the simulator.
///
/// Every variant except `Io`, `Json` and `Csv` is a domain error: the
/// inputs violate a precondition of the operation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid reputation score: k = {k} exceeds n = {n}")]
    InvalidScore { n: u64, k: u64 },

    #[error("invalid window [{start}, {end}): start exceeds end")]
    InvalidWindow { start: u64, end: u64 },

    #[error("windows are not contiguous: previous ends at {expected}, next starts at {found}")]
    NonContiguous { expected: u64, found: u64 },

    #[error("epoch sequence is empty")]
    EmptyEpochs,

    #[error("length mismatch: {epochs} epochs but {weights} weights")]
    LengthMismatch { epochs: usize, weights: usize },

    #[error("discount parameters must be non-negative")]
    NegativeWeight,

    #[error("discount parameters sum to zero")]
    ZeroLambdaSum,

    #[error("scheme-2 weights must sum to exactly 1, got {0}")]
    WeightsNotNormalized(String),

    #[error("improvement test needs at least one new transaction")]
    EmptyDelta,

    #[error("horizon tick {horizon} is not beyond the score window ending at {window_end}")]
    HorizonInsideWindow { horizon: u64, window_end: u64 },

    #[error("invalid urn state: {0}")]
    InvalidUrn(String),

    #[error("urn exhausted: all {0} balls have been drawn")]
    UrnExhausted(u64),

    #[error("oracle routes disagree: {0}")]
    OracleDisagreement(&'static str),

    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    #[error("negative monetary value {0}")]
    NegativeValue(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("epoch boundaries must be strictly increasing ticks")]
    UnsortedBoundaries,

    #[error("malformed chain: {0}")]
    MalformedChain(String),

    #[error("cannot parse rational from {0:?}")]
    ParseRational(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True when the error is a write to a closed pipe.
    pub fn is_broken_pipe(&self) -> bool {
        let kind = match self {
            Error::Io(e) => Some(e.kind()),
            Error::Json(e) => e.io_error_kind(),
            Error::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(e) => Some(e.kind()),
                _ => None,
            },
            _ => None,
        };
        kind == Some(std::io::ErrorKind::BrokenPipe)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
