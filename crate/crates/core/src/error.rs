use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: left has {left} entries, right has {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("non-finite value {value} at coordinate {coordinate} ({context})")]
    NonFinite {
        context: &'static str,
        coordinate: usize,
        value: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty minibatch")]
    EmptyBatch,

    #[error("sample index {index} out of range for shard of {len} samples")]
    SampleOutOfRange { index: usize, len: usize },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("{path}: bad IDX magic 0x{found:08x}, expected 0x{expected:08x}")]
    BadMagic { path: PathBuf, found: u32, expected: u32 },

    #[error("{path}: truncated IDX file ({needed} bytes needed, {available} available)")]
    Truncated {
        path: PathBuf,
        needed: usize,
        available: usize,
    },

    #[error("IDX count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error(
        "could not give every client at least one sample after {attempts} Dirichlet draws; \
         use a larger dataset, fewer clients or a larger alpha"
    )]
    PartitionExhausted { attempts: usize },

    #[error("k-out {k_out} out of range for {n} clients (need 1 <= k-out <= {max})")]
    KOutOutOfRange { k_out: usize, n: usize, max: usize },

    #[error("mixing matrix is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },

    #[error("algorithm {algorithm} cannot run on this communication round: {reason}")]
    TopologyMismatch { algorithm: &'static str, reason: String },

    #[error("push-sum weight of client {client} is {weight:e}; protocol state is corrupt")]
    ProtocolCorruption { client: usize, weight: f64 },

    #[error("round {round}: {source}")]
    AtRound {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("round {round}: invariant violated: {detail}")]
    Invariant { round: usize, detail: String },

    #[error("window starting at round {window} of length {b} is not strongly connected")]
    NotConnected { window: usize, b: usize },

    #[error("metrics out of order: round {got} appended after {last:?}")]
    OutOfOrder { got: u64, last: Option<u64> },

    #[error("run directory {0} already holds a manifest")]
    RunDirectoryInUse(PathBuf),

    #[error("trace has {got} steps, expected {expected}")]
    TraceLength { got: usize, expected: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_round(self, round: usize) -> Error {
        match self {
            e @ (Error::AtRound { .. } | Error::Invariant { .. }) => e,
            e => Error::AtRound {
                round,
                source: Box::new(e),
            },
        }
    }
}
