use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed profile document: {0}")]
    Malformed(String),

    #[error("duplicate layer id `{0}`")]
    DuplicateLayer(String),

    #[error("edge references unknown layer id `{0}`")]
    UnknownLayer(String),

    #[error("dependency cycle through layer `{0}`")]
    Cycle(String),

    #[error("layer `{0}` is not reachable from the input")]
    Unreachable(String),

    #[error("invalid network parameters: {0}")]
    InvalidNetParams(String),

    #[error("partition does not cover the model: {0}")]
    BadPartition(String),

    #[error("inconsistent partition: server-side `{parent}` feeds device-side `{child}`")]
    InconsistentPartition { parent: String, child: String },

    #[error("capacity arithmetic overflowed while computing {0}")]
    Overflow(&'static str),

    #[error("parent `{0}` has outgoing propagation arcs with different weights")]
    HeterogeneousPropagation(String),

    #[error("maximum flow reached the infinite sentinel: no finite cut separates source and sink")]
    UnboundedFlow,

    #[error("profile is not a chain: `{0}` has more than one child")]
    NotAChain(String),

    #[error("cut value {cut_value_us} us disagrees with training delay {delay_us} us")]
    CrossCheck { cut_value_us: u64, delay_us: u64 },

    #[error("block `{block}`: {reason}")]
    BlockShape { block: String, reason: String },

    #[error("block `{0}` failed the intra-block test and cannot be abstracted")]
    BlockNotAbstractable(String),

    #[error("instance has {layers} layers; enumeration is limited to {limit}")]
    TooLarge { layers: usize, limit: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Module whose contract the error reports.
    pub fn module(&self) -> &'static str {
        use Error::*;
        match self {
            Malformed(_) | DuplicateLayer(_) | UnknownLayer(_) | Cycle(_) | Unreachable(_) => "model-profile",
            InvalidNetParams(_) | BadPartition(_) | InconsistentPartition { .. } => "delay-model",
            Overflow(_) | HeterogeneousPropagation(_) => "split-dag",
            UnboundedFlow => "maxflow",
            NotAChain(_) | CrossCheck { .. } => "splitter",
            BlockShape { .. } | BlockNotAbstractable(_) => "blockwise",
            TooLarge { .. } => "oracle",
            InvalidScenario(_) => "edgesim",
            UnknownFixture(_) | Io(_) | Json(_) | Csv(_) => "io",
        }
    }
}
