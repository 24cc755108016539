use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants mirror the failure modes of the individual
/// pipeline stages so callers can match on what actually went wrong.
#[derive(Debug, Error)]
pub enum Error {
    #[error("network error: {0}")]
    Network(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("cache corrupt: {0}")]
    CacheCorrupt(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("vocab error: {0}")]
    Vocab(String),

    #[error("vocab mismatch: learner has {learner}, shard has {shard}")]
    VocabMismatch { learner: u32, shard: u32 },

    #[error("incompatible signatures: {0}")]
    IncompatibleSignatures(String),

    #[error("budget unreachable: {0}")]
    BudgetUnreachable(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("schedule exceeds corpus: last budget {budget} > available {available} tokens")]
    ScheduleExceedsCorpus { budget: u64, available: u64 },

    #[error("monotonicity error: {0}")]
    Monotonicity(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("non-positive loss: {0}")]
    NonpositiveLoss(String),

    #[error("misaligned traces: {0}")]
    MisalignedTraces(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
