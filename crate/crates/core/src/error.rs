//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // dataio
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),
    #[error("series (phase {phase}, step {step}) has {rows} rows, expected {expected}")]
    RaggedSeries {
        phase: u8,
        step: u32,
        rows: usize,
        expected: usize,
    },
    #[error("non-finite value at phase {phase}, step {step}, minute {minute}")]
    NonFinite { phase: u8, step: u32, minute: usize },
    #[error("duplicate series key (phase {phase}, step {step})")]
    DuplicateKey { phase: u8, step: u32 },
    #[error("standard scaler fit on degenerate (zero-variance) data")]
    DegenerateData,
    #[error("dataset is empty after flag filtering")]
    EmptyDataset,
    #[error("subsample factor {factor} does not divide series length {len}")]
    NonDivisibleFactor { factor: usize, len: usize },

    // simulator
    #[error("unstable integration: state reached {value} degC in phase {phase}, series {step}")]
    UnstableIntegration { phase: u8, step: u32, value: f64 },

    // labeling
    #[error("bad smoothing window {window} for length {len} (must be odd, >= 1, <= len)")]
    BadWindow { window: usize, len: usize },

    // forecaster / synth training
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("model must be fitted before sampling")]
    UnfittedModel,
    #[error("no fitted pool for class {0}")]
    UnknownClass(u8),

    // metrics
    #[error("MAPE undefined: actual value within {tolerance} of zero")]
    UndefinedMape { tolerance: f64 },
    #[error("MASE undefined: actuals are constant")]
    UndefinedMase,
    #[error("requested {k} components but numerical rank is {rank}")]
    RankDeficient { k: usize, rank: usize },
    #[error("perplexity {perplexity} too large for {n} points (must be < n - 1)")]
    PerplexityTooLarge { perplexity: f64, n: usize },

    // harness
    #[error("class {class} has no training series")]
    ClassTooSmall { class: u8 },
    #[error("no successful rows for arm `{0}`")]
    EmptyArm(String),

    // generic
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("refusing to overwrite `{0}` without --force")]
    WouldOverwrite(String),
    #[error("malformed checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable short name of the variant, used by the CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "MissingColumn",
            Error::RaggedSeries { .. } => "RaggedSeries",
            Error::NonFinite { .. } => "NonFinite",
            Error::DuplicateKey { .. } => "DuplicateKey",
            Error::DegenerateData => "DegenerateData",
            Error::EmptyDataset => "EmptyDataset",
            Error::NonDivisibleFactor { .. } => "NonDivisibleFactor",
            Error::UnstableIntegration { .. } => "UnstableIntegration",
            Error::BadWindow { .. } => "BadWindow",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::UnfittedModel => "UnfittedModel",
            Error::UnknownClass(_) => "UnknownClass",
            Error::UndefinedMape { .. } => "UndefinedMAPE",
            Error::UndefinedMase => "UndefinedMASE",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::PerplexityTooLarge { .. } => "PerplexityTooLarge",
            Error::ClassTooSmall { .. } => "ClassTooSmall",
            Error::EmptyArm(_) => "EmptyArm",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::WouldOverwrite(_) => "WouldOverwrite",
            Error::BadCheckpoint(_) => "BadCheckpoint",
            Error::Csv(_) => "Csv",
            Error::Io(_) => "Io",
        }
    }
}
