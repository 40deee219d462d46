use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("value {value} is outside the open unit interval")]
    Domain { value: f64 },
    #[error("invalid distribution parameters: {0}")]
    InvalidParams(String),
    #[error("infeasible moments: mean {mean}, std {std} (need std^2 < mean(1-mean))")]
    InfeasibleMoments { mean: f64, std: f64 },
    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate data: all values are identical")]
    DegenerateData,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid scale for record {index}: {reason}")]
    InvalidScale { index: usize, reason: String },
    #[error("stratum '{0}' has no records")]
    EmptyStratum(String),
    #[error("no replicates to aggregate")]
    EmptyReplicates,
    #[error("bin width {0} does not divide [0, 1) into an integer number of bins")]
    InvalidBinWidth(f64),
    #[error("histograms have different bin counts ({left} vs {right})")]
    BinMismatch { left: usize, right: usize },
    #[error("length mismatch ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
