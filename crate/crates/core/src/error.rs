use thiserror::Error;

/// Errors surfaced by dataset ingestion and model I/O.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("schema error at row {row}, column '{column}': {msg}")]
    Schema {
        row: usize,
        column: String,
        msg: String,
    },
    #[error("header is missing column '{0}'")]
    MissingColumn(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("feature vector has arity {got}, schema expects {expected}")]
    ArityMismatch { got: usize, expected: usize },
    #[error("model document error: {0}")]
    Model(String),
}

/// Errors from the Renyi-DP accountant.
#[derive(Debug, Error)]
pub enum AccountantError {
    #[error("sigma^2 must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("noise weights must be positive and sum to 1, got sum {0}")]
    BadWeights(f64),
    #[error("order alpha must be an integer >= 2, got {0}")]
    BadOrder(u32),
    #[error("delta must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("dataset must be nonempty for the init-score bound")]
    EmptyDataset,
    #[error("rdp curve is missing order {0}")]
    MissingOrder(u32),
    #[error(
        "no admissible (alpha, sigma^2) pair reaches epsilon_trees = {target}; closest achieved epsilon' = {closest}"
    )]
    Infeasible { target: f64, closest: f64 },
    #[error("invalid hyperparameters: {0}")]
    BadHyperparameters(String),
}

/// Errors from training and the experiment harness.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Accountant(#[from] AccountantError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("gradient {0} exceeds the clip bound; caller must clip first")]
    UnclippedGradient(f64),
    #[error("ledger has no data point with index {0}")]
    UnknownIndex(usize),
    #[error("partition of {rows} rows cannot feed {trees} trees")]
    PartitionTooSmall { rows: usize, trees: usize },
    #[error("fixed-point overflow aggregating value {0}")]
    FixedPointOverflow(f64),
    #[error("secure aggregation needs equal-length vectors")]
    LengthMismatch,
    #[error("replica divergence at round {0}; protocol bug")]
    ReplicaDivergence(usize),
    #[error("R^2 is undefined: zero label variance")]
    UndefinedR2,
    #[error("metrics need equal, nonzero-length inputs")]
    BadMetricInput,
    #[error("invalid config: {0}")]
    BadConfig(String),
}
