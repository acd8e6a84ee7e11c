use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tensor has {0} unimputed missing entries; call impute first")]
    UnimputedData(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("negative entry {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("station `{station}` has no observations of feature `{feature}`")]
    AllMissingFeature { station: String, feature: String },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("{file}:{line}: malformed row: {message}")]
    MalformedRow { file: String, line: usize, message: String },

    #[error("{file}:{line}: unknown station `{station}`")]
    UnknownStation { file: String, line: usize, station: String },

    #[error("{file}:{line}: negative concentration {value} for `{feature}`")]
    NegativeConcentration {
        file: String,
        line: usize,
        feature: String,
        value: f64,
    },

    #[error("{file}: duplicate sample for ({key}) on lines {first_line} and {second_line}")]
    DuplicateSample {
        file: String,
        key: String,
        first_line: usize,
        second_line: usize,
    },

    #[error("series cadence {series_secs}s does not divide tensor step {tensor_secs}s")]
    IncompatibleCadence { series_secs: i64, tensor_secs: i64 },

    #[error("rank {p} exceeds min(rows, cols) = {max}")]
    RankTooLarge { p: usize, max: usize },

    #[error("non-negativity violated: {0}")]
    NonNegativityViolation(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("too few stations for embedding: {n} (need at least {min})")]
    TooFewStations { n: usize, min: usize },

    #[error("n_neighbors = {n_neighbors} must be at least 2 and below the station count {n}")]
    BadNeighborCount { n_neighbors: usize, n: usize },

    #[error("k = {k} is invalid for {n} points")]
    KTooLarge { k: usize, n: usize },

    #[error("cluster {cluster_id} too small: {target} target rows, {background} background rows")]
    ClusterTooSmall {
        cluster_id: usize,
        target: usize,
        background: usize,
    },

    #[error("only one populated cluster; contrastive characterization needs at least two")]
    SingleCluster,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing input file {0}")]
    MissingInput(PathBuf),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the input data or configuration rather than
    /// by a failure inside the pipeline itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MalformedRow { .. }
                | Error::UnknownStation { .. }
                | Error::NegativeConcentration { .. }
                | Error::DuplicateSample { .. }
                | Error::MissingInput(_)
                | Error::InvalidConfig(_)
                | Error::RankTooLarge { .. }
                | Error::KTooLarge { .. }
                | Error::TooFewStations { .. }
                | Error::BadNeighborCount { .. }
                | Error::InvalidTensor(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
