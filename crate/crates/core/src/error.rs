use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-supplied configuration (bandwidth, grid, cluster counts, ...).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input file. `row` is the 1-based data row (header excluded).
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    /// A value lies outside the domain of a transform.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input carries no usable variation (identical vectors, identical points).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("cluster {0} received zero total weight")]
    EmptyCluster(usize),

    #[error("clustering failed: {0}")]
    ClusteringFailed(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 config, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Parse { .. } | Error::Shape(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 3,
            Error::Domain(_) | Error::Degenerate(_) => 3,
            Error::EmptyCluster(_) | Error::ClusteringFailed(_) | Error::Simulation(_) => 4,
        }
    }
}
