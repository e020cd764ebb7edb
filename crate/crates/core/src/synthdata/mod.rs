//! Synthetic problems with a closed-form density ratio.

mod io;
mod mixture;
pub mod rng;

use thiserror::Error;

pub use io::{load_dataset, read_points_csv, save_dataset, write_points_csv};
pub use mixture::{
    empirical_diag, sample_p, sample_q, sample_q_with_modes, MixtureSpec, SampleSet,
};
pub use rng::{data_rng, stream_rng, DreRng, Source, Split};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid mixture spec: {0}")]
    InvalidSpec(String),
    #[error("expected a point of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no samples")]
    Empty,
    #[error("requested {requested} rows but only {available} are available")]
    PoolTooSmall { requested: usize, available: usize },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed dataset: {0}")]
    Format(String),
}
