//! Experiment orchestration: configuration, sweeps, CSV/JSON output and plots.

mod config;
mod output;
mod plot;
mod run;

use std::path::Path;

use thiserror::Error;

pub use config::{
    DimSweepConfig, ExperimentConfig, ExperimentKind, KlSweepConfig, NetworkConfig, NnBoundsConfig, Scale,
    SingleRunConfig, TrainingConfig,
};
pub use output::{
    parse_summary_csv, summary_csv, trials_csv, write_run, SummaryTable, NN_COLUMNS, NN_SCHEMA, SUMMARY_COLUMNS,
    SUMMARY_SCHEMA, TRIALS_SCHEMA,
};
pub use plot::{figure_from_summary, render_summary_svg, render_svg, Figure, Panel, PlotPoint, Series};
pub use run::{
    run_dim_sweep, run_kl_sweep, run_nn_bounds, run_trial, single_run, trial_data, CellKey, CellSummary,
    NnBoundsRecord, NnUpperCell, Problem, Quartiles, RunRecord, TrainSummary, TrialData, TrialOutput, TrialRecord,
    TrialStatus, REFERENCE_DRAWS, SCHEMA_VERSION,
};

use crate::analysis::AnalysisError;
use crate::autodiff::AutodiffError;
use crate::synthdata::DataError;
use crate::trainer::TrainError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("no completed trials in cell {cell}: {detail}")]
    EmptyCell { cell: String, detail: String },
    #[error("synthdata: {0}")]
    Data(#[from] DataError),
    #[error("trainer: {0}")]
    Train(#[from] TrainError),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("autodiff: {0}")]
    Autodiff(#[from] AutodiffError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Process exit code: 2 for configuration errors, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 3,
        }
    }
}

/// Re-renders the SVG for a summary CSV file.
pub fn plot_file(summary: &Path, svg: &Path) -> Result<(), BenchError> {
    let text = std::fs::read_to_string(summary)
        .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", summary.display())))?;
    std::fs::write(svg, render_summary_svg(&parse_summary_csv(&text)?)?)?;
    Ok(())
}
