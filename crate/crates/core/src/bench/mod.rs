//! Configuration, persistence and the reproduction harness behind the CLI.

mod config;
mod figure;
pub mod io;
mod montecarlo;
mod pipeline;

pub use config::BenchConfig;
pub use figure::{cmd_figure1, figure_runs, FigureRuns, FigureSummary};
pub use io::{load_matrix_file, save_matrix_file, MatrixDocument};
pub use montecarlo::{
    cmd_montecarlo, run_montecarlo, run_trial, table_csv, trial_seed, MonteCarloRow, TrialOutcome, TrialRecord,
};
pub use pipeline::{cmd_pipeline, NoiselessCheck, PipelineSummary, StageRecord};
