//! Experiment driver: repeated stratified splits, every configured
//! treatment/model pair, and deterministic report files.

mod config;
mod report;
mod run;

pub use config::{ExperimentConfig, KernelName, Method, ModelKind};
pub use report::{
    aggregate, emit_reports, read_cell_report, AggregateRow, Extractor, MetricSummary,
    AGGREGATE_METRICS,
};
pub use run::{
    augment_seed, model_seed, run_experiment, run_experiment_on, CellReport, CellResult,
    DatasetSummary, ExperimentResults,
};
