//! End-to-end orchestration: source policies, the train → embed → select →
//! extrapolate pipeline, repeated-split experiments and their reports.

mod config;
mod experiment;
mod stages;

pub use config::{Capability, ExperimentConfig, SourcePolicy, DEFAULT_OLDEST_FRACTION};
pub use experiment::{
    aggregate_cells, emit_reports, load_cells, run_experiment, CellAggregate, CellRow, ResultTable, TargetRow,
    AGGREGATE_CSV, CELLS_CSV, EXPERIMENT_TARGETS_CSV,
};
pub use stages::{
    choose_sources, embed_stage, extrapolate_stage, prepare_repeat, run_cell, run_pipeline, select_stage,
    train_stage, write_artifacts, CellOutcome, RepeatState, SourceSplit, CORESET_JSON, EMBEDDINGS_STEM,
    NETWORK_STEM, SOURCES_JSON, SUMMARY_JSON, TARGETS_CSV, TRAIN_REPORT_JSON,
};
