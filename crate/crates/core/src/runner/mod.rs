//! Experiment orchestration: flat dotted-key JSON configs, seed sweeps on
//! a bounded worker pool, JSONL/CSV outputs and comparison tables.

mod config;
mod exec;
mod report;

pub use config::{
    unflatten, AttackSettings, ExperimentConfig, Grid, Scheme, SelfTrainSettings, ALPHA2_GRID, DATA_DIR_ENV,
};
pub use exec::{
    aggregate, attack_cache_path, build_attack_cache, cached_attacks, evaluation_targets, mean, read_records,
    run_experiment, run_seed, run_seeds, sample_std, write_outputs, AggregateReport, AggregateRow, RunRecord,
};
pub use report::{format_table, read_rows};
