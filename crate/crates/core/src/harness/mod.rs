//! Multi-seed experiment runner.
//!
//! A run trains one fresh agent per seed for a frame budget, split into
//! epochs. Each epoch reports the average and peak score of the episodes that
//! *ended* in it (episodes are never cut at an epoch boundary) and the total
//! buffer size at its end. Results go to one CSV per seed plus an aggregate
//! CSV with the mean and standard error across seeds.

mod config;
mod csv_out;
mod experiment;
mod inspect;
mod plot;

pub use config::{parse_config, EnvKind, ExperimentConfig, RunArgs};
pub use csv_out::{format_real, AggregateRow, AGGREGATE_HEADER, SEED_HEADER};
pub use experiment::{run_experiment, run_seed, EpochRecord, ExperimentReport, SeedRun};
pub use inspect::describe_snapshot;
pub use plot::{emit_plots, Metric};
