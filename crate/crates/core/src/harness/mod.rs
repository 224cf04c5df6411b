//! Datasets, the active-learning experiment loop, aggregation, output files
//! and the verification suite behind the command-line tool.

pub mod aggregate;
pub mod config;
pub mod datasets;
pub mod experiment;
pub mod output;
pub mod verify;

pub use aggregate::{aggregate, Aggregate, RoundAggregate, Stat};
pub use config::{ExperimentConfig, Metric, NetworkSpec, SweepConfig};
pub use datasets::{Dataset, DatasetSpec};
pub use experiment::{run_active_learning, run_seed, split_dataset, RoundRecord, RunResult, SeedOutcome, Split};
pub use output::{summary_json, write_outputs, write_records, RECORDS_HEADER};
pub use verify::{verify_suite, CheckResult, Scale, VerifyReport};
