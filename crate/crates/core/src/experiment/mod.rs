//! Config-driven experiments: parse a TOML config, run one operation, append
//! the result to a JSON-lines ledger and emit CSV tables.

pub mod config;
pub mod fields;
pub mod ledger;
pub mod ops;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, FieldSpec, Operation, ParamTuple, Settings, TolProfile, Tolerance};
pub use ledger::{read_ledger, OutputValue, ResultRecord};
pub use report::report;
pub use runner::{run_config, run_experiment, RunContext};
