//! Seeded experiment runner for DisCo and UcbExplore: exact scoring of returned policies,
//! AX-objective checks, confidence intervals and CSV tables.

pub mod experiment;
pub mod output;
pub mod stats;
pub mod verify;

pub use experiment::{run_experiment, Algorithm, EnvSpec, ExperimentSpec, RunRecord, Tunings};
pub use output::{read_runs, read_runs_file, write_csv, CsvKind};
pub use stats::{aggregate, mean_ci, SummaryRow};
pub use verify::{verify_ax, AxFlags, AxOracle};
