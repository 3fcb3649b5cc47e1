//! Monte Carlo trials, parameter sweeps, CSV output and self-checks.

pub mod config;
pub mod results;
pub mod selftest;
pub mod sweep;
pub mod trial;

pub use config::{SolveSpec, SweepSpec, SweptParameter};
pub use results::{format_sig, read_csv, round_sig, to_csv_string, write_csv, ResultRow, CSV_HEADER};
pub use selftest::{selftest, CheckResult};
pub use sweep::{run_sweep, run_sweep_with, trial_seed};
pub use trial::{run_trial, run_trial_outcome, sample_instance, solve_instance, TrialOutcome};
