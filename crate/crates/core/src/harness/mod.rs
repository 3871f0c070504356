//! Text configs, runs, sweeps, log comparison and the stability and bound
//! reports behind the command-line tool.

mod compare;
mod config;
mod reports;
mod run;
mod sweep;

pub use compare::{compare, compare_csv, parse_compare_csv, CompareRow};
pub use config::{BatchSize, Budget, DataSpec, Generator, ProblemSpec, RunConfig};
pub use reports::{bounds_report, stability_report, BoundsReport, StabilityReport};
pub use run::{
    execute, output_root, persist, prepare, run, EvalRecord, Prepared, RunLog, CHECKPOINT_FILE, LOG_COLUMNS, LOG_FILE,
};
pub use sweep::{mean_std, summarize, sweep, window_best, ConfigSummary, SummaryRow, SweepSummary, DEFAULT_WINDOWS};
