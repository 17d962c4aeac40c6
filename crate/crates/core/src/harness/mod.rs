//! Chain-domain experiment runner: configuration, seed sweeps, periodic
//! evaluation, exact diagnostics and CSV output.

mod certify;
mod config;
mod report;
mod run;
mod sweep;

pub use certify::{certify, certify_params, CertificateRecord, CertifyOptions};
pub use config::{parse_seeds, RunConfig, StationarityStart};
pub use report::{
    final_return_stats, mean_stderr, parse_metrics, read_metrics, return_stats_at, stationarity_report, window_average,
    ReturnStats, StationarityReport,
};
pub use run::{
    checkpoint_times, critic_tracking, evaluation_rng, run_experiment, run_experiment_with, simulate, summary_path,
    training_rng, write_metrics, AbortRecord, Execution, ExperimentResult, MetricsRow, RunSummary, SeedOutcome,
    CSV_HEADER,
};
pub use sweep::{sweep, sweep_metrics_path, SweepResult, SweepRow};
