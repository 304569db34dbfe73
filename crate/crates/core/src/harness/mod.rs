//! Training loop and experiment drivers: batch-size sweeps, component
//! ablations, the width-telescoping search, the convergence-rate check and
//! CSV/SVG report emission.

mod ablate;
mod config;
mod msign_check;
mod parallel;
mod rate;
mod report;
pub mod svg;
mod sweep;
mod telescope;
mod train;

pub use ablate::{
    ablate, ablate_with, ablation_cells, emit_ablation_reports, AblationCell, AblationRow,
    AblationSpec, AblationTable, ABLATION_HEADER, FULL_CELL,
};
pub use config::{Precision, ScheduleConfig, StopRule, TrainConfig};
pub use msign_check::{msign_check, trial_seed, MsignCheckReport, BAND};
pub use parallel::{run_cells, worker_threads, THREADS_ENV};
pub use rate::{least_squares_slope, rate_check, rate_check_config, rate_slope, MIN_RATE_ROWS};
pub use report::{
    fmt_f64, parse_run_csv, read_run_csv, run_csv_string, summary_csv_string, write_atomic,
    write_run_csv, write_summary_csv, RunCsv, RUN_HEADER, SUMMARY_HEADER,
};
pub use sweep::{
    batch_sweep, batch_sweep_with, emit_sweep_reports, ratio_points, token_ratio,
    MonotonicityReport, RatioPoint, SweepCell, SweepResult, SweepSpec, TuningPoint,
};
pub use telescope::{
    emit_telescope_reports, log2_grid, telescope_sweep, telescope_sweep_with, TelescopeCell,
    TelescopeResult, TelescopeSpec, TelescopeStage, TELESCOPE_HEADER,
};
pub use train::{
    first_crossing, loss_spike_count, trailing_mean, train, train_on, EvalRow, RunRecord,
    RunSummary,
};
