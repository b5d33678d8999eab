//! Monte Carlo harness, deterministic verifiers and report persistence.

mod appendix_b;
mod concentration;
mod config;
mod report;
mod runners;

pub use appendix_b::{
    random_appendix_b_sweep, verify_appendix_b, xi_grid, AppendixBTable, BoundCheck, BoundFamily,
    ROUNDING_SLACK,
};
pub use concentration::{concentration_deviation, run_concentration_experiment, ConcentrationSummary};
pub use config::{
    read_spectrum_file, ExperimentConfig, ExperimentType, KindConfig, MRule, SpectrumSource, ThetaSpec, Thresholds,
    CROSS_VALIDATE_MAX_N,
};
pub use report::{
    coverage_at, read_report, report_paths, write_csv, write_report, Aggregates, ExperimentReport, OutlierRecord,
    ThetaCoverage, TrialRecord, W1Summary, REPORT_SCHEMA,
};
pub use runners::{
    cross_validate, draw_thetas, run_eigenvector_experiment, run_experiment, run_location_experiment,
    run_pushforward_experiment, DEGENERACY_TOL, MAX_FAILED_FRACTION,
};
