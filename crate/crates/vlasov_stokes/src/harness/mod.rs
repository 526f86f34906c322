//! Scenario configuration, the end-to-end pipeline, output files and self-checks.

mod config;
mod families;
mod output;
mod run;
mod verify;

pub use config::{Family, ScenarioConfig, OUTPUT_ENV};
pub use families::{data_report, sample_family, scaled_to_mass, scaled_to_weighted_norm, DataReport};
pub use output::{
    emit_outputs, plot_csv, CONFIG_TXT, CONSTANTS_TXT, CONTROL_SERIES, FINAL_SNAPSHOT, ITERATIONS_CSV, MOMENTS_CSV, PLOT_CSV,
    SUMMARY_TXT,
};
pub use run::{
    build_reference, full_state, reference_settings, region_of, run_scenario, run_scenario_with, run_two_phase, RunResults, RunSummary,
    TwoPhaseSummary,
};
pub use verify::{run_suite, CheckLine, SUITES};
