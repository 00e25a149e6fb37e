//! Seeded, configuration-driven experiment runs and the acceptance suite.

pub mod acceptance;
mod config;
mod run;

pub use config::{
    parse_float_list, parse_index_list, Detection, Experiment, ExperimentConfig, COMPUTE_BUDGET,
    DEFAULT_SEED, MAX_TRIALS,
};
pub use run::{
    fmt_real, run, run_direct_contrast, run_fig1, run_fig2, run_scans, sibling_path, summarize,
    trial_rng, ErrorTable, Report, ScanReport, ScanRun, SummaryRow,
};
