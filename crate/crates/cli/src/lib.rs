//! Experiment harness for the `noma-isac` beamforming library: scenario
//! files, single solves, weight sweeps, Monte-Carlo campaigns and
//! beampattern export.
//!
//! Every output is deterministic. Channels come from counter-based
//! substreams of a master seed, rows are written in a fixed order and
//! wall-clock time is only recorded on request.

pub mod campaign;
pub mod config;
pub mod error;
pub mod format;
pub mod report;

pub use campaign::{
    export_beampattern, montecarlo, run_montecarlo, run_solve, run_sweep, solve_scenario, sweep, RunOptions, SweepSpec,
    TrialRecord, DEFAULT_TRIALS, DEFAULT_WEIGHTS,
};
pub use config::{load_config, parse_config, RateSpec, ScenarioFile};
pub use error::{status_exit_code, HarnessError};
pub use report::RunReport;
