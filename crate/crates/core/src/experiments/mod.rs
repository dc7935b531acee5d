//! Monte Carlo experiments: configuration, trajectory simulation, the coupled
//! strong-rate study and its file outputs.

pub mod config;
pub mod rate;
pub mod report;

pub use config::{ConfigFile, KernelConfig, KernelKindConfig, ModelConfig, RateConfig};
pub use rate::{
    fit_loglog, run_rate_study, run_rate_study_with, simulate_coupled, simulate_trajectories,
    LoglogFit, RatePoint, RateReport,
};
pub use report::{dump_matrices, emit_report, write_rate_csvs, write_trajectories};
