//! Experiment runners built on the pipeline.

pub mod bound;
pub mod convergence;
pub mod error_growth;
pub mod mse;
pub mod rate_table;
pub mod thresholds;
pub mod timeseries;

pub use bound::{corollary_xi, plain_sgd_bound, theoretical_bound, BoundInputs, BoundTerms};
pub use convergence::{convergence_config, run_convergence, ConvergenceReport};
pub use error_growth::{median, run_error_growth, ErrorGrowthSpec};
pub use mse::{final_quarter_mean, run_mse_comparison, MseComparison, MseRow, MseSpec};
pub use rate_table::{default_rate_configs, rate_table, RateConfig, RateRow};
pub use timeseries::{max_abs_residual, peak_interval_cv, run_timeseries, TimeseriesSpec};
