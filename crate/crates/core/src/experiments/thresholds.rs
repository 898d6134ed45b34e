//! Calibration constants for the synthetic-experiment checks.

/// Est-K peak residual must be at most this fraction of the zero-predictor one.
pub const ESTK_PEAK_RATIO: f64 = 0.7;

/// With feedback and the linear predictor, `‖e_100‖²` must exceed `‖e_10‖²`
/// by at least this factor.
pub const EF_GROWTH_FACTOR: f64 = 10.0;

/// Without feedback, the late maximum of `‖e_t‖²` may exceed the early
/// median by at most this factor.
pub const NO_EF_BOUNDED_FACTOR: f64 = 3.0;

/// Est-K final-quarter MSE must be at most this fraction of the
/// zero-predictor value.
pub const MSE_REDUCTION_RATIO: f64 = 0.5;
