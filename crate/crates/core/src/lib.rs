//! Predictive coding of momentum-SGD updates for distributed training.
//!
//! Each worker low-pass filters its gradients with momentum, subtracts a
//! prediction of what it is about to send, quantizes the residual and
//! entropy-codes it. The master runs a matching decoder and predictor per
//! worker, so both ends stay in lockstep from the quantized stream alone.
//!
//! The crate is organised bottom-up: [`vector`] and [`rng`] hold the
//! numeric plumbing, [`quantize`], [`predict`] and [`codec`] the link
//! components, [`pipeline`] the worker and master state machines, and
//! [`experiments`] the reproducible runners used by the CLI.

pub mod codec;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod pipeline;
pub mod predict;
pub mod problems;
pub mod quantize;
pub mod rng;
pub mod vector;

pub use error::{Error, Result};
pub use metrics::MetricsRow;
pub use pipeline::{run_training, RunConfig, StepSchedule};
pub use predict::{EstKState, PredictorKind, PredictorSpec};
pub use problems::ProblemSpec;
pub use quantize::QuantizerSpec;
pub use rng::RngStream;
pub use vector::{ParamVector, SparseUpdate};
