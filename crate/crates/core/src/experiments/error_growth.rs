//! Growth of the quantization error with the linear predictor.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pipeline::{run_training, RunConfig, StepSchedule};
use crate::predict::PredictorKind;
use crate::problems::ProblemSpec;
use crate::quantize::QuantizerSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorGrowthSpec {
    pub dim: usize,
    pub k: usize,
    pub beta: f64,
    pub iterations: usize,
    pub error_feedback: bool,
    pub seed: u64,
}

impl ErrorGrowthSpec {
    pub fn new(error_feedback: bool, seed: u64) -> Self {
        ErrorGrowthSpec {
            dim: 1000,
            k: 10,
            beta: 0.99,
            iterations: 101,
            error_feedback,
            seed,
        }
    }

    pub fn run_config(&self) -> RunConfig {
        let mut c = RunConfig::new(self.dim, QuantizerSpec::TopKQ { k: self.k });
        c.beta = self.beta;
        c.iterations = self.iterations;
        c.predictor = PredictorKind::Linear;
        c.error_feedback = self.error_feedback;
        c.schedule = StepSchedule::constant(1.0);
        c.problem = ProblemSpec::GaussianStream;
        c.seed = self.seed;
        c.record_objective = false;
        c
    }
}

/// `‖e_t‖²` for every round, Top-K-Q quantizer and linear predictor.
pub fn run_error_growth(spec: &ErrorGrowthSpec) -> Result<Vec<f64>> {
    let d = spec.dim as f64;
    Ok(run_training(&spec.run_config())?
        .rows
        .iter()
        .map(|r| r.mse * d)
        .collect())
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
