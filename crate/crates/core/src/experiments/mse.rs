//! Quantization error with and without the Est-K predictor on logistic
//! regression.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pipeline::{run_training, RunConfig, StepSchedule};
use crate::predict::PredictorKind;
use crate::problems::ProblemSpec;
use crate::quantize::QuantizerSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseSpec {
    pub dim: usize,
    pub quantizer: QuantizerSpec,
    pub beta: f64,
    pub iterations: usize,
    pub workers: usize,
    pub lr: f64,
    pub problem: ProblemSpec,
    pub seed: u64,
}

impl MseSpec {
    pub fn new(seed: u64) -> Self {
        MseSpec {
            dim: 200,
            quantizer: QuantizerSpec::TopK { k: 2 },
            beta: 0.995,
            iterations: 2000,
            workers: 4,
            lr: 0.1,
            problem: ProblemSpec::logistic(),
            seed,
        }
    }

    pub fn run_config(&self, predictor: PredictorKind) -> RunConfig {
        let mut c = RunConfig::new(self.dim, self.quantizer);
        c.beta = self.beta;
        c.iterations = self.iterations;
        c.workers = self.workers;
        c.predictor = predictor;
        c.error_feedback = true;
        c.schedule = StepSchedule::constant(self.lr);
        c.problem = self.problem;
        c.seed = self.seed;
        c.record_objective = false;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseComparison {
    /// Per-round `‖e_t‖²/d`, averaged over workers.
    pub zero: Vec<f64>,
    pub estk: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseRow {
    pub t: usize,
    pub mse_zero: f64,
    pub mse_estk: f64,
}

impl MseComparison {
    pub fn rows(&self) -> Vec<MseRow> {
        self.zero
            .iter()
            .zip(&self.estk)
            .enumerate()
            .map(|(t, (&mse_zero, &mse_estk))| MseRow { t, mse_zero, mse_estk })
            .collect()
    }
}

fn trace(spec: &MseSpec, predictor: PredictorKind) -> Result<Vec<f64>> {
    let rows = run_training(&spec.run_config(predictor))?.rows;
    Ok(rows
        .chunks(spec.workers)
        .map(|round| round.iter().map(|r| r.mse).sum::<f64>() / spec.workers as f64)
        .collect())
}

/// Run the zero and Est-K predictors from the same seed.
pub fn run_mse_comparison(spec: &MseSpec) -> Result<MseComparison> {
    Ok(MseComparison {
        zero: trace(spec, PredictorKind::Zero)?,
        estk: trace(spec, PredictorKind::EstK)?,
    })
}

/// Mean of the last quarter of `xs` (at least one element).
pub fn final_quarter_mean(xs: &[f64]) -> f64 {
    let n = (xs.len() / 4).max(1).min(xs.len());
    xs[xs.len() - n..].iter().sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_traces_are_zero() {
        let mut s = MseSpec::new(0);
        s.quantizer = QuantizerSpec::TopK { k: s.dim };
        s.iterations = 30;
        let c = run_mse_comparison(&s).unwrap();
        assert!(c.zero.iter().chain(&c.estk).all(|&x| x < 1e-12));
    }

    #[test]
    fn repeated_runs_identical() {
        let mut s = MseSpec::new(5);
        s.iterations = 50;
        assert_eq!(run_mse_comparison(&s).unwrap(), run_mse_comparison(&s).unwrap());
    }

    #[test]
    fn quarter_mean() {
        assert_eq!(final_quarter_mean(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 3.0, 5.0]), 4.0);
        assert_eq!(final_quarter_mean(&[2.0]), 2.0);
    }
}
