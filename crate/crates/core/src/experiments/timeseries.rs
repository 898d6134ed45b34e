//! Single-worker traces of one component on the Gaussian gradient stream.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsRow;
use crate::pipeline::{run_training, RunConfig, StepSchedule};
use crate::predict::PredictorKind;
use crate::problems::ProblemSpec;
use crate::quantize::QuantizerSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesSpec {
    pub dim: usize,
    pub quantizer: QuantizerSpec,
    pub beta: f64,
    pub iterations: usize,
    pub predictor: PredictorKind,
    pub seed: u64,
    pub component: usize,
}

impl TimeseriesSpec {
    pub fn new(beta: f64, predictor: PredictorKind, seed: u64) -> Self {
        TimeseriesSpec {
            dim: 1000,
            quantizer: QuantizerSpec::TopK { k: 10 },
            beta,
            iterations: 1000,
            predictor,
            seed,
            component: 0,
        }
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        if !matches!(self.quantizer, QuantizerSpec::TopK { .. }) {
            return Err(Error::Unsupported(format!(
                "time series needs the top-k quantizer, got {}",
                self.quantizer.name()
            )));
        }
        let mut c = RunConfig::new(self.dim, self.quantizer);
        c.beta = self.beta;
        c.iterations = self.iterations;
        c.predictor = self.predictor;
        c.error_feedback = true;
        // Constant step, so the feedback scaling is 1 after the first round.
        c.schedule = StepSchedule::constant(1.0);
        c.problem = ProblemSpec::GaussianStream;
        c.seed = self.seed;
        c.trace_component = Some(self.component);
        c.record_objective = false;
        Ok(c)
    }
}

/// Rows with `trace_v`, `trace_u`, `trace_uq` and `trace_rhat` filled in.
pub fn run_timeseries(spec: &TimeseriesSpec) -> Result<Vec<MetricsRow>> {
    Ok(run_training(&spec.run_config()?)?.rows)
}

/// Coefficient of variation of the gaps between rounds where `ũ[j] ≠ 0`.
/// `None` with fewer than two gaps.
pub fn peak_interval_cv(rows: &[MetricsRow]) -> Option<f64> {
    let peaks: Vec<usize> = rows
        .iter()
        .filter(|r| r.trace_uq.is_some_and(|x| x != 0.0))
        .map(|r| r.t)
        .collect();
    let gaps: Vec<f64> = peaks.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    if gaps.len() < 2 {
        return None;
    }
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
    Some(var.sqrt() / mean)
}

/// `max |u_t[j]|` over rounds `from..=to`.
pub fn max_abs_residual(rows: &[MetricsRow], from: usize, to: usize) -> f64 {
    rows.iter()
        .filter(|r| (from..=to).contains(&r.t))
        .filter_map(|r| r.trace_u)
        .fold(0.0, |m, x| m.max(x.abs()))
}
