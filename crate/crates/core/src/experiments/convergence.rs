//! Empirical check of the convergence bound on a noisy quadratic.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::bound::{corollary_xi, plain_sgd_bound, theoretical_bound, BoundInputs, BoundTerms};
use crate::pipeline::{run_training, RunConfig, StepSchedule};
use crate::predict::PredictorKind;
use crate::problems::{Problem, ProblemSpec};
use crate::quantize::QuantizerSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub seed: u64,
    pub iterations: usize,
    pub workers: usize,
    pub step_size: f64,
    pub distortion: f64,
    /// `min_t ‖∇f(w_t)‖²` over `t = 0 .. T−1`, from exact gradients.
    pub empirical_min: f64,
    pub bound: BoundTerms,
    pub plain_sgd_bound: f64,
    pub within_bound: bool,
}

/// A config in the bound's setting: no momentum, error feedback, dithered
/// quantizer of step `delta` (or lossless when `None`), zero predictor.
pub fn convergence_config(
    dim: usize,
    workers: usize,
    iterations: usize,
    sigma2: f64,
    delta: Option<f64>,
    seed: u64,
) -> RunConfig {
    let q = match delta {
        Some(step) => QuantizerSpec::DitheredUniform { step },
        None => QuantizerSpec::Passthrough,
    };
    let mut c = RunConfig::new(dim, q);
    c.workers = workers;
    c.iterations = iterations;
    c.beta = 0.0;
    c.error_feedback = true;
    c.predictor = PredictorKind::Zero;
    c.problem = ProblemSpec::quadratic(sigma2);
    c.seed = seed;
    c
}

/// Run `config` with the step size `η = c/(L√T)` and compare against the
/// bound. `ξ = T^{1/4}` for the dithered quantizer; the lossless case uses
/// `ξ = ∞`, which is plain SGD. The step schedule in `config` is replaced.
pub fn run_convergence(config: &RunConfig) -> Result<ConvergenceReport> {
    if config.beta != 0.0 || !config.error_feedback {
        return Err(Error::Unsupported("the bound needs beta = 0 and error feedback".into()));
    }
    if config.predictor != PredictorKind::Zero {
        return Err(Error::Unsupported("the bound is stated for the zero predictor".into()));
    }
    let (distortion, xi) = match config.quantizer {
        QuantizerSpec::DitheredUniform { step } => {
            let step = step as f32 as f64;
            (config.dim as f64 * step * step / 12.0, corollary_xi(config.iterations))
        }
        QuantizerSpec::Passthrough => (0.0, f64::INFINITY),
        other => {
            return Err(Error::Unsupported(format!(
                "the bound needs a bounded-distortion quantizer, got {}",
                other.name()
            )))
        }
    };
    let ProblemSpec::NoisyQuadratic { sigma2, .. } = config.problem else {
        return Err(Error::Unsupported("the bound check runs on the noisy quadratic".into()));
    };
    let problem = config.problem.build(config.dim, config.seed)?;
    let Problem::Quadratic(q) = &problem else {
        unreachable!("quadratic spec builds a quadratic problem");
    };
    let w0 = problem.initial_point();
    let inputs = BoundInputs {
        iterations: config.iterations,
        smoothness: q.smoothness(),
        gap: q.value(&w0) - q.optimum_value(),
        sigma2,
        workers: config.workers,
        distortion,
        xi,
    };
    let bound = theoretical_bound(&inputs)?;
    let step_size = inputs.step_size();

    let mut run = config.clone();
    run.schedule = StepSchedule::constant(step_size);
    run.record_objective = true;
    let out = run_training(&run)?;
    let empirical_min = out
        .rows
        .iter()
        .filter(|r| r.worker == 0)
        .filter_map(|r| r.grad_norm_sq)
        .fold(f64::INFINITY, f64::min);
    Ok(ConvergenceReport {
        seed: config.seed,
        iterations: config.iterations,
        workers: config.workers,
        step_size,
        distortion,
        empirical_min,
        within_bound: empirical_min <= bound.total,
        plain_sgd_bound: plain_sgd_bound(&inputs)?,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_run_within_plain_sgd_bound() {
        let r = run_convergence(&convergence_config(20, 2, 400, 1.0, None, 3)).unwrap();
        assert_eq!(r.distortion, 0.0);
        assert!((r.bound.total - r.plain_sgd_bound).abs() < 1e-15);
        assert!(r.empirical_min <= r.plain_sgd_bound);
        assert!(r.within_bound);
    }

    #[test]
    fn dithered_run_within_bound() {
        let r = run_convergence(&convergence_config(20, 2, 400, 1.0, Some(0.2), 3)).unwrap();
        assert!(r.distortion > 0.0 && r.bound.b > 0.0);
        assert!(r.within_bound, "{r:?}");
        assert!(r.bound.corollary.is_some());
    }

    #[test]
    fn premises_enforced() {
        let mut c = convergence_config(10, 1, 10, 1.0, Some(0.1), 0);
        c.beta = 0.5;
        assert!(matches!(run_convergence(&c), Err(Error::Unsupported(_))));
        let mut c = convergence_config(10, 1, 10, 1.0, Some(0.1), 0);
        c.quantizer = QuantizerSpec::TopK { k: 2 };
        assert!(matches!(run_convergence(&c), Err(Error::Unsupported(_))));
        let mut c = convergence_config(10, 1, 10, 1.0, Some(0.1), 0);
        c.problem = ProblemSpec::GaussianStream;
        assert!(matches!(run_convergence(&c), Err(Error::Unsupported(_))));
    }
}
