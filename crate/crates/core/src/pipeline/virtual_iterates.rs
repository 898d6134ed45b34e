use crate::error::{Error, Result};
use crate::pipeline::config::RunConfig;
use crate::pipeline::run::run_training_with;
use crate::vector::ParamVector;

/// Per-round averages needed to rebuild the virtual sequence.
#[derive(Debug, Clone)]
pub struct History {
    pub beta: f64,
    pub error_feedback: bool,
    /// `w_0 ..= w_T`.
    pub params: Vec<ParamVector>,
    pub steps: Vec<f64>,
    pub mean_gradients: Vec<ParamVector>,
    pub mean_errors: Vec<ParamVector>,
}

/// Run `config` and keep the history.
pub fn record_history(config: &RunConfig) -> Result<History> {
    let mut history = History {
        beta: config.beta,
        error_feedback: config.error_feedback,
        params: Vec::with_capacity(config.iterations + 1),
        steps: Vec::with_capacity(config.iterations),
        mean_gradients: Vec::with_capacity(config.iterations),
        mean_errors: Vec::with_capacity(config.iterations),
    };
    run_training_with(config, |sim, report| {
        if report.t == 0 {
            history.params.push(report.params.clone());
        }
        history.params.push(sim.params().clone());
        history.steps.push(report.eta);
        history.mean_gradients.push(ParamVector::mean_of(&report.gradients)?);
        let errors: Vec<ParamVector> = sim.workers().iter().map(|w| w.error().clone()).collect();
        history.mean_errors.push(ParamVector::mean_of(&errors)?);
        Ok(())
    })?;
    Ok(history)
}

#[derive(Debug, Clone)]
pub struct VirtualIterates {
    /// `w̃_0 ..= w̃_T`.
    pub iterates: Vec<ParamVector>,
    /// Largest `‖w̃_{t+1} − (w̃_t − η_t·ḡ_t)‖ / ‖w̃_{t+1}‖` over the run.
    pub max_relative_violation: f64,
}

/// Build `w̃_{t+1} = w_{t+1} − η_t·ē_t` and measure how far it strays from
/// the uncompressed recurrence `w̃_{t+1} = w̃_t − η_t·ḡ_t`.
pub fn virtual_iterates(history: &History) -> Result<VirtualIterates> {
    if history.beta != 0.0 {
        return Err(Error::Unsupported(format!(
            "virtual iterates need beta = 0, run used {}",
            history.beta
        )));
    }
    if !history.error_feedback {
        return Err(Error::Unsupported("virtual iterates need error feedback".into()));
    }
    let rounds = history.steps.len();
    if history.params.len() != rounds + 1
        || history.mean_gradients.len() != rounds
        || history.mean_errors.len() != rounds
    {
        return Err(Error::InvalidInput("history lengths are inconsistent".into()));
    }
    let mut iterates = Vec::with_capacity(rounds + 1);
    iterates.push(history.params[0].clone());
    let mut worst = 0.0f64;
    for t in 0..rounds {
        let eta = history.steps[t];
        let mut next = history.params[t + 1].clone();
        next.axpy(-eta, &history.mean_errors[t])?;
        let mut recurrence = iterates[t].clone();
        recurrence.axpy(-eta, &history.mean_gradients[t])?;
        let gap = next.sub(&recurrence)?.norm_sq().sqrt();
        let scale = next.norm_sq().sqrt().max(recurrence.norm_sq().sqrt());
        if gap > 0.0 {
            worst = worst.max(gap / scale.max(f64::MIN_POSITIVE));
        }
        iterates.push(next);
    }
    Ok(VirtualIterates {
        iterates,
        max_relative_violation: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::StepSchedule;
    use crate::problems::ProblemSpec;
    use crate::quantize::QuantizerSpec;

    fn config(q: QuantizerSpec) -> RunConfig {
        let mut c = RunConfig::new(20, q);
        c.beta = 0.0;
        c.error_feedback = true;
        c.problem = ProblemSpec::quadratic(1.0);
        c.iterations = 200;
        c.workers = 2;
        c.schedule = StepSchedule {
            initial: 0.2,
            decay_every: Some(50),
            decay_factor: 0.5,
        };
        c
    }

    #[test]
    fn lossless_run_matches_iterates() {
        let h = record_history(&config(QuantizerSpec::Passthrough)).unwrap();
        let v = virtual_iterates(&h).unwrap();
        assert_eq!(v.iterates, h.params);
        assert_eq!(v.max_relative_violation, 0.0);
    }

    #[test]
    fn dithered_run_satisfies_recurrence() {
        let h = record_history(&config(QuantizerSpec::DitheredUniform { step: 0.1 })).unwrap();
        let v = virtual_iterates(&h).unwrap();
        assert_eq!(v.iterates[0], h.params[0]);
        assert_ne!(v.iterates[10], h.params[10]);
        assert!(v.max_relative_violation <= 1e-9, "{}", v.max_relative_violation);
    }

    #[test]
    fn momentum_runs_are_rejected() {
        let mut c = config(QuantizerSpec::Passthrough);
        c.beta = 0.9;
        c.iterations = 3;
        let h = record_history(&c).unwrap();
        assert!(matches!(virtual_iterates(&h), Err(Error::Unsupported(_))));
    }
}
