//! Momentum applied at the master instead of the workers.
//!
//! Workers quantize raw gradients (momentum 0, zero predictor, optional error
//! feedback) and the master filters each worker's reconstruction with its own
//! momentum `β̃`. Each row compares that filtered vector with the momentum
//! the master would hold without compression, and with a closed-form
//! expression for the gap written in terms of the workers' quantization
//! errors alone.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pipeline::config::RunConfig;
use crate::pipeline::master::MasterState;
use crate::pipeline::worker::WorkerState;
use crate::predict::{check_beta, PredictorKind, PredictorSpec};
use crate::rng::{streams, RngStream};
use crate::vector::ParamVector;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumRow {
    pub t: usize,
    pub worker: usize,
    pub ef: bool,
    /// `‖ṽ_t − v_t‖²` against the uncompressed master momentum.
    pub deviation: f64,
    /// The same quantity rebuilt from the error history.
    pub oracle: f64,
}

/// Gap predicted without feedback: `‖(1−β̃) Σ_{k≤t} β̃^{t−k} e_k‖²`.
pub fn open_loop_gap(errors: &[ParamVector], master_beta: f64) -> Result<f64> {
    let last = errors.last().ok_or_else(|| Error::InvalidInput("empty error history".into()))?;
    let t = errors.len() - 1;
    let mut acc = ParamVector::zeros(last.dim())?;
    for (k, e) in errors.iter().enumerate() {
        acc.axpy(master_beta.powi((t - k) as i32), e)?;
    }
    Ok(acc.scale(1.0 - master_beta).norm_sq())
}

/// Gap predicted with feedback and a constant step:
/// `‖−(1−β̃) e_t + (1−β̃)² Σ_{k<t} β̃^{t−k−1} e_k‖²`.
pub fn closed_loop_gap(errors: &[ParamVector], master_beta: f64) -> Result<f64> {
    let last = errors.last().ok_or_else(|| Error::InvalidInput("empty error history".into()))?;
    let t = errors.len() - 1;
    let c = 1.0 - master_beta;
    let mut acc = last.scale(-c);
    for (k, e) in errors[..t].iter().enumerate() {
        acc.axpy(c * c * master_beta.powi((t - k - 1) as i32), e)?;
    }
    Ok(acc.norm_sq())
}

/// Run the master-momentum system with error feedback off and on, from the
/// same seed, and report the momentum gap of every worker at every round.
///
/// The worker momentum and predictor settings in `config` are ignored. The
/// step size must be constant.
pub fn master_momentum_sim(config: &RunConfig, master_beta: f64) -> Result<Vec<MomentumRow>> {
    check_beta(master_beta).map_err(|e| Error::config("master_beta", e.to_string()))?;
    let mut base = config.clone();
    base.beta = 0.0;
    base.predictor = PredictorKind::Zero;
    base.validate()?;
    if base.schedule.decay_every.is_some() && base.schedule.decay_factor != 1.0 {
        return Err(Error::Unsupported("master momentum needs a constant step size".into()));
    }
    let mut rows = Vec::with_capacity(2 * base.iterations * base.workers);
    for ef in [false, true] {
        base.error_feedback = ef;
        rows.extend(run_one(&base, master_beta)?);
    }
    Ok(rows)
}

fn run_one(config: &RunConfig, master_beta: f64) -> Result<Vec<MomentumRow>> {
    let n = config.workers;
    let d = config.dim;
    let problem = config.problem.build(d, config.seed)?;
    let layout = config.layout()?;
    let spec = PredictorSpec::new(PredictorKind::Zero, 0.0)?;
    let mut workers = (0..n)
        .map(|i| WorkerState::new(i, d, spec, config.quantizer, config.error_feedback, &layout, config.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut rngs: Vec<_> = (0..n)
        .map(|i| RngStream::with_stream(config.seed, streams::gradient(i)))
        .collect();
    let mut w = problem.initial_point();
    let mut chains = MasterState::new(w.clone(), n, spec, config.quantizer, &layout, config.seed)?;
    let mut filtered = vec![ParamVector::zeros(d)?; n];
    let mut ideal = vec![ParamVector::zeros(d)?; n];
    let mut errors: Vec<Vec<ParamVector>> = vec![Vec::with_capacity(config.iterations); n];
    let mut rows = Vec::with_capacity(config.iterations * n);

    for t in 0..config.iterations {
        let eta = config.schedule.rate(t);
        let mut frames = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(n);
        for (worker, rng) in workers.iter_mut().zip(rngs.iter_mut()) {
            let g = problem.stochastic_gradient(&w, rng)?;
            frames.push(worker.step(&g, eta)?);
            grads.push(g);
        }
        let received = chains.receive(&frames)?;
        for i in 0..n {
            filtered[i] = filtered[i].scale(master_beta);
            filtered[i].axpy(1.0 - master_beta, &received[i])?;
            ideal[i] = ideal[i].scale(master_beta);
            ideal[i].axpy(1.0 - master_beta, &grads[i])?;
            errors[i].push(workers[i].error().clone());
            let oracle = if config.error_feedback {
                closed_loop_gap(&errors[i], master_beta)?
            } else {
                open_loop_gap(&errors[i], master_beta)?
            };
            rows.push(MomentumRow {
                t,
                worker: i,
                ef: config.error_feedback,
                deviation: filtered[i].sub(&ideal[i])?.norm_sq(),
                oracle,
            });
        }
        let step = ParamVector::mean_of(&filtered)?;
        w.axpy(-eta, &step)?;
        if !w.is_finite() {
            return Err(Error::Numeric("parameters"));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::StepSchedule;
    use crate::problems::ProblemSpec;
    use crate::quantize::QuantizerSpec;

    fn config(q: QuantizerSpec) -> RunConfig {
        let mut c = RunConfig::new(40, q);
        c.problem = ProblemSpec::quadratic(1.0);
        c.iterations = 120;
        c.workers = 2;
        c.schedule = StepSchedule::constant(0.1);
        c.seed = 8;
        c
    }

    #[test]
    fn lossless_has_no_gap() {
        let rows = master_momentum_sim(&config(QuantizerSpec::Passthrough), 0.9).unwrap();
        assert!(rows.iter().all(|r| r.deviation == 0.0 && r.oracle == 0.0));
        assert_eq!(rows.len(), 2 * 120 * 2);
    }

    #[test]
    fn gaps_match_error_oracles() {
        let rows = master_momentum_sim(&config(QuantizerSpec::TopK { k: 3 }), 0.9).unwrap();
        for r in &rows {
            let tol = 1e-10 * r.oracle.max(1.0);
            assert!((r.deviation - r.oracle).abs() <= tol, "{r:?}");
        }
        let open: f64 = rows.iter().filter(|r| !r.ef).map(|r| r.deviation).sum();
        assert!(open > 0.0);
    }

    #[test]
    fn decaying_step_rejected() {
        let mut c = config(QuantizerSpec::TopK { k: 3 });
        c.schedule = StepSchedule {
            initial: 0.1,
            decay_every: Some(10),
            decay_factor: 0.5,
        };
        assert!(matches!(master_momentum_sim(&c, 0.9), Err(Error::Unsupported(_))));
        assert!(master_momentum_sim(&config(QuantizerSpec::ScaledSign), 1.0).is_err());
    }
}
