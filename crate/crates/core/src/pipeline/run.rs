use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::MetricsRow;
use crate::pipeline::config::RunConfig;
use crate::pipeline::master::MasterState;
use crate::pipeline::worker::WorkerState;
use crate::problems::Problem;
use crate::rng::{streams, RngStream};
use crate::vector::ParamVector;

/// What one synchronized round produced.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub t: usize,
    pub eta: f64,
    /// Parameters the gradients were taken at.
    pub params: ParamVector,
    /// Gradient each worker computed this round.
    pub gradients: Vec<ParamVector>,
    /// `mean(r̃ᵢ)` as applied by the master.
    pub update: ParamVector,
    pub rows: Vec<MetricsRow>,
}

/// A training run advanced one round at a time.
pub struct Simulation {
    config: RunConfig,
    problem: Problem,
    workers: Vec<WorkerState>,
    grad_rngs: Vec<RngStream>,
    master: MasterState,
    pool: Option<rayon::ThreadPool>,
    t: usize,
}

impl Simulation {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let problem = config.problem.build(config.dim, config.seed)?;
        let layout = config.layout()?;
        let spec = config.predictor_spec();
        let workers = (0..config.workers)
            .map(|i| {
                WorkerState::new(
                    i,
                    config.dim,
                    spec,
                    config.quantizer,
                    config.error_feedback,
                    &layout,
                    config.seed,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let grad_rngs = (0..config.workers)
            .map(|i| RngStream::with_stream(config.seed, streams::gradient(i)))
            .collect();
        let master = MasterState::new(
            problem.initial_point(),
            config.workers,
            spec,
            config.quantizer,
            &layout,
            config.seed,
        )?;
        let pool = match config.threads {
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidState(format!("thread pool: {e}")))?,
            ),
            None => None,
        };
        Ok(Simulation {
            config: config.clone(),
            problem,
            workers,
            grad_rngs,
            master,
            pool,
            t: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn workers(&self) -> &[WorkerState] {
        &self.workers
    }

    pub fn master(&self) -> &MasterState {
        &self.master
    }

    pub fn params(&self) -> &ParamVector {
        self.master.params()
    }

    /// Rounds completed so far.
    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn finished(&self) -> bool {
        self.t >= self.config.iterations
    }

    /// Run one round: every worker computes a gradient at the current
    /// parameters and sends its frames, then the master updates.
    pub fn step(&mut self) -> Result<StepReport> {
        if self.finished() {
            return Err(Error::InvalidState(format!(
                "run already completed {} iterations",
                self.config.iterations
            )));
        }
        let t = self.t;
        let eta = self.config.schedule.rate(t);
        let w = self.master.params().clone();

        let (loss, grad_norm_sq) = if self.config.record_objective {
            (
                self.problem.loss(&w),
                self.problem.full_gradient(&w).map(|g| g.norm_sq()),
            )
        } else {
            (None, None)
        };

        let problem = &self.problem;
        let work = |(worker, rng): (&mut WorkerState, &mut RngStream)| {
            let g = problem.stochastic_gradient(&w, rng)?;
            let frames = worker.step(&g, eta)?;
            Ok((g, frames))
        };
        let pairs = self.workers.iter_mut().zip(self.grad_rngs.iter_mut());
        let results: Vec<Result<_>> = match &self.pool {
            Some(pool) => pool.install(|| pairs.collect::<Vec<_>>().into_par_iter().map(work).collect()),
            None => pairs.collect::<Vec<_>>().into_par_iter().map(work).collect(),
        };
        let (gradients, frames): (Vec<_>, Vec<_>) = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();

        let update = self.master.step(&frames, eta)?;

        let d = self.config.dim as f64;
        let trace = self.config.trace_component;
        let rows = self
            .workers
            .iter()
            .map(|worker| {
                let rec = worker.last_step().expect("worker stepped this round");
                MetricsRow {
                    t,
                    worker: worker.id(),
                    loss,
                    grad_norm_sq,
                    mse: rec.e.norm_sq() / d,
                    frame_bits: rec.frame_bits,
                    analytic_bits: rec.analytic_bits,
                    trace_v: trace.map(|j| rec.v[j]),
                    trace_u: trace.map(|j| rec.u[j]),
                    trace_uq: trace.map(|j| rec.u_tilde[j]),
                    trace_rhat: trace.map(|j| rec.r_hat[j]),
                }
            })
            .collect();
        self.t += 1;
        Ok(StepReport {
            t,
            eta,
            params: w,
            gradients,
            update,
            rows,
        })
    }
}

/// Rows plus the final parameters of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    pub final_params: ParamVector,
}

/// Run every round of `config` and collect the metrics.
pub fn run_training(config: &RunConfig) -> Result<RunOutput> {
    run_training_with(config, |_, _| Ok(()))
}

/// Like [`run_training`], calling `observe` after each round.
pub fn run_training_with<F>(config: &RunConfig, mut observe: F) -> Result<RunOutput>
where
    F: FnMut(&Simulation, &StepReport) -> Result<()>,
{
    let mut sim = Simulation::new(config)?;
    let mut rows = Vec::with_capacity(config.iterations * config.workers);
    while !sim.finished() {
        let mut report = sim.step()?;
        observe(&sim, &report)?;
        rows.append(&mut report.rows);
    }
    Ok(RunOutput {
        rows,
        final_params: sim.params().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::StepSchedule;
    use crate::predict::PredictorKind;
    use crate::problems::ProblemSpec;
    use crate::quantize::QuantizerSpec;

    fn quadratic_config(q: QuantizerSpec) -> RunConfig {
        let mut c = RunConfig::new(12, q);
        c.problem = ProblemSpec::quadratic(0.5);
        c.iterations = 60;
        c.workers = 3;
        c.seed = 21;
        c
    }

    #[test]
    fn passthrough_matches_plain_sgd() {
        let mut c = quadratic_config(QuantizerSpec::Passthrough);
        c.beta = 0.0;
        c.schedule = StepSchedule::constant(0.3);
        let out = run_training(&c).unwrap();

        let problem = c.problem.build(c.dim, c.seed).unwrap();
        let mut rngs: Vec<_> = (0..c.workers)
            .map(|i| RngStream::with_stream(c.seed, streams::gradient(i)))
            .collect();
        let mut w = problem.initial_point();
        for _ in 0..c.iterations {
            let grads: Vec<_> = rngs
                .iter_mut()
                .map(|r| problem.stochastic_gradient(&w, r).unwrap())
                .collect();
            w.axpy(-0.3, &ParamVector::mean_of(&grads).unwrap()).unwrap();
        }
        for j in 0..c.dim {
            assert!((out.final_params[j] - w[j]).abs() <= 1e-12);
        }
        assert!(out.rows.iter().all(|r| r.mse == 0.0));
    }

    #[test]
    fn quadratic_descent_without_noise_is_monotone() {
        let mut c = quadratic_config(QuantizerSpec::Passthrough);
        c.problem = ProblemSpec::quadratic(0.0);
        c.beta = 0.5;
        c.schedule = StepSchedule::constant(0.05);
        c.iterations = 200;
        let out = run_training(&c).unwrap();
        let losses: Vec<f64> = out.rows.iter().filter(|r| r.worker == 0).map(|r| r.loss.unwrap()).collect();
        assert!(losses.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn runs_are_deterministic_across_thread_counts() {
        let mut c = quadratic_config(QuantizerSpec::TopKQ { k: 3 });
        c.predictor = PredictorKind::EstK;
        c.error_feedback = true;
        c.trace_component = Some(2);
        let a = run_training(&c).unwrap();
        c.threads = Some(1);
        let b = run_training(&c).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.final_params, b.final_params);
    }

    #[test]
    fn metrics_are_recorded() {
        let mut c = quadratic_config(QuantizerSpec::TopK { k: 2 });
        c.trace_component = Some(0);
        let out = run_training(&c).unwrap();
        assert_eq!(out.rows.len(), c.iterations * c.workers);
        for (i, r) in out.rows.iter().enumerate() {
            assert_eq!(r.t, i / c.workers);
            assert_eq!(r.worker, i % c.workers);
            assert!(r.frame_bits > 0 && r.analytic_bits.unwrap() > 0.0);
            assert!(r.trace_v.is_some() && r.loss.is_some());
        }
    }

    #[test]
    fn step_past_end_is_an_error() {
        let mut c = quadratic_config(QuantizerSpec::ScaledSign);
        c.iterations = 1;
        let mut sim = Simulation::new(&c).unwrap();
        sim.step().unwrap();
        assert!(matches!(sim.step(), Err(Error::InvalidState(_))));
    }
}
