use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predict::{check_beta, PredictorKind, PredictorSpec};
use crate::problems::ProblemSpec;
use crate::quantize::QuantizerSpec;

/// Step decay schedule: `initial · factor^⌊t / every⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub initial: f64,
    pub decay_every: Option<usize>,
    pub decay_factor: f64,
}

impl StepSchedule {
    pub fn constant(eta: f64) -> Self {
        StepSchedule {
            initial: eta,
            decay_every: None,
            decay_factor: 1.0,
        }
    }

    pub fn rate(&self, t: usize) -> f64 {
        match self.decay_every {
            Some(every) if every > 0 => {
                let n = i32::try_from(t / every).unwrap_or(i32::MAX);
                self.initial * self.decay_factor.powi(n)
            }
            _ => self.initial,
        }
    }

    pub fn validate(&self, iterations: usize) -> Result<()> {
        if !(self.initial.is_finite() && self.initial > 0.0) {
            return Err(Error::config("lr", format!("must be > 0, got {}", self.initial)));
        }
        if !(self.decay_factor.is_finite() && self.decay_factor > 0.0) {
            return Err(Error::config(
                "lr_decay_factor",
                format!("must be > 0, got {}", self.decay_factor),
            ));
        }
        if self.decay_every == Some(0) {
            return Err(Error::config("lr_decay_every", "must be >= 1"));
        }
        // Underflow to zero late in a long run is also a zero step.
        if iterations > 0 && !(self.rate(iterations - 1) > 0.0) {
            return Err(Error::config("lr_decay_factor", "step size decays to zero"));
        }
        Ok(())
    }
}

/// Partition of `0..dim` into contiguous compression blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    starts: Vec<usize>,
    dim: usize,
}

impl BlockLayout {
    pub fn whole(dim: usize) -> Self {
        BlockLayout {
            starts: vec![0],
            dim,
        }
    }

    /// Blocks beginning at each offset in `starts`; offset 0 is implied.
    pub fn from_offsets(starts: &[usize], dim: usize) -> Result<Self> {
        let mut s: Vec<usize> = Vec::with_capacity(starts.len() + 1);
        if starts.first() != Some(&0) {
            s.push(0);
        }
        s.extend_from_slice(starts);
        if s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("blocks", "offsets must be strictly increasing"));
        }
        if s.last().is_some_and(|&x| x >= dim) {
            return Err(Error::config("blocks", format!("offsets must be < d = {dim}")));
        }
        Ok(BlockLayout { starts: s, dim })
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.starts.iter().enumerate().map(move |(i, &start)| {
            let end = self.starts.get(i + 1).copied().unwrap_or(self.dim);
            start..end
        })
    }
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dim: usize,
    pub workers: usize,
    pub iterations: usize,
    pub beta: f64,
    pub quantizer: QuantizerSpec,
    pub predictor: PredictorKind,
    pub error_feedback: bool,
    pub schedule: StepSchedule,
    pub problem: ProblemSpec,
    pub seed: u64,
    /// Block start offsets; `None` compresses the whole vector at once.
    pub blocks: Option<Vec<usize>>,
    /// Component whose `v, u, ũ, r̂` are copied into the metrics rows.
    pub trace_component: Option<usize>,
    /// Evaluate loss and exact gradient norm every step.
    pub record_objective: bool,
    /// Cap on worker threads; `None` lets the pool decide.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(dim: usize, quantizer: QuantizerSpec) -> Self {
        RunConfig {
            dim,
            workers: 1,
            iterations: 100,
            beta: 0.9,
            quantizer,
            predictor: PredictorKind::Zero,
            error_feedback: false,
            schedule: StepSchedule::constant(0.1),
            problem: ProblemSpec::GaussianStream,
            seed: 0,
            blocks: None,
            trace_component: None,
            record_objective: true,
            threads: None,
        }
    }

    pub fn predictor_spec(&self) -> PredictorSpec {
        PredictorSpec {
            kind: self.predictor,
            beta: self.beta,
        }
    }

    pub fn layout(&self) -> Result<BlockLayout> {
        match &self.blocks {
            None => Ok(BlockLayout::whole(self.dim)),
            Some(starts) => BlockLayout::from_offsets(starts, self.dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("d", "must be >= 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be >= 1"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iters", "must be >= 1"));
        }
        check_beta(self.beta).map_err(|e| Error::config("beta", e.to_string()))?;
        self.quantizer
            .validate(self.dim)
            .map_err(|e| Error::config("k", e.to_string()))?;
        if self.predictor == PredictorKind::EstK && !self.quantizer.is_top_k_family() {
            return Err(Error::config(
                "predictor",
                format!("estk requires a top-k quantizer, got {}", self.quantizer.name()),
            ));
        }
        self.schedule.validate(self.iterations)?;
        self.problem
            .validate()
            .map_err(|e| Error::config("problem", e.to_string()))?;
        self.layout()?;
        if let Some(c) = self.trace_component {
            if c >= self.dim {
                return Err(Error::config("trace", format!("component {c} >= d")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be >= 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_decays_stepwise() {
        let s = StepSchedule {
            initial: 0.1,
            decay_every: Some(8),
            decay_factor: 0.1,
        };
        assert_eq!(s.rate(0), 0.1);
        assert_eq!(s.rate(7), 0.1);
        assert!((s.rate(8) - 0.01).abs() < 1e-15);
        assert!((s.rate(16) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn zero_step_rejected() {
        assert!(StepSchedule::constant(0.0).validate(10).is_err());
        let s = StepSchedule {
            initial: 1.0,
            decay_every: Some(1),
            decay_factor: 1e-200,
        };
        assert!(s.validate(10).is_err());
    }

    #[test]
    fn block_layout() {
        let b = BlockLayout::from_offsets(&[4, 7], 10).unwrap();
        assert_eq!(b.ranges().collect::<Vec<_>>(), vec![0..4, 4..7, 7..10]);
        assert!(BlockLayout::from_offsets(&[5, 5], 10).is_err());
        assert!(BlockLayout::from_offsets(&[10], 10).is_err());
        assert_eq!(BlockLayout::whole(3).ranges().collect::<Vec<_>>(), vec![0..3]);
    }

    #[test]
    fn estk_requires_top_k() {
        let mut c = RunConfig::new(10, QuantizerSpec::ScaledSign);
        c.predictor = PredictorKind::EstK;
        assert!(matches!(c.validate(), Err(Error::Config { ref key, .. }) if key == "predictor"));
        c.quantizer = QuantizerSpec::TopKQ { k: 2 };
        assert!(c.validate().is_ok());
    }

    #[test]
    fn beta_one_rejected() {
        let mut c = RunConfig::new(10, QuantizerSpec::TopK { k: 1 });
        c.beta = 1.0;
        assert!(matches!(c.validate(), Err(Error::Config { ref key, .. }) if key == "beta"));
    }
}
