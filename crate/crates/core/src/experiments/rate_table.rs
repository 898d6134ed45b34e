//! Analytic and measured bits per component for a set of quantizers.

use serde::{Deserialize, Serialize};

use crate::codec::bits_per_component;
use crate::error::Result;
use crate::pipeline::{run_training, RunConfig, StepSchedule};
use crate::problems::ProblemSpec;
use crate::quantize::{k_from_fraction, QuantizerSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub quantizer: QuantizerSpec,
    pub dim: usize,
    /// Rounds of the Gaussian stream used for the measured rate.
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub scheme: String,
    pub k_frac: Option<f64>,
    pub analytic_bits: Option<f64>,
    pub measured_bits: f64,
}

/// The quantizers of the reference rate table at dimension `dim`.
pub fn default_rate_configs(dim: usize, seed: u64) -> Vec<RateConfig> {
    let at = |quantizer| RateConfig {
        quantizer,
        dim,
        iterations: 4,
        seed,
    };
    vec![
        at(QuantizerSpec::TopK { k: k_from_fraction(0.015, dim) }),
        at(QuantizerSpec::TopK { k: k_from_fraction(0.35, dim) }),
        at(QuantizerSpec::TopKQ { k: k_from_fraction(0.01, dim) }),
        at(QuantizerSpec::TopKQ { k: k_from_fraction(0.23, dim) }),
        at(QuantizerSpec::ScaledSign),
        at(QuantizerSpec::DitheredUniform { step: 0.1 }),
    ]
}

/// One row per config: the closed-form rate next to the average frame size
/// over a short momentum run with error feedback.
pub fn rate_table(configs: &[RateConfig]) -> Result<Vec<RateRow>> {
    configs
        .iter()
        .map(|rc| {
            let mut c = RunConfig::new(rc.dim, rc.quantizer);
            c.iterations = rc.iterations;
            c.beta = 0.9;
            c.error_feedback = true;
            c.schedule = StepSchedule::constant(1.0);
            c.problem = ProblemSpec::GaussianStream;
            c.seed = rc.seed;
            c.record_objective = false;
            let rows = run_training(&c)?.rows;
            let total: u64 = rows.iter().map(|r| r.frame_bits).sum();
            Ok(RateRow {
                scheme: rc.quantizer.name().to_string(),
                k_frac: rc.quantizer.k().map(|k| k as f64 / rc.dim as f64),
                analytic_bits: bits_per_component(&rc.quantizer, rc.dim)?,
                measured_bits: total as f64 / (rows.len() as f64 * rc.dim as f64),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_and_measured_agree_roughly() {
        let rows = rate_table(&default_rate_configs(20_000, 1)).unwrap();
        assert_eq!(rows.len(), 6);
        let top = &rows[0];
        assert!((top.analytic_bits.unwrap() - 0.592).abs() < 0.001);
        assert!((top.measured_bits / top.analytic_bits.unwrap() - 1.0).abs() < 0.1, "{top:?}");
        let sign = &rows[4];
        assert_eq!(sign.analytic_bits, Some(1.0));
        assert!((sign.measured_bits - 1.0).abs() < 0.01);
        assert!(rows[5].analytic_bits.is_none() && rows[5].measured_bits > 0.0);
    }

    #[test]
    fn analytic_top_k_monotone() {
        let dim = 5000;
        let configs: Vec<_> = [0.001, 0.01, 0.05, 0.2, 0.5]
            .iter()
            .map(|&f| RateConfig {
                quantizer: QuantizerSpec::TopK { k: k_from_fraction(f, dim) },
                dim,
                iterations: 1,
                seed: 0,
            })
            .collect();
        let rows = rate_table(&configs).unwrap();
        assert!(rows.windows(2).all(|w| w[1].analytic_bits > w[0].analytic_bits));
    }
}
