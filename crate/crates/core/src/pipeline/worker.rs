use crate::codec::{bits_per_component, encode_frame, ternary_entropy, CompressedFrame};
use crate::error::{Error, Result};
use crate::pipeline::config::BlockLayout;
use crate::predict::{Predictor, PredictorSpec};
use crate::quantize::{draw_dither, Quantized, QuantizerSpec};
use crate::rng::{streams, RngStream};
use crate::vector::ParamVector;

/// The signals of one worker step, kept for metrics and invariant checks.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub v: ParamVector,
    pub r: ParamVector,
    pub u: ParamVector,
    pub u_tilde: ParamVector,
    /// Prediction that was subtracted this step.
    pub r_hat: ParamVector,
    pub r_tilde: ParamVector,
    pub e: ParamVector,
    pub frame_bits: u64,
    pub analytic_bits: Option<f64>,
}

/// Per-block quantizer plus the component range it covers.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Blocks {
    pub ranges: Vec<std::ops::Range<usize>>,
    pub specs: Vec<QuantizerSpec>,
}

impl Blocks {
    pub fn new(layout: &BlockLayout, quantizer: &QuantizerSpec) -> Self {
        let ranges: Vec<_> = layout.ranges().collect();
        let specs = if ranges.len() == 1 {
            vec![*quantizer]
        } else {
            ranges
                .iter()
                .map(|r| quantizer.for_block(r.len(), layout.dim()))
                .collect()
        };
        Blocks { ranges, specs }
    }
}

pub(crate) fn slice(v: &ParamVector, range: &std::ops::Range<usize>) -> Result<ParamVector> {
    ParamVector::from_vec(v.as_slice()[range.clone()].to_vec())
}

/// Dither stream shared by worker `id` and the master's chain for it.
pub(crate) fn dither_stream(quantizer: &QuantizerSpec, seed: u64, id: usize) -> Option<RngStream> {
    matches!(quantizer, QuantizerSpec::DitheredUniform { .. })
        .then(|| RngStream::with_stream(seed, streams::dither(id)))
}

/// One worker's side of the link: momentum, error feedback, prediction,
/// quantization and encoding.
#[derive(Debug, Clone)]
pub struct WorkerState {
    id: usize,
    v: ParamVector,
    e: ParamVector,
    r_hat: ParamVector,
    predictor: Predictor,
    prev_step: f64,
    beta: f64,
    ef: bool,
    blocks: Blocks,
    dither: Option<RngStream>,
    last: Option<StepRecord>,
}

impl WorkerState {
    pub fn new(
        id: usize,
        dim: usize,
        predictor: PredictorSpec,
        quantizer: QuantizerSpec,
        error_feedback: bool,
        layout: &BlockLayout,
        seed: u64,
    ) -> Result<Self> {
        quantizer.validate(dim)?;
        if layout.dim() != dim {
            return Err(Error::InvalidDimension(format!(
                "block layout covers {} components, expected {dim}",
                layout.dim()
            )));
        }
        Ok(WorkerState {
            id,
            v: ParamVector::zeros(dim)?,
            e: ParamVector::zeros(dim)?,
            r_hat: ParamVector::zeros(dim)?,
            predictor: predictor.build(dim)?,
            prev_step: 0.0,
            beta: predictor.beta,
            ef: error_feedback,
            blocks: Blocks::new(layout, &quantizer),
            dither: dither_stream(&quantizer, seed, id),
            last: None,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn momentum(&self) -> &ParamVector {
        &self.v
    }

    pub fn error(&self) -> &ParamVector {
        &self.e
    }

    /// Prediction that the next step will subtract.
    pub fn prediction(&self) -> &ParamVector {
        &self.r_hat
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }

    pub fn last_step(&self) -> Option<&StepRecord> {
        self.last.as_ref()
    }

    /// Run one step on gradient `g` with step size `eta` and return one frame
    /// per block.
    pub fn step(&mut self, g: &ParamVector, eta: f64) -> Result<Vec<CompressedFrame>> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidStep(eta));
        }
        if g.dim() != self.v.dim() {
            return Err(Error::InvalidDimension(format!(
                "gradient has dimension {}, expected {}",
                g.dim(),
                self.v.dim()
            )));
        }
        if !g.is_finite() {
            return Err(Error::Numeric("gradient"));
        }
        let d = g.dim();

        let mut v = self.v.scale(self.beta);
        v.axpy(1.0 - self.beta, g)?;
        let mut r = v.clone();
        if self.ef {
            r.axpy(self.prev_step / eta, &self.e)?;
        }
        let u = r.sub(&self.r_hat)?;
        if !u.is_finite() {
            return Err(Error::Numeric("prediction residual"));
        }

        let dither = self.dither.as_mut().map(|rng| draw_dither(rng, d));
        let mut u_tilde = Vec::with_capacity(d);
        let mut frames = Vec::with_capacity(self.blocks.ranges.len());
        let mut analytic = Some(0.0);
        for (range, spec) in self.blocks.ranges.iter().zip(&self.blocks.specs) {
            let ub = slice(&u, range)?;
            let block_dither = dither.as_ref().map(|z| &z[range.clone()]);
            let q = spec.quantize(&ub, block_dither)?.to_wire();
            frames.push(encode_frame(&q, spec)?);
            u_tilde.extend_from_slice(q.reconstruct(block_dither)?.as_slice());
            let bits = match &q {
                Quantized::Ternary(t) => {
                    let (pos, neg) = t.counts();
                    Some(ternary_entropy(pos, neg, range.len())?)
                }
                _ => bits_per_component(spec, range.len())?,
            };
            analytic = analytic.zip(bits).map(|(a, b)| a + b * range.len() as f64 / d as f64);
        }
        let u_tilde = ParamVector::from_vec(u_tilde)?;
        let e = u.sub(&u_tilde)?;
        let r_tilde = u_tilde.add(&self.r_hat)?;
        let next = self.predictor.advance(&u_tilde, &r_tilde)?;

        self.last = Some(StepRecord {
            v: v.clone(),
            r,
            u,
            u_tilde,
            r_hat: std::mem::replace(&mut self.r_hat, next),
            r_tilde,
            e: e.clone(),
            frame_bits: frames.iter().map(CompressedFrame::body_bits).sum(),
            analytic_bits: analytic,
        });
        self.v = v;
        self.e = e;
        self.prev_step = eta;
        Ok(frames)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::PredictorKind;
    use crate::rng::gaussian_vector;

    fn worker(kind: PredictorKind, q: QuantizerSpec, ef: bool, beta: f64, d: usize) -> WorkerState {
        let spec = PredictorSpec::new(kind, beta).unwrap();
        WorkerState::new(0, d, spec, q, ef, &BlockLayout::whole(d), 3).unwrap()
    }

    #[test]
    fn first_step_has_no_feedback() {
        let d = 6;
        let mut w = worker(PredictorKind::Zero, QuantizerSpec::TopK { k: 2 }, true, 0.9, d);
        let g = gaussian_vector(&mut RngStream::new(1), d).unwrap();
        w.step(&g, 0.5).unwrap();
        let rec = w.last_step().unwrap();
        assert_eq!(rec.r, g.scale(1.0 - 0.9));
        assert_eq!(rec.u, rec.r);
    }

    #[test]
    fn lossless_top_k_reconstructs_momentum() {
        let d = 8;
        let mut w = worker(PredictorKind::Zero, QuantizerSpec::TopK { k: d }, false, 0.9, d);
        let mut rng = RngStream::new(2);
        for _ in 0..20 {
            let g = gaussian_vector(&mut rng, d).unwrap();
            w.step(&g, 0.1).unwrap();
            let rec = w.last_step().unwrap();
            for j in 0..d {
                assert!((rec.r_tilde[j] - rec.v[j]).abs() <= 1e-6 * rec.v[j].abs().max(1e-30));
                assert!(rec.e[j].abs() <= 1e-6 * rec.v[j].abs().max(1e-30));
            }
        }
    }

    #[test]
    fn linear_predictor_residual_identity() {
        let d = 50;
        let beta = 0.9;
        let mut w = worker(PredictorKind::Linear, QuantizerSpec::TopK { k: 5 }, false, beta, d);
        let mut rng = RngStream::new(3);
        let mut prev_e: Option<ParamVector> = None;
        for _ in 0..200 {
            let g = gaussian_vector(&mut rng, d).unwrap();
            w.step(&g, 0.1).unwrap();
            let rec = w.last_step().unwrap();
            if let Some(e) = &prev_e {
                for j in 0..d {
                    let expect = beta * e[j] + (1.0 - beta) * g[j];
                    assert!((rec.u[j] - expect).abs() <= 1e-12, "{} vs {}", rec.u[j], expect);
                }
            }
            prev_e = Some(rec.e.clone());
        }
    }

    #[test]
    fn reconstruction_identity_with_feedback() {
        let d = 40;
        let mut w = worker(PredictorKind::EstK, QuantizerSpec::TopKQ { k: 4 }, true, 0.95, d);
        let mut rng = RngStream::new(4);
        for _ in 0..100 {
            let g = gaussian_vector(&mut rng, d).unwrap();
            w.step(&g, 0.1).unwrap();
            let rec = w.last_step().unwrap();
            for j in 0..d {
                assert!((rec.r[j] - rec.r_tilde[j] - rec.e[j]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = 3;
        let mut w = worker(PredictorKind::Zero, QuantizerSpec::ScaledSign, false, 0.5, d);
        let g = ParamVector::filled(d, 1.0).unwrap();
        assert!(matches!(w.step(&g, 0.0), Err(Error::InvalidStep(_))));
        assert!(matches!(w.step(&g, -1.0), Err(Error::InvalidStep(_))));
        let bad = ParamVector::from_vec(vec![1.0, f64::NAN, 0.0]).unwrap();
        assert!(matches!(w.step(&bad, 0.1), Err(Error::Numeric(_))));
    }

    #[test]
    fn blockwise_frames() {
        let d = 10;
        let spec = PredictorSpec::new(PredictorKind::Zero, 0.0).unwrap();
        let layout = BlockLayout::from_offsets(&[4], d).unwrap();
        let mut w = WorkerState::new(0, d, spec, QuantizerSpec::TopK { k: 2 }, false, &layout, 0).unwrap();
        let g = ParamVector::from_vec((0..d).map(|i| i as f64).collect()).unwrap();
        let frames = w.step(&g, 1.0).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!((frames[0].dim, frames[1].dim), (4, 6));
        let rec = w.last_step().unwrap();
        // One kept entry per block: the largest of each.
        let kept: Vec<usize> = (0..d).filter(|&j| rec.u_tilde[j] != 0.0).collect();
        assert_eq!(kept, vec![3, 9]);
    }
}
