use crate::codec::{decode_frame, CompressedFrame};
use crate::error::{Error, Result};
use crate::pipeline::config::BlockLayout;
use crate::pipeline::worker::{dither_stream, Blocks};
use crate::predict::{Predictor, PredictorSpec};
use crate::quantize::{draw_dither, QuantizerSpec};
use crate::rng::RngStream;
use crate::vector::ParamVector;

/// The master's decoding-and-prediction chain for one worker.
#[derive(Debug, Clone)]
pub struct Chain {
    predictor: Predictor,
    r_hat: ParamVector,
    blocks: Blocks,
    dither: Option<RngStream>,
    last_r_tilde: Option<ParamVector>,
}

impl Chain {
    pub fn prediction(&self) -> &ParamVector {
        &self.r_hat
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }

    pub fn last_reconstruction(&self) -> Option<&ParamVector> {
        self.last_r_tilde.as_ref()
    }

    fn receive(&mut self, frames: &[CompressedFrame]) -> Result<ParamVector> {
        let d = self.r_hat.dim();
        if frames.len() != self.blocks.ranges.len() {
            return Err(Error::Protocol(format!(
                "expected {} frames, got {}",
                self.blocks.ranges.len(),
                frames.len()
            )));
        }
        let dither = self.dither.as_mut().map(|rng| draw_dither(rng, d));
        let mut u_tilde = Vec::with_capacity(d);
        for (frame, range) in frames.iter().zip(&self.blocks.ranges) {
            let q = decode_frame(frame).map_err(|e| Error::Protocol(format!("frame decode failed: {e}")))?;
            if q.dim() != range.len() {
                return Err(Error::Protocol(format!(
                    "frame covers {} components, block has {}",
                    q.dim(),
                    range.len()
                )));
            }
            let block_dither = dither.as_ref().map(|z| &z[range.clone()]);
            let ub = q
                .reconstruct(block_dither)
                .map_err(|e| Error::Protocol(e.to_string()))?;
            u_tilde.extend_from_slice(ub.as_slice());
        }
        let u_tilde = ParamVector::from_vec(u_tilde)?;
        let r_tilde = u_tilde.add(&self.r_hat)?;
        self.r_hat = self.predictor.advance(&u_tilde, &r_tilde)?;
        self.last_r_tilde = Some(r_tilde.clone());
        Ok(r_tilde)
    }
}

/// Shared parameters plus one chain per worker.
#[derive(Debug, Clone)]
pub struct MasterState {
    w: ParamVector,
    chains: Vec<Chain>,
}

impl MasterState {
    pub fn new(
        w0: ParamVector,
        workers: usize,
        predictor: PredictorSpec,
        quantizer: QuantizerSpec,
        layout: &BlockLayout,
        seed: u64,
    ) -> Result<Self> {
        let dim = w0.dim();
        if workers == 0 {
            return Err(Error::InvalidParameter("at least one worker is required".into()));
        }
        if layout.dim() != dim {
            return Err(Error::InvalidDimension(format!(
                "block layout covers {} components, expected {dim}",
                layout.dim()
            )));
        }
        let chains = (0..workers)
            .map(|id| {
                Ok(Chain {
                    predictor: predictor.build(dim)?,
                    r_hat: ParamVector::zeros(dim)?,
                    blocks: Blocks::new(layout, &quantizer),
                    dither: dither_stream(&quantizer, seed, id),
                    last_r_tilde: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MasterState { w: w0, chains })
    }

    pub fn params(&self) -> &ParamVector {
        &self.w
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    /// Decode every worker's frames, advance the chains, apply
    /// `w ← w − η · mean(r̃ᵢ)` and return the mean.
    pub fn step(&mut self, frames: &[Vec<CompressedFrame>], eta: f64) -> Result<ParamVector> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidStep(eta));
        }
        let r_tilde = self.receive(frames)?;
        let mean = ParamVector::mean_of(&r_tilde)?;
        self.w.axpy(-eta, &mean)?;
        if !self.w.is_finite() {
            return Err(Error::Numeric("parameters"));
        }
        Ok(mean)
    }

    /// Decode every worker's frames and advance the chains without touching
    /// the parameters. Returns each chain's `r̃ᵢ`.
    pub fn receive(&mut self, frames: &[Vec<CompressedFrame>]) -> Result<Vec<ParamVector>> {
        if frames.len() != self.chains.len() {
            return Err(Error::Protocol(format!(
                "expected frames from {} workers, got {}",
                self.chains.len(),
                frames.len()
            )));
        }
        self.chains
            .iter_mut()
            .zip(frames)
            .map(|(chain, f)| chain.receive(f))
            .collect()
    }
}
