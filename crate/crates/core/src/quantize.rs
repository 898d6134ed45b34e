//! Lossy quantizers applied to the prediction residual.
//!
//! Each quantizer returns a structured output ([`Quantized`]) that the codec
//! serializes and that both ends of a link reconstruct identically.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::vector::{ParamVector, SparseUpdate};

/// Which quantizer a link uses, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantizerSpec {
    TopK { k: usize },
    TopKQ { k: usize },
    ScaledSign,
    DitheredUniform { step: f64 },
    /// Identity map without binary32 rounding; exists for exact baselines.
    Passthrough,
}

impl QuantizerSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            QuantizerSpec::TopK { k } | QuantizerSpec::TopKQ { k } => check_k(k, dim),
            QuantizerSpec::DitheredUniform { step } => {
                if step.is_finite() && step > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "dither step must be > 0, got {step}"
                    )))
                }
            }
            QuantizerSpec::ScaledSign | QuantizerSpec::Passthrough => Ok(()),
        }
    }

    /// True for quantizers whose output is a Top-K support set.
    pub fn is_top_k_family(&self) -> bool {
        matches!(self, QuantizerSpec::TopK { .. } | QuantizerSpec::TopKQ { .. })
    }

    pub fn k(&self) -> Option<usize> {
        match *self {
            QuantizerSpec::TopK { k } | QuantizerSpec::TopKQ { k } => Some(k),
            _ => None,
        }
    }

    /// The same quantizer restricted to a block of `block_len` out of `dim`
    /// components. K is scaled proportionally, rounded, at least 1.
    pub fn for_block(&self, block_len: usize, dim: usize) -> QuantizerSpec {
        let scale_k = |k: usize| {
            let kb = (k as f64 * block_len as f64 / dim as f64).round() as usize;
            kb.clamp(1, block_len)
        };
        match *self {
            QuantizerSpec::TopK { k } => QuantizerSpec::TopK { k: scale_k(k) },
            QuantizerSpec::TopKQ { k } => QuantizerSpec::TopKQ { k: scale_k(k) },
            other => other,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            QuantizerSpec::TopK { .. } => "topk",
            QuantizerSpec::TopKQ { .. } => "topkq",
            QuantizerSpec::ScaledSign => "scaledsign",
            QuantizerSpec::DitheredUniform { .. } => "dithered",
            QuantizerSpec::Passthrough => "passthrough",
        }
    }

    /// Quantize `u`. The dithered quantizer needs the dither vector drawn for
    /// this step (see [`draw_dither`]).
    pub fn quantize(&self, u: &ParamVector, dither: Option<&[f64]>) -> Result<Quantized> {
        if !u.is_finite() {
            return Err(Error::Numeric("quantizer input"));
        }
        Ok(match *self {
            QuantizerSpec::TopK { k } => Quantized::Sparse(top_k(u, k)?),
            QuantizerSpec::TopKQ { k } => Quantized::Ternary(top_k_q(u, k)?),
            QuantizerSpec::ScaledSign => Quantized::Sign(scaled_sign(u)),
            QuantizerSpec::DitheredUniform { step } => {
                let dither = dither.ok_or_else(|| {
                    Error::InvalidInput("dithered quantizer needs a dither vector".into())
                })?;
                // The frame carries the step as binary32; quantize with that value.
                Quantized::Dithered(dithered_levels(u, step as f32 as f64, dither)?)
            }
            QuantizerSpec::Passthrough => Quantized::Dense(u.clone()),
        })
    }
}

/// Resolve a fractional K against `dim`: nearest integer, at least 1.
pub fn k_from_fraction(fraction: f64, dim: usize) -> usize {
    ((fraction * dim as f64).round() as usize).max(1)
}

fn check_k(k: usize, dim: usize) -> Result<()> {
    if k == 0 || k > dim {
        return Err(Error::InvalidParameter(format!(
            "K must satisfy 1 <= K <= d (K={k}, d={dim})"
        )));
    }
    Ok(())
}

/// Descending magnitude, then ascending index.
fn by_magnitude(u: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| u[b].abs().total_cmp(&u[a].abs()).then(a.cmp(&b))
}

fn top_k_support(u: &ParamVector, k: usize) -> Result<Vec<usize>> {
    check_k(k, u.dim())?;
    if !u.is_finite() {
        return Err(Error::Numeric("top-k input"));
    }
    let d = u.dim();
    let mut idx: Vec<usize> = (0..d).collect();
    if k < d {
        idx.select_nth_unstable_by(k - 1, by_magnitude(u.as_slice()));
        idx.truncate(k);
    }
    idx.sort_unstable();
    Ok(idx)
}

/// Keep the `k` largest-magnitude entries of `u`; ties go to the lower index.
pub fn top_k(u: &ParamVector, k: usize) -> Result<SparseUpdate> {
    let support = top_k_support(u, k)?;
    let values = support.iter().map(|&i| u[i]).collect();
    SparseUpdate::new(u.dim(), support, values)
}

/// Top-K support with every kept value collapsed to one of two levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TernaryUpdate {
    pub dim: usize,
    pub indices: Vec<usize>,
    /// `true` where the kept value was negative.
    pub negative: Vec<bool>,
    /// Mean of the positive kept values (0 if none).
    pub positive_level: f64,
    /// Mean of the negative kept values (0 if none).
    pub negative_level: f64,
}

impl TernaryUpdate {
    pub fn counts(&self) -> (usize, usize) {
        let neg = self.negative.iter().filter(|&&n| n).count();
        (self.indices.len() - neg, neg)
    }

    pub fn to_sparse(&self) -> SparseUpdate {
        let values = self
            .negative
            .iter()
            .map(|&n| if n { self.negative_level } else { self.positive_level })
            .collect();
        SparseUpdate::new(self.dim, self.indices.clone(), values)
            .expect("support produced by top_k is valid")
    }
}

/// Top-K followed by two-level quantization of the kept values.
///
/// Zero-valued kept entries are assigned to the positive class.
pub fn top_k_q(u: &ParamVector, k: usize) -> Result<TernaryUpdate> {
    let indices = top_k_support(u, k)?;
    let negative: Vec<bool> = indices.iter().map(|&i| u[i] < 0.0).collect();
    let (mut pos_sum, mut pos_n, mut neg_sum, mut neg_n) = (0.0, 0usize, 0.0, 0usize);
    for (&i, &neg) in indices.iter().zip(&negative) {
        if neg {
            neg_sum += u[i];
            neg_n += 1;
        } else {
            pos_sum += u[i];
            pos_n += 1;
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    Ok(TernaryUpdate {
        dim: u.dim(),
        indices,
        negative,
        positive_level: mean(pos_sum, pos_n),
        negative_level: mean(neg_sum, neg_n),
    })
}

/// `scale * sign`, with `sign(0) = +1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignUpdate {
    pub scale: f64,
    pub negative: Vec<bool>,
}

impl SignUpdate {
    pub fn to_dense(&self) -> ParamVector {
        ParamVector::from_vec(
            self.negative
                .iter()
                .map(|&n| if n { -self.scale } else { self.scale })
                .collect(),
        )
        .expect("sign vector is non-empty")
    }
}

/// Two-level quantizer with scale `‖u‖₁ / d`.
pub fn scaled_sign(u: &ParamVector) -> SignUpdate {
    SignUpdate {
        scale: u.norm_l1() / u.dim() as f64,
        negative: u.as_slice().iter().map(|&x| x < 0.0).collect(),
    }
}

/// Integer levels of a subtractively dithered uniform quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct DitheredLevels {
    pub step: f64,
    pub levels: Vec<i64>,
}

impl DitheredLevels {
    /// `step * (level - z)` per component.
    pub fn reconstruct(&self, dither: &[f64]) -> Result<ParamVector> {
        if dither.len() != self.levels.len() {
            return Err(Error::InvalidInput(format!(
                "dither length {} does not match {} levels",
                dither.len(),
                self.levels.len()
            )));
        }
        ParamVector::from_vec(
            self.levels
                .iter()
                .zip(dither)
                .map(|(&q, &z)| self.step * q as f64 - self.step * z)
                .collect(),
        )
    }
}

/// Draw `d` dither values uniform on `[-1/2, 1/2)`.
pub fn draw_dither(rng: &mut RngStream, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.uniform() - 0.5).collect()
}

pub fn dithered_levels(u: &ParamVector, step: f64, dither: &[f64]) -> Result<DitheredLevels> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dither step must be > 0, got {step}"
        )));
    }
    if dither.len() != u.dim() {
        return Err(Error::InvalidInput("dither length mismatch".into()));
    }
    let levels = u
        .as_slice()
        .iter()
        .zip(dither)
        .map(|(&x, &z)| (x / step + z).round() as i64)
        .collect();
    Ok(DitheredLevels { step, levels })
}

/// Subtractively dithered uniform quantization of `u` with step `step`.
///
/// The per-component error is uniform on `(-step/2, step/2)` independent of
/// the input, so `E‖u − ũ‖² = d·step²/12`.
pub fn dithered_uniform(u: &ParamVector, step: f64, rng: &mut RngStream) -> Result<ParamVector> {
    let z = draw_dither(rng, u.dim());
    dithered_levels(u, step, &z)?.reconstruct(&z)
}

/// Whether `‖u − q‖² ≤ (1 − δ)‖u‖²`.
pub fn delta_check(u: &ParamVector, q_out: &ParamVector, delta: f64) -> Result<bool> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta must be in (0, 1], got {delta}")));
    }
    let err = u.sub(q_out)?.norm_sq();
    Ok(err <= (1.0 - delta) * u.norm_sq())
}

/// A quantizer output in the form that goes on the wire.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantized {
    Sparse(SparseUpdate),
    Ternary(TernaryUpdate),
    Sign(SignUpdate),
    Dithered(DitheredLevels),
    Dense(ParamVector),
}

#[inline]
fn to_f32(x: f64) -> f64 {
    x as f32 as f64
}

impl Quantized {
    /// Round every real value the frame carries to binary32.
    pub fn to_wire(self) -> Quantized {
        match self {
            Quantized::Sparse(s) => {
                let values = s.values().iter().map(|&v| to_f32(v)).collect();
                Quantized::Sparse(
                    SparseUpdate::new(s.dim(), s.indices().to_vec(), values)
                        .expect("support unchanged"),
                )
            }
            Quantized::Ternary(mut t) => {
                t.positive_level = to_f32(t.positive_level);
                t.negative_level = to_f32(t.negative_level);
                Quantized::Ternary(t)
            }
            Quantized::Sign(mut s) => {
                s.scale = to_f32(s.scale);
                Quantized::Sign(s)
            }
            Quantized::Dithered(mut l) => {
                l.step = to_f32(l.step);
                Quantized::Dithered(l)
            }
            dense @ Quantized::Dense(_) => dense,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Quantized::Sparse(s) => s.dim(),
            Quantized::Ternary(t) => t.dim,
            Quantized::Sign(s) => s.negative.len(),
            Quantized::Dithered(l) => l.levels.len(),
            Quantized::Dense(v) => v.dim(),
        }
    }

    /// Dense reconstruction `ũ`.
    pub fn reconstruct(&self, dither: Option<&[f64]>) -> Result<ParamVector> {
        match self {
            Quantized::Sparse(s) => Ok(s.to_dense()),
            Quantized::Ternary(t) => Ok(t.to_sparse().to_dense()),
            Quantized::Sign(s) => Ok(s.to_dense()),
            Quantized::Dithered(l) => l.reconstruct(dither.ok_or_else(|| {
                Error::InvalidInput("dithered reconstruction needs the dither vector".into())
            })?),
            Quantized::Dense(v) => Ok(v.clone()),
        }
    }
}
