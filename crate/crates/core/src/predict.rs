//! Predictors replicated at each worker and at the master's matching chain.
//!
//! A predictor consumes the reconstruction of step `t` and emits the
//! prediction for step `t + 1`. Both replicas see the same inputs and so
//! produce bitwise-identical outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{ParamVector, SparseUpdate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Zero,
    Linear,
    EstK,
}

impl PredictorKind {
    pub fn name(&self) -> &'static str {
        match self {
            PredictorKind::Zero => "zero",
            PredictorKind::Linear => "linear",
            PredictorKind::EstK => "estk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorSpec {
    pub kind: PredictorKind,
    pub beta: f64,
}

impl PredictorSpec {
    pub fn new(kind: PredictorKind, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(PredictorSpec { kind, beta })
    }

    pub fn build(&self, dim: usize) -> Result<Predictor> {
        check_beta(self.beta)?;
        Ok(match self.kind {
            PredictorKind::Zero => Predictor::Zero { dim },
            PredictorKind::Linear => Predictor::Linear { beta: self.beta },
            PredictorKind::EstK => Predictor::EstK(EstKState::new(dim, self.beta)?),
        })
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "momentum beta must be in [0, 1), got {beta}"
        )))
    }
}

/// Always predicts zero.
pub fn predict_zero(r_tilde: &ParamVector) -> ParamVector {
    ParamVector::zeros(r_tilde.dim()).expect("dimension already validated")
}

/// First-order linear prediction `beta * r̃`.
pub fn predict_linear(r_tilde: &ParamVector, beta: f64) -> ParamVector {
    r_tilde.scale(beta)
}

/// `beta + beta^2 + ... + beta^(tau+1)`.
pub fn geometric_weight(beta: f64, tau: u64) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    let n = i32::try_from(tau.saturating_add(1)).unwrap_or(i32::MAX);
    beta * (1.0 - beta.powi(n)) / (1.0 - beta)
}

fn decay(beta: f64, tau: u64) -> f64 {
    let n = i32::try_from(tau.saturating_add(1)).unwrap_or(i32::MAX);
    beta.powi(n)
}

/// Memory of the Est-K predictor: per-component momentum estimate and the
/// number of steps since the component was last transmitted.
#[derive(Debug, Clone, PartialEq)]
pub struct EstKState {
    estimate: ParamVector,
    staleness: Vec<u64>,
    beta: f64,
}

impl EstKState {
    pub fn new(dim: usize, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(EstKState {
            estimate: ParamVector::zeros(dim)?,
            staleness: vec![0; dim],
            beta,
        })
    }

    pub fn dim(&self) -> usize {
        self.staleness.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Current momentum estimate `p`.
    pub fn estimate(&self) -> &ParamVector {
        &self.estimate
    }

    /// Steps since each component was last in the transmitted set.
    pub fn staleness(&self) -> &[u64] {
        &self.staleness
    }

    /// Advance on the transmitted sparse update and return the next
    /// prediction. Entries with value zero do not count as transmitted.
    pub fn update(&mut self, u_tilde: &SparseUpdate) -> Result<ParamVector> {
        if u_tilde.dim() != self.dim() {
            return Err(Error::InvalidState(format!(
                "update dimension {} does not match predictor dimension {}",
                u_tilde.dim(),
                self.dim()
            )));
        }
        let mut selected = vec![false; self.dim()];
        for (k, value) in u_tilde.iter().filter(|(_, v)| *v != 0.0) {
            let tau = self.staleness[k];
            let weight = geometric_weight(self.beta, tau);
            self.estimate[k] = (weight * self.estimate[k] + value) / (tau as f64 + 1.0);
            selected[k] = true;
        }
        let beta = self.beta;
        let mut prediction = ParamVector::zeros(self.dim())?;
        for (k, tau) in self.staleness.iter_mut().enumerate() {
            *tau = if selected[k] { 0 } else { *tau + 1 };
            prediction[k] = decay(beta, *tau) * self.estimate[k];
        }
        Ok(prediction)
    }

    /// Same as [`update`](Self::update) on a dense `ũ`.
    pub fn update_dense(&mut self, u_tilde: &ParamVector) -> Result<ParamVector> {
        self.update(&SparseUpdate::from_dense_nonzero(u_tilde))
    }
}

/// A running predictor instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Zero { dim: usize },
    Linear { beta: f64 },
    EstK(EstKState),
}

impl Predictor {
    /// Consume `ũ_t` and `r̃_t = ũ_t + r̂_t`, return `r̂_{t+1}`.
    pub fn advance(&mut self, u_tilde: &ParamVector, r_tilde: &ParamVector) -> Result<ParamVector> {
        match self {
            Predictor::Zero { dim } => ParamVector::zeros(*dim),
            Predictor::Linear { beta } => Ok(predict_linear(r_tilde, *beta)),
            Predictor::EstK(state) => state.update_dense(u_tilde),
        }
    }
}
