//! Stochastic gradient sources.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{gaussian_vector, streams, RngStream};
use crate::vector::ParamVector;

/// Configuration of a gradient source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// i.i.d. standard-normal "gradients" with no underlying objective.
    GaussianStream,
    /// `f(w) = ½ Σ λ_j w_j²`, λ linearly spaced on `[min_curvature, max_curvature]`,
    /// plus isotropic Gaussian noise of total variance `sigma2`.
    NoisyQuadratic {
        sigma2: f64,
        min_curvature: f64,
        max_curvature: f64,
    },
    /// ℓ₂-regularized logistic regression on two Gaussian clusters.
    SyntheticLogistic {
        samples: usize,
        batch: usize,
        separation: f64,
        regularization: f64,
    },
}

impl ProblemSpec {
    pub fn quadratic(sigma2: f64) -> Self {
        ProblemSpec::NoisyQuadratic {
            sigma2,
            min_curvature: 0.1,
            max_curvature: 1.0,
        }
    }

    pub fn logistic() -> Self {
        ProblemSpec::SyntheticLogistic {
            samples: 2000,
            batch: 16,
            separation: 1.0,
            regularization: 1e-4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::GaussianStream => "gaussian",
            ProblemSpec::NoisyQuadratic { .. } => "quadratic",
            ProblemSpec::SyntheticLogistic { .. } => "logistic",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ProblemSpec::GaussianStream => Ok(()),
            ProblemSpec::NoisyQuadratic {
                sigma2,
                min_curvature,
                max_curvature,
            } => {
                if !(sigma2 >= 0.0 && sigma2.is_finite()) {
                    return Err(Error::InvalidParameter(format!("sigma2 must be >= 0, got {sigma2}")));
                }
                if !(min_curvature > 0.0 && min_curvature <= max_curvature && max_curvature.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "curvatures must satisfy 0 < min <= max".into(),
                    ));
                }
                Ok(())
            }
            ProblemSpec::SyntheticLogistic {
                samples,
                batch,
                separation,
                regularization,
            } => {
                if samples < 2 || batch == 0 || batch > samples {
                    return Err(Error::InvalidParameter(format!(
                        "logistic problem needs 1 <= batch <= samples, samples >= 2 (got {batch}/{samples})"
                    )));
                }
                if !(separation.is_finite() && regularization >= 0.0 && regularization.is_finite()) {
                    return Err(Error::InvalidParameter("invalid logistic parameters".into()));
                }
                Ok(())
            }
        }
    }

    /// Instantiate at dimension `dim`; random data derives from `seed`.
    pub fn build(&self, dim: usize, seed: u64) -> Result<Problem> {
        self.validate()?;
        if dim == 0 {
            return Err(Error::InvalidDimension("dimension must be >= 1".into()));
        }
        Ok(match *self {
            ProblemSpec::GaussianStream => Problem::GaussianStream { dim },
            ProblemSpec::NoisyQuadratic {
                sigma2,
                min_curvature,
                max_curvature,
            } => Problem::Quadratic(NoisyQuadratic::linear_spectrum(
                dim,
                min_curvature,
                max_curvature,
                sigma2,
            )?),
            ProblemSpec::SyntheticLogistic {
                samples,
                batch,
                separation,
                regularization,
            } => Problem::Logistic(SyntheticLogistic::generate(
                dim,
                samples,
                batch,
                separation,
                regularization,
                &mut RngStream::with_stream(seed, streams::PROBLEM),
            )?),
        })
    }
}

/// An instantiated gradient source.
#[derive(Debug, Clone)]
pub enum Problem {
    GaussianStream { dim: usize },
    Quadratic(NoisyQuadratic),
    Logistic(SyntheticLogistic),
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::GaussianStream { dim } => *dim,
            Problem::Quadratic(q) => q.dim(),
            Problem::Logistic(l) => l.dim(),
        }
    }

    pub fn initial_point(&self) -> ParamVector {
        match self {
            Problem::Quadratic(_) => ParamVector::filled(self.dim(), 1.0),
            _ => ParamVector::zeros(self.dim()),
        }
        .expect("dimension validated at build")
    }

    pub fn stochastic_gradient(&self, w: &ParamVector, rng: &mut RngStream) -> Result<ParamVector> {
        match self {
            Problem::GaussianStream { dim } => gaussian_stream_grad(rng, *dim),
            Problem::Quadratic(q) => Ok(q.sample(w, rng)?.0),
            Problem::Logistic(l) => {
                let batch = l.draw_batch(rng);
                l.gradient(w, &batch)
            }
        }
    }

    /// Objective value, when an objective exists.
    pub fn loss(&self, w: &ParamVector) -> Option<f64> {
        match self {
            Problem::GaussianStream { .. } => None,
            Problem::Quadratic(q) => Some(q.value(w)),
            Problem::Logistic(l) => Some(l.loss(w)),
        }
    }

    /// Exact gradient, when an objective exists.
    pub fn full_gradient(&self, w: &ParamVector) -> Option<ParamVector> {
        match self {
            Problem::GaussianStream { .. } => None,
            Problem::Quadratic(q) => Some(q.gradient(w)),
            Problem::Logistic(l) => l.full_gradient(w).ok(),
        }
    }
}

/// Alias of the Gaussian sampler used by the synthetic stream.
pub fn gaussian_stream_grad(rng: &mut RngStream, d: usize) -> Result<ParamVector> {
    gaussian_vector(rng, d)
}

#[derive(Debug, Clone)]
pub struct NoisyQuadratic {
    curvature: Vec<f64>,
    sigma2: f64,
}

impl NoisyQuadratic {
    pub fn new(curvature: Vec<f64>, sigma2: f64) -> Result<Self> {
        if curvature.is_empty() {
            return Err(Error::InvalidDimension("dimension must be >= 1".into()));
        }
        if curvature.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter("curvatures must be positive".into()));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 must be >= 0, got {sigma2}")));
        }
        Ok(NoisyQuadratic { curvature, sigma2 })
    }

    pub fn linear_spectrum(dim: usize, min: f64, max: f64, sigma2: f64) -> Result<Self> {
        let curvature = (0..dim)
            .map(|j| {
                if dim == 1 {
                    max
                } else {
                    min + (max - min) * j as f64 / (dim - 1) as f64
                }
            })
            .collect();
        Self::new(curvature, sigma2)
    }

    pub fn dim(&self) -> usize {
        self.curvature.len()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Gradient Lipschitz constant, `max λ`.
    pub fn smoothness(&self) -> f64 {
        self.curvature.iter().copied().fold(0.0, f64::max)
    }

    pub fn optimum_value(&self) -> f64 {
        0.0
    }

    pub fn value(&self, w: &ParamVector) -> f64 {
        0.5 * self
            .curvature
            .iter()
            .zip(w.as_slice())
            .map(|(l, x)| l * x * x)
            .sum::<f64>()
    }

    pub fn gradient(&self, w: &ParamVector) -> ParamVector {
        ParamVector::from_vec(
            self.curvature
                .iter()
                .zip(w.as_slice())
                .map(|(l, x)| l * x)
                .collect(),
        )
        .expect("non-empty")
    }

    /// `(g, f(w), ∇f(w))` with `g = ∇f(w) + noise`, `E‖noise‖² = σ²`.
    pub fn sample(&self, w: &ParamVector, rng: &mut RngStream) -> Result<(ParamVector, f64, ParamVector)> {
        if w.dim() != self.dim() {
            return Err(Error::InvalidDimension("parameter dimension mismatch".into()));
        }
        let grad = self.gradient(w);
        let mut g = grad.clone();
        if self.sigma2 > 0.0 {
            let sd = (self.sigma2 / self.dim() as f64).sqrt();
            for x in g.as_mut_slice() {
                *x += sd * rng.standard_normal();
            }
        }
        Ok((g, self.value(w), grad))
    }
}

/// Convenience wrapper matching the quadratic oracle's return shape.
pub fn quadratic_grad(
    w: &ParamVector,
    problem: &NoisyQuadratic,
    rng: &mut RngStream,
) -> Result<(ParamVector, f64, ParamVector)> {
    problem.sample(w, rng)
}

#[derive(Debug, Clone)]
pub struct SyntheticLogistic {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    batch: usize,
    regularization: f64,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl SyntheticLogistic {
    /// Labels alternate `+1, -1, ...`; features are `y·μ + N(0, I)` with
    /// `μ = separation / √d · (1, ..., 1)`.
    pub fn generate(
        dim: usize,
        samples: usize,
        batch: usize,
        separation: f64,
        regularization: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let shift = separation / (dim as f64).sqrt();
        let mut features = Vec::with_capacity(dim * samples);
        let mut labels = Vec::with_capacity(samples);
        for i in 0..samples {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            labels.push(y);
            for _ in 0..dim {
                features.push(y * shift + rng.standard_normal());
            }
        }
        Self::from_data(dim, features, labels, batch, regularization)
    }

    pub fn from_data(
        dim: usize,
        features: Vec<f64>,
        labels: Vec<f64>,
        batch: usize,
        regularization: f64,
    ) -> Result<Self> {
        if dim == 0 || labels.is_empty() || features.len() != dim * labels.len() {
            return Err(Error::InvalidInput("feature matrix shape mismatch".into()));
        }
        if batch == 0 || batch > labels.len() {
            return Err(Error::InvalidParameter("batch size out of range".into()));
        }
        Ok(SyntheticLogistic {
            dim,
            features,
            labels,
            batch,
            regularization,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    fn margin(&self, w: &ParamVector, i: usize) -> f64 {
        self.labels[i] * self.row(i).iter().zip(w.as_slice()).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn draw_batch(&self, rng: &mut RngStream) -> Vec<usize> {
        sample(rng.inner_mut(), self.samples(), self.batch).into_vec()
    }

    /// Regularized loss over the full dataset.
    pub fn loss(&self, w: &ParamVector) -> f64 {
        let n = self.samples();
        let data: f64 = (0..n).map(|i| softplus(-self.margin(w, i))).sum::<f64>() / n as f64;
        data + 0.5 * self.regularization * w.norm_sq()
    }

    /// Minibatch gradient of the regularized loss.
    pub fn gradient(&self, w: &ParamVector, batch: &[usize]) -> Result<ParamVector> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty minibatch".into()));
        }
        if w.dim() != self.dim {
            return Err(Error::InvalidDimension("parameter dimension mismatch".into()));
        }
        let mut g = vec![0.0; self.dim];
        for &i in batch {
            if i >= self.samples() {
                return Err(Error::InvalidInput(format!("sample index {i} out of range")));
            }
            let coeff = -self.labels[i] * sigmoid(-self.margin(w, i));
            for (gj, xj) in g.iter_mut().zip(self.row(i)) {
                *gj += coeff * xj;
            }
        }
        let n = batch.len() as f64;
        for (gj, wj) in g.iter_mut().zip(w.as_slice()) {
            *gj = *gj / n + self.regularization * wj;
        }
        ParamVector::from_vec(g)
    }

    pub fn full_gradient(&self, w: &ParamVector) -> Result<ParamVector> {
        let all: Vec<usize> = (0..self.samples()).collect();
        self.gradient(w, &all)
    }
}

/// Minibatch gradient of the logistic problem.
pub fn logistic_grad(w: &ParamVector, problem: &SyntheticLogistic, batch: &[usize]) -> Result<ParamVector> {
    problem.gradient(w, batch)
}
