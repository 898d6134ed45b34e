//! Evaluation of the convergence bound for compressed SGD with error feedback.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Number of iterations `T`.
    pub iterations: usize,
    /// Gradient Lipschitz constant `L`.
    pub smoothness: f64,
    /// `f(w_0) − f*`.
    pub gap: f64,
    /// Stochastic gradient variance `σ²`.
    pub sigma2: f64,
    pub workers: usize,
    /// Quantizer distortion bound `D`.
    pub distortion: f64,
    /// Free parameter `ξ > ½`; `f64::INFINITY` gives `c = 1`.
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundTerms {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub total: f64,
    /// The three-term form when `ξ = T^{1/4}`.
    pub corollary: Option<[f64; 3]>,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Domain(what.to_string()))
            }
        };
        check(self.iterations >= 1, "T must be >= 1")?;
        check(self.smoothness.is_finite() && self.smoothness > 0.0, "L must be > 0")?;
        check(self.gap.is_finite() && self.gap >= 0.0, "f(w0) - f* must be >= 0")?;
        check(self.sigma2.is_finite() && self.sigma2 >= 0.0, "sigma^2 must be >= 0")?;
        check(self.workers >= 1, "n must be >= 1")?;
        check(self.distortion.is_finite() && self.distortion >= 0.0, "D must be >= 0")?;
        check(self.xi > 0.5, "xi must be > 1/2")
    }

    /// `c = 1 − 1/(2ξ)`, the constant in the step `η = c/(L√T)`.
    pub fn c(&self) -> f64 {
        1.0 - 1.0 / (2.0 * self.xi)
    }

    pub fn step_size(&self) -> f64 {
        self.c() / (self.smoothness * (self.iterations as f64).sqrt())
    }
}

/// `ξ = T^{1/4}`.
pub fn corollary_xi(iterations: usize) -> f64 {
    (iterations as f64).powf(0.25)
}

/// Bound terms `A = (2L/c²·Δf + σ²/n)/(2√T − 1)` and `B = cξD/(2T − √T)`.
pub fn theoretical_bound(inputs: &BoundInputs) -> Result<BoundTerms> {
    inputs.validate()?;
    let t = inputs.iterations as f64;
    let sqrt_t = t.sqrt();
    let l = inputs.smoothness;
    let noise = inputs.sigma2 / inputs.workers as f64;
    let c = inputs.c();
    let a = (2.0 * l / (c * c) * inputs.gap + noise) / (2.0 * sqrt_t - 1.0);
    let b = if inputs.distortion == 0.0 {
        0.0
    } else {
        c * inputs.xi * inputs.distortion / (2.0 * t - sqrt_t)
    };
    let total = a + b;
    let xi = corollary_xi(inputs.iterations);
    let corollary = ((inputs.xi - xi).abs() <= 1e-12 * xi).then(|| {
        let first = (2.0 * l * inputs.gap + noise) / (2.0 * sqrt_t - 1.0);
        let second = (2.0 * l * inputs.gap + inputs.distortion) / (2.0 * t.powf(0.75) - xi);
        [first, second, total - first - second]
    });
    Ok(BoundTerms {
        c,
        a,
        b,
        total,
        corollary,
    })
}

/// The same bound for SGD without compression:
/// `(2L·Δf + σ²/n)/(2√T − 1)`.
pub fn plain_sgd_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let sqrt_t = (inputs.iterations as f64).sqrt();
    Ok((2.0 * inputs.smoothness * inputs.gap + inputs.sigma2 / inputs.workers as f64) / (2.0 * sqrt_t - 1.0))
}
