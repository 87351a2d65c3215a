//! Matérn-5/2 ARD kernel and its parameter boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIGNAL_BOUNDS: (f64, f64) = (1e-2, 1e2);
pub const NOISE_BOUNDS: (f64, f64) = (1e-8, 1e-1);
pub const DEFAULT_LENGTHSCALE_BOUNDS: (f64, f64) = (1e-2, 1e2);

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    /// Prior variance of the standardized latent function.
    pub signal_variance: f64,
    /// Observation noise variance on the standardized scale.
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.lengthscales.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.lengthscales.len(),
            });
        }
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !self.lengthscales.iter().all(|&l| ok(l))
            || !ok(self.signal_variance)
            || !ok(self.noise_variance)
        {
            return Err(Error::InvalidArgument(format!(
                "kernel parameters must be finite and strictly positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Log-coordinates `(ln ℓ_1, …, ln ℓ_d, ln s, ln σ²)`.
    #[cfg(test)]
    pub(crate) fn to_log(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        t.push(self.signal_variance.ln());
        t.push(self.noise_variance.ln());
        t
    }

    pub(crate) fn from_log(t: &[f64]) -> Self {
        let d = t.len() - 2;
        Self {
            lengthscales: t[..d].iter().map(|v| v.exp()).collect(),
            signal_variance: t[d].exp(),
            noise_variance: t[d + 1].exp(),
        }
    }

    /// Scaled distance `r` between two points.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((x, y), l)| ((x - y) / l).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Noise-free covariance `k(a, b)`.
    pub fn covariance(&self, a: &[f64], b: &[f64]) -> f64 {
        matern52(self.signal_variance, self.distance(a, b))
    }
}

pub fn matern52(signal: f64, r: f64) -> f64 {
    let s5r = SQRT5 * r;
    signal * (1.0 + s5r + 5.0 / 3.0 * r * r) * (-s5r).exp()
}

/// `∂k/∂ln ℓ_i` divided by `d_i² / ℓ_i²`.
pub(crate) fn matern52_lengthscale_factor(signal: f64, r: f64) -> f64 {
    let s5r = SQRT5 * r;
    signal * 5.0 / 3.0 * (1.0 + s5r) * (-s5r).exp()
}

/// Box on the natural-log lengthscales used as a uniform prior when fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthscaleBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LengthscaleBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidArgument("lengthscale box bounds must have equal nonzero length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidArgument("lengthscale box needs lower <= upper".into()));
        }
        Ok(Self { lower, upper })
    }

    /// The default `[1e-2, 1e2]` box in every dimension.
    pub fn default_for(dim: usize) -> Self {
        Self {
            lower: vec![DEFAULT_LENGTHSCALE_BOUNDS.0.ln(); dim],
            upper: vec![DEFAULT_LENGTHSCALE_BOUNDS.1.ln(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Bounds for a `dim`-dimensional model; a one-dimensional box is
    /// broadcast to every dimension.
    pub fn bounds_for(&self, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        match self.dim() {
            d if d == dim => Ok((self.lower.clone(), self.upper.clone())),
            1 => Ok((vec![self.lower[0]; dim], vec![self.upper[0]; dim])),
            d => Err(Error::DimensionMismatch { expected: dim, got: d }),
        }
    }
}
