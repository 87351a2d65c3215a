//! GP regression: kernel fitting by bounded marginal-likelihood maximization
//! and posterior prediction.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use super::kernel::{
    matern52, matern52_lengthscale_factor, KernelParams, LengthscaleBox, NOISE_BOUNDS,
    SIGNAL_BOUNDS,
};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::optim::box_gradient_ascent;
use crate::sobol::Sobol;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const MAX_JITTER: f64 = 1e-4;
const FIT_ITERATIONS: usize = 80;

thread_local! {
    static FIT_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of `GpModel::fit` calls made on the current thread.
pub fn fit_invocations() -> u64 {
    FIT_CALLS.with(Cell::get)
}

/// Training data and hyperparameters, the serializable part of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSnapshot {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub kernel: KernelParams,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    mean: f64,
    scale: f64,
    kernel: KernelParams,
    chol: Cholesky,
    alpha: Vec<f64>,
}

/// Population mean and standard deviation; a zero spread maps to scale 1.
pub(crate) fn standardization(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 1e-12 * (1.0 + mean.abs()) { sd } else { 1.0 })
}

fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::InsufficientData("GP needs at least one observation".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::InvalidArgument("GP inputs need at least one dimension".into()));
    }
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite GP input".into()));
        }
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite GP target".into()));
    }
    Ok(d)
}

/// Noise-free covariance matrix plus `noise · I`, row-major.
fn covariance_matrix(x: &[Vec<f64>], kernel: &KernelParams) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = kernel.signal_variance + kernel.noise_variance;
        for j in 0..i {
            let v = kernel.covariance(&x[i], &x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Factors `k`, adding diagonal jitter ×10 from 1e-10 up to 1e-4 on failure.
fn factor_with_jitter(k: &mut [f64], n: usize) -> Result<Cholesky> {
    match Cholesky::new(k, n) {
        Ok(c) => return Ok(c),
        Err(Error::NotPositiveDefinite(_)) => {}
        Err(e) => return Err(e),
    }
    let mut added = 0.0;
    let mut jitter = 1e-10;
    while jitter <= MAX_JITTER * (1.0 + 1e-9) {
        for i in 0..n {
            k[i * n + i] += jitter - added;
        }
        added = jitter;
        if let Ok(c) = Cholesky::new(k, n) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite(format!(
        "still singular with jitter {MAX_JITTER:e}"
    )))
}

fn lml_from_factor(chol: &Cholesky, ys: &[f64]) -> (f64, Vec<f64>) {
    let alpha = chol.solve(ys);
    let fit: f64 = ys.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let n = ys.len() as f64;
    (-0.5 * fit - 0.5 * chol.log_det() - 0.5 * n * LN_2PI, alpha)
}

/// Exact log marginal likelihood of the standardized targets.
pub fn log_marginal_likelihood(x: &[Vec<f64>], y: &[f64], kernel: &KernelParams) -> Result<f64> {
    let d = check_inputs(x, y)?;
    kernel.validate(d)?;
    let (mean, scale) = standardization(y);
    let ys: Vec<f64> = y.iter().map(|v| (v - mean) / scale).collect();
    let mut k = covariance_matrix(x, kernel);
    let chol = factor_with_jitter(&mut k, x.len())?;
    Ok(lml_from_factor(&chol, &ys).0)
}

/// Precomputed squared coordinate differences, one n×n block per dimension.
struct PairwiseDiffs {
    n: usize,
    d: usize,
    sq: Vec<f64>,
}

impl PairwiseDiffs {
    fn new(x: &[Vec<f64>]) -> Self {
        let n = x.len();
        let d = x[0].len();
        let mut sq = vec![0.0; d * n * n];
        for k in 0..d {
            for i in 0..n {
                for j in 0..i {
                    let v = (x[i][k] - x[j][k]).powi(2);
                    sq[k * n * n + i * n + j] = v;
                    sq[k * n * n + j * n + i] = v;
                }
            }
        }
        Self { n, d, sq }
    }

    fn at(&self, k: usize, i: usize, j: usize) -> f64 {
        self.sq[k * self.n * self.n + i * self.n + j]
    }
}

/// Log marginal likelihood and its gradient with respect to
/// `(ln ℓ, ln s, ln σ²)`, or `None` if the covariance cannot be factored.
fn lml_and_gradient(
    diffs: &PairwiseDiffs,
    ys: &[f64],
    theta: &[f64],
) -> Option<(f64, Vec<f64>)> {
    let (n, d) = (diffs.n, diffs.d);
    let p = KernelParams::from_log(theta);
    let inv_l2: Vec<f64> = p.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
    let mut k = vec![0.0; n * n];
    let mut r = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = p.signal_variance + p.noise_variance;
        for j in 0..i {
            let rij = (0..d).map(|m| diffs.at(m, i, j) * inv_l2[m]).sum::<f64>().sqrt();
            let v = matern52(p.signal_variance, rij);
            k[i * n + j] = v;
            k[j * n + i] = v;
            r[i * n + j] = rij;
        }
    }
    let chol = factor_with_jitter(&mut k, n).ok()?;
    let (lml, alpha) = lml_from_factor(&chol, ys);
    if !lml.is_finite() {
        return None;
    }
    let inv = chol.inverse();
    // W = ααᵀ − K⁻¹; the gradient is ½ tr(W ∂K/∂θ).
    let w = |i: usize, j: usize| alpha[i] * alpha[j] - inv[i * n + j];
    let mut grad = vec![0.0; d + 2];
    let mut diag_w = 0.0;
    for i in 0..n {
        diag_w += w(i, i);
    }
    let mut signal_term = diag_w * p.signal_variance;
    for i in 0..n {
        for j in 0..i {
            let wij = w(i, j);
            // Off-diagonal pairs appear twice in the trace.
            signal_term += 2.0 * wij * k[i * n + j];
            let factor = 2.0 * wij * matern52_lengthscale_factor(p.signal_variance, r[i * n + j]);
            for (m, g) in grad.iter_mut().take(d).enumerate() {
                *g += factor * diffs.at(m, i, j) * inv_l2[m];
            }
        }
    }
    for g in grad.iter_mut().take(d) {
        *g *= 0.5;
    }
    grad[d] = 0.5 * signal_term;
    grad[d + 1] = 0.5 * diag_w * p.noise_variance;
    Some((lml, grad))
}

/// Bounds of the fitted log-parameters for a `d`-dimensional model.
fn parameter_bounds(d: usize, lengthscale_box: &LengthscaleBox) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut lo, mut hi) = lengthscale_box.bounds_for(d)?;
    lo.push(SIGNAL_BOUNDS.0.ln());
    hi.push(SIGNAL_BOUNDS.1.ln());
    lo.push(NOISE_BOUNDS.0.ln());
    hi.push(NOISE_BOUNDS.1.ln());
    Ok((lo, hi))
}

impl GpModel {
    /// Builds a model with fixed kernel parameters.
    pub fn with_kernel(x: Vec<Vec<f64>>, y: Vec<f64>, kernel: KernelParams) -> Result<Self> {
        let d = check_inputs(&x, &y)?;
        kernel.validate(d)?;
        let (mean, scale) = standardization(&y);
        let ys: Vec<f64> = y.iter().map(|v| (v - mean) / scale).collect();
        let mut k = covariance_matrix(&x, &kernel);
        let chol = factor_with_jitter(&mut k, x.len())?;
        let alpha = chol.solve(&ys);
        Ok(Self {
            x,
            y,
            mean,
            scale,
            kernel,
            chol,
            alpha,
        })
    }

    /// Fits kernel parameters by maximizing the marginal likelihood inside
    /// the box, starting from the box midpoint and `n_starts - 1` Sobol
    /// points.
    pub fn fit(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        lengthscale_box: &LengthscaleBox,
        n_starts: usize,
        seed: u64,
    ) -> Result<Self> {
        FIT_CALLS.with(|c| c.set(c.get() + 1));
        let d = check_inputs(&x, &y)?;
        let (lo, hi) = parameter_bounds(d, lengthscale_box)?;
        let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        if x.len() == 1 {
            return Self::with_kernel(x, y, KernelParams::from_log(&mid));
        }
        let (mean, scale) = standardization(&y);
        let ys: Vec<f64> = y.iter().map(|v| (v - mean) / scale).collect();
        let diffs = PairwiseDiffs::new(&x);

        let mut starts = vec![mid];
        if n_starts > 1 {
            let sobol = Sobol::new(d + 2, seed)?;
            for i in 0..(n_starts - 1) as u32 {
                let u = sobol.point(i);
                starts.push(lo.iter().zip(&hi).zip(&u).map(|((a, b), t)| a + t * (b - a)).collect());
            }
        }
        let mut best: Option<(Vec<f64>, f64)> = None;
        for start in &starts {
            let result = box_gradient_ascent(
                |t| lml_and_gradient(&diffs, &ys, t),
                start,
                &lo,
                &hi,
                FIT_ITERATIONS,
            );
            if let Some((t, v)) = result {
                if best.as_ref().is_none_or(|(_, b)| v > *b) {
                    best = Some((t, v));
                }
            }
        }
        let (theta, _) = best.ok_or_else(|| {
            Error::NotPositiveDefinite("covariance singular at every start".into())
        })?;
        Self::with_kernel(x, y, KernelParams::from_log(&theta))
    }

    pub fn from_snapshot(snapshot: GpSnapshot) -> Result<Self> {
        Self::with_kernel(snapshot.x, snapshot.y, snapshot.kernel)
    }

    pub fn snapshot(&self) -> GpSnapshot {
        GpSnapshot {
            x: self.x.clone(),
            y: self.y.clone(),
            kernel: self.kernel.clone(),
        }
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    /// `(mean, scale)` used to standardize the targets.
    pub fn standardization(&self) -> (f64, f64) {
        (self.mean, self.scale)
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let ys: Vec<f64> = self.y.iter().map(|v| (v - self.mean) / self.scale).collect();
        lml_from_factor(&self.chol, &ys).0
    }

    /// Posterior mean and latent variance at `v`, on the original scale.
    pub fn predict(&self, v: &[f64]) -> Result<(f64, f64)> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let mut kstar: Vec<f64> = self.x.iter().map(|xi| self.kernel.covariance(xi, v)).collect();
        let mu: f64 = kstar.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        self.chol.solve_lower_in_place(&mut kstar);
        let explained: f64 = kstar.iter().map(|a| a * a).sum();
        let mut var = self.kernel.signal_variance - explained;
        if var < 0.0 {
            if var < -1e-10 * self.kernel.signal_variance.max(1.0) {
                return Err(Error::Degenerate(format!("negative posterior variance {var:e}")));
            }
            var = 0.0;
        }
        Ok((self.mean + self.scale * mu, self.scale * self.scale * var))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;

    pub(crate) fn random_instance(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>, KernelParams) {
        let mut rng = rng_from(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r.iter().map(|v| (3.0 * v).sin()).sum::<f64>() + 0.1 * rng.random::<f64>()).collect();
        let kernel = KernelParams {
            lengthscales: (0..d).map(|_| 0.1 + rng.random::<f64>()).collect(),
            signal_variance: 0.5 + rng.random::<f64>(),
            noise_variance: 1e-3 + 0.01 * rng.random::<f64>(),
        };
        (x, y, kernel)
    }

    #[test]
    fn single_point_closed_form() {
        let kernel = KernelParams {
            lengthscales: vec![0.5],
            signal_variance: 1.3,
            noise_variance: 0.2,
        };
        // A single point standardizes to 0, so the fit term vanishes.
        let v: f64 = 1.5;
        let expected = -0.5 * (2.0 * std::f64::consts::PI * v).ln();
        let got = log_marginal_likelihood(&[vec![0.3]], &[4.0], &kernel).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn single_point_fit_uses_mid_box() {
        let b = LengthscaleBox::default_for(2);
        let gp = GpModel::fit(vec![vec![0.2, 0.4]], vec![0.7], &b, 4, 1).unwrap();
        assert!((gp.kernel().lengthscales[0] - 1.0).abs() < 1e-12);
        let (m, _) = gp.predict(&[0.2, 0.4]).unwrap();
        assert!((m - 0.7).abs() < 1e-9);
    }

    #[test]
    fn degenerate_box_pins_lengthscales() {
        let (x, y, _) = random_instance(3, 12, 2);
        let b = LengthscaleBox::new(vec![0.3f64.ln(), 0.5f64.ln()], vec![0.3f64.ln(), 0.5f64.ln()]).unwrap();
        let gp = GpModel::fit(x, y, &b, 3, 9).unwrap();
        assert_eq!(gp.kernel().lengthscales, vec![0.3f64.ln().exp(), 0.5f64.ln().exp()]);
    }

    #[test]
    fn duplicated_rows_with_zero_noise_error() {
        let kernel = KernelParams {
            lengthscales: vec![0.5],
            signal_variance: 1.0,
            noise_variance: 0.0,
        };
        let x = vec![vec![0.1], vec![0.1]];
        assert!(log_marginal_likelihood(&x, &[1.0, 2.0], &kernel).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..10 {
            let (x, y, kernel) = random_instance(seed, 15, 3);
            let (mean, scale) = standardization(&y);
            let ys: Vec<f64> = y.iter().map(|v| (v - mean) / scale).collect();
            let diffs = PairwiseDiffs::new(&x);
            let theta = kernel.to_log();
            let (_, g) = lml_and_gradient(&diffs, &ys, &theta).unwrap();
            for i in 0..theta.len() {
                let h = 1e-5;
                let mut t = theta.clone();
                t[i] += h;
                let up = lml_and_gradient(&diffs, &ys, &t).unwrap().0;
                t[i] -= 2.0 * h;
                let dn = lml_and_gradient(&diffs, &ys, &t).unwrap().0;
                let fd = (up - dn) / (2.0 * h);
                let rel = (fd - g[i]).abs() / fd.abs().max(1e-3);
                assert!(rel < 1e-5, "seed {seed} param {i}: fd {fd} analytic {}", g[i]);
            }
        }
    }

    #[test]
    fn fit_beats_every_start() {
        let (x, y, _) = random_instance(5, 20, 2);
        let b = LengthscaleBox::default_for(2);
        let gp = GpModel::fit(x.clone(), y.clone(), &b, 4, 2).unwrap();
        let best = gp.log_marginal_likelihood();
        let (lo, hi) = parameter_bounds(2, &b).unwrap();
        let sobol = Sobol::new(4, 2).unwrap();
        let mut starts = vec![lo.iter().zip(&hi).map(|(a, c)| 0.5 * (a + c)).collect::<Vec<_>>()];
        for i in 0..3 {
            let u = sobol.point(i);
            starts.push(lo.iter().zip(&hi).zip(&u).map(|((a, c), t)| a + t * (c - a)).collect());
        }
        for s in starts {
            let v = log_marginal_likelihood(&x, &y, &KernelParams::from_log(&s)).unwrap();
            assert!(best >= v - 1e-9);
        }
    }

    #[test]
    fn fit_is_deterministic_and_counted() {
        let (x, y, _) = random_instance(8, 10, 2);
        let b = LengthscaleBox::default_for(2);
        let before = fit_invocations();
        let a = GpModel::fit(x.clone(), y.clone(), &b, 3, 4).unwrap();
        let c = GpModel::fit(x, y, &b, 3, 4).unwrap();
        assert_eq!(a.kernel(), c.kernel());
        assert_eq!(fit_invocations() - before, 2);
    }

    #[test]
    fn interpolates_and_reverts_to_prior() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| (4.0 * r[0]).sin()).collect();
        let kernel = KernelParams {
            lengthscales: vec![0.3],
            signal_variance: 1.0,
            noise_variance: 1e-8,
        };
        let gp = GpModel::with_kernel(x.clone(), y.clone(), kernel).unwrap();
        let (_, scale) = gp.standardization();
        for (xi, yi) in x.iter().zip(&y) {
            let (m, v) = gp.predict(xi).unwrap();
            assert!((m - yi).abs() < 1e-4);
            assert!(v <= 1e-8 * scale * scale + 1e-8);
        }
        let (m, v) = gp.predict(&[50.0]).unwrap();
        let (mean, _) = gp.standardization();
        assert!((m - mean).abs() < 1e-2 * scale);
        assert!((v - scale * scale).abs() < 1e-2 * scale * scale);
        assert!(gp.predict(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let (x, y, kernel) = random_instance(1, 5, 2);
        let gp = GpModel::with_kernel(x, y, kernel).unwrap();
        let text = serde_json::to_string(&gp.snapshot()).unwrap();
        let back = GpModel::from_snapshot(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(gp.predict(&[0.3, 0.3]).unwrap(), back.predict(&[0.3, 0.3]).unwrap());
    }
}
