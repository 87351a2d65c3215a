//! Fitting per-parameter densities to the top configurations of past tasks.

use super::density::{Family, ParamDensity};
use crate::error::{Error, Result};
use crate::gp::{LengthscaleBox, DEFAULT_LENGTHSCALE_BOUNDS};
use crate::optim::nelder_mead;

pub const DEFAULT_QUANTILES: (f64, f64) = (0.05, 0.95);
pub const MIN_MLE_SAMPLES: usize = 8;
const MLE_STARTS: usize = 6;
/// Shape and scale parameters are kept inside this range during fitting.
const PARAM_RANGE: (f64, f64) = (1e-3, 1e4);

/// Linear-interpolation quantile of sorted data (the common "type 7").
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Widens `[lo, hi]` to cover at least `delta` around `center` and clamps it
/// to `domain`. The result is monotone in `[lo, hi]` for a fixed center.
fn widen(lo: f64, hi: f64, center: f64, delta: f64, domain: (f64, f64)) -> (f64, f64) {
    let mut a = lo.min(center - 0.5 * delta);
    let mut b = hi.max(center + 0.5 * delta);
    a = a.clamp(domain.0, domain.1);
    b = b.clamp(domain.0, domain.1);
    (a, b)
}

fn check_quantile_pair(q_lo: f64, q_hi: f64) -> Result<()> {
    if !(0.0 <= q_lo && q_lo < q_hi && q_hi <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= q_lo < q_hi <= 1, got ({q_lo}, {q_hi})"
        )));
    }
    Ok(())
}

pub fn fit_quantile_uniform(
    samples: &[f64],
    q_lo: f64,
    q_hi: f64,
    support: (f64, f64),
) -> Result<ParamDensity> {
    check_quantile_pair(q_lo, q_hi)?;
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples for quantile-uniform fit".into()));
    }
    let s = sorted_finite(samples)?;
    let width = support.1 - support.0;
    let delta = (1e-3 * width).max(1e-6);
    let (lo, hi) = widen(
        quantile_sorted(&s, q_lo),
        quantile_sorted(&s, q_hi),
        quantile_sorted(&s, 0.5).clamp(support.0, support.1),
        delta,
        support,
    );
    ParamDensity::new(Family::QuantileUniform, vec![lo, hi], support)
}

struct Moments {
    mean: f64,
    var: f64,
}

fn moments(x: &[f64]) -> Moments {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Moments { mean, var }
}

/// Samples pulled strictly inside the support so that boundary log-densities
/// stay finite.
fn interior(samples: &[f64], support: (f64, f64)) -> Vec<f64> {
    let eps = 1e-6 * (support.1 - support.0);
    samples
        .iter()
        .map(|v| v.clamp(support.0 + eps, support.1 - eps))
        .collect()
}

/// Starting points in log-parameter space: a moment estimate plus fixed
/// perturbations of it.
fn starts(center: &[f64]) -> Vec<Vec<f64>> {
    let offsets = [0.0, 1.0, -1.0, 2.0, -2.0, 0.5];
    (0..MLE_STARTS)
        .map(|i| {
            center
                .iter()
                .enumerate()
                .map(|(j, c)| c + offsets[i] * if j % 2 == 0 { 1.0 } else { -0.5 })
                .collect()
        })
        .collect()
}

fn in_range(log_params: &[f64]) -> bool {
    log_params
        .iter()
        .all(|t| *t >= PARAM_RANGE.0.ln() && *t <= PARAM_RANGE.1.ln())
}

/// Maximum-likelihood fit of a bounded-support family in log-parameter
/// space, with the truncation normalizer included in the likelihood.
pub fn fit_family_mle(samples: &[f64], family: Family, support: (f64, f64)) -> Result<ParamDensity> {
    if !Family::CONTINUOUS_MLE.contains(&family) {
        return Err(Error::InvalidArgument(format!("{} is not fit by MLE", family.name())));
    }
    if samples.len() < MIN_MLE_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples, need at least {MIN_MLE_SAMPLES}",
            samples.len()
        )));
    }
    let s = sorted_finite(samples)?;
    if s[0] == s[s.len() - 1] {
        return Err(Error::Degenerate("constant samples".into()));
    }
    let (lo, hi) = support;
    let width = hi - lo;
    let x = interior(&s, support);
    let n = x.len() as f64;

    let build = |t: &[f64]| -> Vec<f64> {
        match family {
            Family::Beta => vec![t[0].exp(), t[1].exp(), lo, hi],
            Family::Gamma => vec![t[0].exp(), t[1].exp(), lo],
            Family::HalfCauchy => vec![lo, t[0].exp()],
            _ => unreachable!(),
        }
    };
    let log_lik = |t: &[f64]| -> f64 {
        if !in_range(t) {
            return f64::NEG_INFINITY;
        }
        let d = ParamDensity {
            family,
            params: build(t),
            support,
        };
        let mass = d.mass();
        if !(mass > 0.0) {
            return f64::NEG_INFINITY;
        }
        x.iter().map(|v| d.base_ln_pdf(*v)).sum::<f64>() - n * mass.ln()
    };

    let shifted: Vec<f64> = x.iter().map(|v| v - lo).collect();
    let m = moments(&shifted);
    let center = match family {
        Family::Beta => {
            let mu = (m.mean / width).clamp(1e-3, 1.0 - 1e-3);
            let var = (m.var / (width * width)).max(1e-9);
            let common = (mu * (1.0 - mu) / var - 1.0).max(0.1);
            vec![(mu * common).ln(), ((1.0 - mu) * common).ln()]
        }
        Family::Gamma => {
            let var = m.var.max(1e-12);
            let shape = (m.mean * m.mean / var).max(1e-2);
            vec![shape.ln(), (var / m.mean.max(1e-12)).ln()]
        }
        Family::HalfCauchy => {
            let mut sorted = shifted.clone();
            sorted.sort_by(f64::total_cmp);
            vec![quantile_sorted(&sorted, 0.5).max(1e-9 * width).ln()]
        }
        _ => unreachable!(),
    };
    let clamp_start = |t: Vec<f64>| -> Vec<f64> {
        t.into_iter()
            .map(|v| v.clamp(PARAM_RANGE.0.ln() + 1e-6, PARAM_RANGE.1.ln() - 1e-6))
            .collect()
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts(&center) {
        let (t, v) = nelder_mead(log_lik, &clamp_start(start), 0.5, 600);
        if v.is_finite() && best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((t, v));
        }
    }
    match best {
        Some((t, _)) => ParamDensity::new(family, build(&t), support),
        None => Err(Error::FitFailed {
            family: family.name().into(),
            best: None,
        }),
    }
}

/// Empirical category frequencies with add-one smoothing.
pub fn fit_categorical(indices: &[usize], n_choices: usize) -> Result<ParamDensity> {
    if n_choices == 0 {
        return Err(Error::InvalidArgument("no categories".into()));
    }
    let mut counts = vec![1.0; n_choices];
    for &i in indices {
        if i >= n_choices {
            return Err(Error::InvalidArgument(format!("category index {i} out of range")));
        }
        counts[i] += 1.0;
    }
    let total = (indices.len() + n_choices) as f64;
    let probs = counts.into_iter().map(|c| c / total).collect();
    ParamDensity::new(
        Family::Categorical,
        probs,
        (-0.5, n_choices as f64 - 0.5),
    )
}

/// Per-dimension quantile box over natural-log lengthscales.
pub fn learn_lengthscale_box(
    best_lengthscales: &[Vec<f64>],
    q_lo: f64,
    q_hi: f64,
) -> Result<LengthscaleBox> {
    check_quantile_pair(q_lo, q_hi)?;
    if best_lengthscales.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least two lengthscale vectors".into(),
        ));
    }
    let d = best_lengthscales[0].len();
    if d == 0 || best_lengthscales.iter().any(|v| v.len() != d) {
        return Err(Error::InvalidArgument("lengthscale vectors must share a nonzero length".into()));
    }
    if best_lengthscales.iter().flatten().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::InvalidArgument("lengthscales must be positive".into()));
    }
    let domain = (
        DEFAULT_LENGTHSCALE_BOUNDS.0.ln().min(
            best_lengthscales.iter().flatten().map(|l| l.ln()).fold(f64::INFINITY, f64::min),
        ),
        DEFAULT_LENGTHSCALE_BOUNDS.1.ln().max(
            best_lengthscales.iter().flatten().map(|l| l.ln()).fold(f64::NEG_INFINITY, f64::max),
        ),
    );
    let delta = (1e-3 * (domain.1 - domain.0)).max(1e-6);
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    for j in 0..d {
        let logs: Vec<f64> = best_lengthscales.iter().map(|v| v[j].ln()).collect();
        let s = sorted_finite(&logs)?;
        let (a, b) = widen(
            quantile_sorted(&s, q_lo),
            quantile_sorted(&s, q_hi),
            quantile_sorted(&s, 0.5),
            delta,
            domain,
        );
        lower.push(a);
        upper.push(b);
    }
    LengthscaleBox::new(lower, upper)
}
