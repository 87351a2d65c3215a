//! End-to-end metalearning: past task histories to a prior ensemble with a
//! lengthscale box.

use serde::{Deserialize, Serialize};

use super::ensemble::{build_ensemble, PriorEnsemble, QuantilePairs};
use super::fit::{learn_lengthscale_box, DEFAULT_QUANTILES};
use super::pool::{aggregate_top_configs, aggregate_top_fraction, TaskHistory};
use crate::error::{Error, Result};
use crate::gp::{GpModel, LengthscaleBox};
use crate::rng::derive_seed;
use crate::space::SearchSpace;

/// Lengthscale bounds for the per-task fits the box is learned from; wide,
/// so that the learned box reflects the data rather than this range.
pub const WIDE_LENGTHSCALE_BOUNDS: (f64, f64) = (1e-3, 1e3);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolSize {
    PerTask(usize),
    TopFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnOptions {
    pub pool: PoolSize,
    pub quantiles: QuantilePairs,
    pub box_quantiles: (f64, f64),
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for LearnOptions {
    fn default() -> Self {
        Self {
            pool: PoolSize::PerTask(10),
            quantiles: QuantilePairs::default(),
            box_quantiles: DEFAULT_QUANTILES,
            n_starts: 4,
            seed: 0,
        }
    }
}

/// Lengthscales of a GP fitted to one task's evaluations inside `space`.
pub fn task_lengthscales(history: &TaskHistory, space: &SearchSpace, n_starts: usize, seed: u64) -> Result<Vec<f64>> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for e in &history.evaluations {
        if let Ok(v) = space.encode(&e.config) {
            x.push(v);
            y.push(e.metric);
        }
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "history `{}` has {} evaluations inside the space",
            history.task,
            x.len()
        )));
    }
    let d = space.dim();
    let wide = LengthscaleBox {
        lower: vec![WIDE_LENGTHSCALE_BOUNDS.0.ln(); d],
        upper: vec![WIDE_LENGTHSCALE_BOUNDS.1.ln(); d],
    };
    let gp = GpModel::fit(x, y, &wide, n_starts, derive_seed(seed, &history.task, 0))?;
    Ok(gp.kernel().lengthscales.clone())
}

/// Builds the ensemble from the pooled top configurations and, with at
/// least two usable histories, the lengthscale box.
pub fn learn_priors(histories: &[TaskHistory], space: &SearchSpace, options: &LearnOptions) -> Result<PriorEnsemble> {
    let pool = match options.pool {
        PoolSize::PerTask(k) => aggregate_top_configs(histories, k)?,
        PoolSize::TopFraction(f) => aggregate_top_fraction(histories, f)?,
    };
    let mut ensemble = build_ensemble(&pool, space, &options.quantiles)?;
    let mut lengthscales = Vec::new();
    for h in histories {
        match task_lengthscales(h, space, options.n_starts, options.seed) {
            Ok(l) => lengthscales.push(l),
            Err(e) => log::warn!("skipping `{}` for the lengthscale box: {e}", h.task),
        }
    }
    if lengthscales.len() >= 2 {
        let (q_lo, q_hi) = options.box_quantiles;
        ensemble.lengthscale_box = Some(learn_lengthscale_box(&lengthscales, q_lo, q_hi)?);
    } else {
        log::warn!("fewer than two histories fit; no lengthscale box learned");
    }
    Ok(ensemble)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{Evaluation, Family};
    use crate::space::{Configuration, Parameter, Value};

    fn space() -> SearchSpace {
        SearchSpace::new(vec![
            Parameter::continuous("a", 0.0, 1.0).unwrap(),
            Parameter::continuous("b", 0.0, 1.0).unwrap(),
        ])
        .unwrap()
    }

    /// Metric peaks at a = `peak` and ignores b.
    fn history(task: &str, peak: f64, n: usize) -> TaskHistory {
        let evaluations = (0..n)
            .map(|i| {
                let a = (i as f64 + 0.5) / n as f64;
                let b = ((i * 7) % n) as f64 / n as f64;
                let mut c = Configuration::default();
                c.insert("a", Value::Float(a));
                c.insert("b", Value::Float(b));
                Evaluation {
                    config: c,
                    metric: -(a - peak).powi(2),
                }
            })
            .collect();
        TaskHistory {
            task: task.into(),
            evaluations,
        }
    }

    #[test]
    fn priors_concentrate_near_the_optima_and_learn_a_box() {
        let hs: Vec<TaskHistory> = [0.2, 0.25, 0.3].iter().enumerate().map(|(i, &p)| history(&format!("t{i}"), p, 40)).collect();
        let e = learn_priors(&hs, &space(), &LearnOptions::default()).unwrap();
        let a = e.get("a").unwrap();
        let qu = a.components.iter().find(|c| c.family == Family::QuantileUniform).unwrap();
        assert!(qu.params[0] > 0.1 && qu.params[1] < 0.4, "{:?}", qu.params);
        let w: f64 = a.components.iter().map(|c| c.weight).sum();
        assert!((w - 1.0).abs() < 1e-12);
        let b = e.lengthscale_box.unwrap();
        assert_eq!(b.dim(), 2);
        // `b` is irrelevant, so its lengthscales sit above `a`'s.
        assert!(b.upper[1] > b.upper[0]);
    }

    #[test]
    fn one_history_gives_no_box() {
        let e = learn_priors(&[history("t", 0.5, 30)], &space(), &LearnOptions::default()).unwrap();
        assert!(e.lengthscale_box.is_none());
    }
}
