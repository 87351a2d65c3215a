//! Expected improvement and candidate-based acquisition maximization.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::model::GpModel;
use crate::error::{Error, Result};
use crate::optim::golden_section_max;
use crate::priors::PriorEnsemble;
use crate::sobol::Sobol;
use crate::space::{Configuration, SearchSpace};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
pub const REFINE_ITERATIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Max,
    Min,
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Closed-form EI for a Gaussian with mean `mu` and standard deviation
/// `sigma`.
pub fn ei_from_moments(mu: f64, sigma: f64, best_y: f64, direction: Direction) -> f64 {
    let gain = match direction {
        Direction::Max => mu - best_y,
        Direction::Min => best_y - mu,
    };
    if sigma < 1e-12 {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    (sigma * (z * normal_cdf(z) + normal_pdf(z))).max(0.0)
}

pub fn expected_improvement(gp: &GpModel, v: &[f64], best_y: f64, direction: Direction) -> Result<f64> {
    let (mu, var) = gp.predict(v)?;
    Ok(ei_from_moments(mu, var.sqrt(), best_y, direction))
}

/// Where acquisition candidates come from.
#[derive(Debug, Clone, Copy)]
pub enum CandidateSource<'a> {
    Uniform,
    Prior(&'a PriorEnsemble),
}

/// A scored suggestion in unit coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub config: Configuration,
    pub vector: Vec<f64>,
    pub ei: f64,
}

fn candidates(space: &SearchSpace, n: usize, seed: u64, source: CandidateSource<'_>) -> Result<Vec<Configuration>> {
    Ok(match source {
        CandidateSource::Uniform => {
            let sobol = Sobol::new(space.dim(), seed)?;
            (0..n as u32).map(|i| space.from_uniform(&sobol.point(i))).collect()
        }
        CandidateSource::Prior(e) => e.sampler(space, seed)?.sample(n),
    })
}

/// One sweep of golden-section coordinate ascent over every dimension,
/// accepting only strict improvements.
fn refine(gp: &GpModel, space: &SearchSpace, start: Vec<f64>, start_ei: f64, best_y: f64) -> Result<(Vec<f64>, f64)> {
    let mut v = start;
    let mut current = start_ei;
    for dim in 0..space.dim() {
        let mut probe = v.clone();
        let mut score = |t: f64| -> f64 {
            probe[dim] = t;
            match space.snap(&probe) {
                Ok(s) => expected_improvement(gp, &s, best_y, Direction::Max).unwrap_or(f64::NEG_INFINITY),
                Err(_) => f64::NEG_INFINITY,
            }
        };
        let (t, value) = golden_section_max(&mut score, 0.0, 1.0, REFINE_ITERATIONS);
        if value > current {
            let mut next = v.clone();
            next[dim] = t;
            v = space.snap(&next)?;
            current = value;
        }
    }
    Ok((v, current))
}

/// The `k` best candidates by EI. The first entry is the best candidate
/// after coordinate refinement; the rest are the next distinct candidates
/// unrefined. Ties keep candidate order.
pub fn suggest_top_k(
    gp: &GpModel,
    space: &SearchSpace,
    best_y: f64,
    n_candidates: usize,
    seed: u64,
    source: CandidateSource<'_>,
    k: usize,
) -> Result<Vec<ScoredCandidate>> {
    if n_candidates == 0 || k == 0 {
        return Err(Error::InvalidArgument("need at least one candidate".into()));
    }
    if gp.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: gp.dim(),
        });
    }
    let mut scored = Vec::with_capacity(n_candidates);
    for c in candidates(space, n_candidates, seed, source)? {
        let v = space.encode(&c)?;
        let ei = expected_improvement(gp, &v, best_y, Direction::Max)?;
        scored.push((v, ei));
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].1.total_cmp(&scored[a].1));

    let (v0, ei0) = scored[order[0]].clone();
    let (v, ei) = refine(gp, space, v0, ei0, best_y)?;
    let mut out = vec![ScoredCandidate {
        config: space.decode(&v)?,
        vector: v,
        ei,
    }];
    for &i in order.iter().skip(1) {
        if out.len() == k {
            break;
        }
        let (v, ei) = &scored[i];
        if out.iter().any(|o| &o.vector == v) {
            continue;
        }
        out.push(ScoredCandidate {
            config: space.decode(v)?,
            vector: v.clone(),
            ei: *ei,
        });
    }
    Ok(out)
}

/// EI-maximizing configuration over candidates plus refinement.
pub fn suggest(
    gp: &GpModel,
    space: &SearchSpace,
    best_y: f64,
    n_candidates: usize,
    seed: u64,
    source: CandidateSource<'_>,
) -> Result<Configuration> {
    Ok(suggest_top_k(gp, space, best_y, n_candidates, seed, source, 1)?
        .swap_remove(0)
        .config)
}
