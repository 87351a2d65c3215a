//! One sequential Bayesian-optimization proposal: fit a GP to the observed
//! data, then maximize expected improvement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{suggest_top_k, CandidateSource, GpModel, LengthscaleBox, ScoredCandidate};
use crate::rng::derive_seed;
use crate::space::{Configuration, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoSettings {
    /// Optimizer starts for kernel fitting.
    pub n_starts: usize,
    /// Quasi-random candidates scored per proposal.
    pub n_candidates: usize,
}

impl Default for BoSettings {
    fn default() -> Self {
        Self {
            n_starts: 4,
            n_candidates: 512,
        }
    }
}

/// Fits a GP to `data` and returns it with the `k` best EI candidates. The
/// fit and the candidate set depend only on `seed` and the data.
pub fn propose(
    space: &SearchSpace,
    data: &[(&Configuration, f64)],
    lengthscale_box: &LengthscaleBox,
    settings: &BoSettings,
    seed: u64,
    k: usize,
) -> Result<(GpModel, Vec<ScoredCandidate>)> {
    let gp = fit_surrogate(space, data, lengthscale_box, settings, seed)?;
    let best_y = best_value(data);
    let top = suggest_top_k(
        &gp,
        space,
        best_y,
        settings.n_candidates,
        derive_seed(seed, "candidates", 0),
        CandidateSource::Uniform,
        k,
    )?;
    Ok((gp, top))
}

/// The surrogate `propose` fits for the same arguments.
pub fn fit_surrogate(
    space: &SearchSpace,
    data: &[(&Configuration, f64)],
    lengthscale_box: &LengthscaleBox,
    settings: &BoSettings,
    seed: u64,
) -> Result<GpModel> {
    if data.is_empty() {
        return Err(Error::NoObservations("cannot fit a surrogate to no data".into()));
    }
    let x = data.iter().map(|(c, _)| space.encode(c)).collect::<Result<Vec<_>>>()?;
    let y: Vec<f64> = data.iter().map(|(_, v)| *v).collect();
    GpModel::fit(x, y, lengthscale_box, settings.n_starts, derive_seed(seed, "gp-fit", 0))
}

/// Largest metric in `data`; the incumbent for EI.
pub fn best_value(data: &[(&Configuration, f64)]) -> f64 {
    data.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max)
}

/// The lengthscale box to use for `space`: `preferred` when its dimension
/// fits, otherwise the default box.
pub fn resolve_box(preferred: Option<&LengthscaleBox>, space: &SearchSpace) -> LengthscaleBox {
    let d = space.dim();
    match preferred.map(|b| b.bounds_for(d)) {
        Some(Ok((lower, upper))) => LengthscaleBox { lower, upper },
        Some(Err(_)) => {
            log::warn!("lengthscale box does not match the {d}-dimensional space; using the default box");
            LengthscaleBox::default_for(d)
        }
        None => LengthscaleBox::default_for(d),
    }
}
