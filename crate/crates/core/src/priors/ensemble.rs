//! Equal-weight mixtures of fitted densities, one mixture per parameter,
//! combined as a product across parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::density::{Family, ParamDensity};
use super::fit::{fit_categorical, fit_family_mle, fit_quantile_uniform, DEFAULT_QUANTILES};
use super::pool::TopConfigPool;
use crate::error::{Error, Result};
use crate::gp::LengthscaleBox;
use crate::sobol::Sobol;
use crate::space::{Configuration, Parameter, SearchSpace, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub family: Family,
    pub params: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPrior {
    pub parameter: String,
    /// Transformed-coordinate support the components were fit on.
    pub support: [f64; 2],
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PriorEnsemble {
    pub parameters: Vec<ParamPrior>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengthscale_box: Option<LengthscaleBox>,
}

/// Quantile pairs for quantile-uniform fits, with per-parameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantilePairs {
    pub default: (f64, f64),
    #[serde(default)]
    pub overrides: BTreeMap<String, (f64, f64)>,
}

impl Default for QuantilePairs {
    fn default() -> Self {
        Self {
            default: DEFAULT_QUANTILES,
            overrides: BTreeMap::new(),
        }
    }
}

impl QuantilePairs {
    pub fn for_parameter(&self, name: &str) -> (f64, f64) {
        self.overrides.get(name).copied().unwrap_or(self.default)
    }
}

fn uniform_prior(p: &Parameter) -> ParamPrior {
    let (lo, hi) = p.support();
    ParamPrior {
        parameter: p.name.clone(),
        support: [lo, hi],
        components: vec![Component {
            family: Family::QuantileUniform,
            params: vec![lo, hi],
            weight: 1.0,
        }],
    }
}

fn equal_weight(fits: Vec<ParamDensity>) -> Vec<Component> {
    let w = 1.0 / fits.len() as f64;
    fits.into_iter()
        .map(|d| Component {
            family: d.family,
            params: d.params,
            weight: w,
        })
        .collect()
}

/// Fits every family to each parameter's pooled values and averages the
/// successful fits.
pub fn build_ensemble(pool: &TopConfigPool, space: &SearchSpace, quantiles: &QuantilePairs) -> Result<PriorEnsemble> {
    if pool.is_empty() {
        return Err(Error::InsufficientData("empty configuration pool".into()));
    }
    let mut parameters = Vec::with_capacity(space.dim());
    for p in space.parameters() {
        let values: Vec<f64> = pool
            .entries
            .iter()
            .filter_map(|e| e.config.get(&p.name).and_then(|v| p.to_transformed(v).ok()))
            .collect();
        let support = p.support();
        let mut fits = Vec::new();
        if let Some(k) = p.n_choices() {
            let idx: Vec<usize> = values.iter().map(|v| *v as usize).collect();
            fits.push(fit_categorical(&idx, k)?);
        } else if !values.is_empty() {
            let (q_lo, q_hi) = quantiles.for_parameter(&p.name);
            match fit_quantile_uniform(&values, q_lo, q_hi, support) {
                Ok(d) => fits.push(d),
                Err(e) => log::debug!("{}: quantile-uniform fit failed: {e}", p.name),
            }
            for family in Family::CONTINUOUS_MLE {
                match fit_family_mle(&values, family, support) {
                    Ok(d) => fits.push(d),
                    Err(e) => log::debug!("{}: {} fit failed: {e}", p.name, family.name()),
                }
            }
        }
        if fits.is_empty() {
            log::warn!("no density fit for `{}`; using the full-domain uniform", p.name);
            parameters.push(uniform_prior(p));
        } else {
            parameters.push(ParamPrior {
                parameter: p.name.clone(),
                support: [support.0, support.1],
                components: equal_weight(fits),
            });
        }
    }
    Ok(PriorEnsemble {
        parameters,
        lengthscale_box: None,
    })
}

impl PriorEnsemble {
    /// Full-domain uniform prior over every parameter.
    pub fn uniform(space: &SearchSpace) -> Self {
        Self {
            parameters: space.parameters().iter().map(uniform_prior).collect(),
            lengthscale_box: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let e: Self = serde_json::from_str(text)?;
        for p in &e.parameters {
            let total: f64 = p.components.iter().map(|c| c.weight).sum();
            if p.components.is_empty() || p.components.iter().any(|c| !(c.weight >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "weights for `{}` must be nonnegative and sum to 1",
                    p.parameter
                )));
            }
            for c in &p.components {
                ParamDensity::new(c.family, c.params.clone(), (p.support[0], p.support[1]))?;
            }
        }
        Ok(e)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ensemble serializes")
    }

    pub fn get(&self, name: &str) -> Option<&ParamPrior> {
        self.parameters.iter().find(|p| p.parameter == name)
    }

    /// Mixture for `p` renormalized to `p`'s current support. Components
    /// with no mass there are dropped; a parameter with nothing left (or no
    /// entry) gets the full-domain uniform.
    fn mixture_for(&self, p: &Parameter) -> Vec<(ParamDensity, f64)> {
        let support = p.support();
        let mut out = Vec::new();
        if let Some(prior) = self.get(&p.name) {
            for c in &prior.components {
                if c.family == Family::Categorical && Some(c.params.len()) != p.n_choices() {
                    continue;
                }
                if c.weight > 0.0 {
                    if let Ok(d) = ParamDensity::new(c.family, c.params.clone(), support) {
                        out.push((d, c.weight));
                    }
                }
            }
        }
        if out.is_empty() {
            return vec![(ParamDensity::uniform(support), 1.0)];
        }
        let total: f64 = out.iter().map(|(_, w)| w).sum();
        for (_, w) in &mut out {
            *w /= total;
        }
        out
    }

    pub fn sampler(&self, space: &SearchSpace, seed: u64) -> Result<PriorSampler> {
        Ok(PriorSampler {
            space: space.clone(),
            mixtures: space.parameters().iter().map(|p| self.mixture_for(p)).collect(),
            sobol: Sobol::new(2 * space.dim(), seed)?,
        })
    }

    /// Mixture density of one parameter at transformed coordinate `t`.
    pub fn marginal_density(&self, p: &Parameter, t: f64) -> f64 {
        self.mixture_for(p).iter().map(|(d, w)| w * d.pdf(t)).sum()
    }

    /// Product of per-parameter mixture densities in transformed coordinates;
    /// 0 outside the domain.
    pub fn density_at(&self, space: &SearchSpace, config: &Configuration) -> f64 {
        let mut total = 1.0;
        for p in space.parameters() {
            let Some(t) = config.get(&p.name).and_then(|v| p.to_transformed(v).ok()) else {
                return 0.0;
            };
            total *= self.marginal_density(p, t);
        }
        total
    }
}

/// Draws configurations from an ensemble. Point `i` uses coordinates
/// `0..d` of a scrambled Sobol point for the values (by inverse CDF) and
/// coordinates `d..2d` to pick each parameter's mixture component, so the
/// full-domain uniform ensemble reproduces quasi-random space sampling.
#[derive(Debug, Clone)]
pub struct PriorSampler {
    space: SearchSpace,
    mixtures: Vec<Vec<(ParamDensity, f64)>>,
    sobol: Sobol,
}

impl PriorSampler {
    pub fn sample_at(&self, index: u32) -> Configuration {
        let d = self.space.dim();
        let mut config = Configuration::default();
        for (j, p) in self.space.parameters().iter().enumerate() {
            let mix = &self.mixtures[j];
            let pick = self.sobol.coordinate(index, d + j);
            let mut k = mix.len() - 1;
            let mut cum = 0.0;
            for (i, (_, w)) in mix.iter().enumerate() {
                cum += w;
                if pick < cum {
                    k = i;
                    break;
                }
            }
            let u = self.sobol.coordinate(index, j);
            config.insert(p.name.clone(), draw(p, &mix[k].0, u));
        }
        config
    }

    pub fn sample(&self, n: usize) -> Vec<Configuration> {
        (0..n as u32).map(|i| self.sample_at(i)).collect()
    }
}

/// Maps a uniform variate through one truncated component to a value.
fn draw(p: &Parameter, density: &ParamDensity, u: f64) -> Value {
    let (lo, hi) = density.support;
    let w = hi - lo;
    let q = match density.family {
        Family::Categorical => {
            let k = density.quantile(u);
            return p.from_transformed(k);
        }
        Family::QuantileUniform => {
            let a = density.params[0].max(lo);
            let b = density.params[1].min(hi);
            (a - lo) / w + u * ((b - a) / w)
        }
        _ => (density.quantile(u) - lo) / w,
    };
    p.value_from_uniform(q.clamp(0.0, 1.0))
}

pub fn sample_prior(ensemble: &PriorEnsemble, space: &SearchSpace, n: usize, seed: u64) -> Result<Vec<Configuration>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    Ok(ensemble.sampler(space, seed)?.sample(n))
}

pub fn density_at(ensemble: &PriorEnsemble, space: &SearchSpace, config: &Configuration) -> f64 {
    ensemble.density_at(space, config)
}
