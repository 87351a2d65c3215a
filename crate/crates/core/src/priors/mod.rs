//! Metalearned prior densities over hyperparameters.

mod density;
mod ensemble;
mod fit;
mod learn;
mod pool;

pub use density::{Family, ParamDensity};
pub use ensemble::{
    build_ensemble, density_at, sample_prior, Component, ParamPrior, PriorEnsemble, PriorSampler,
    QuantilePairs,
};
pub use fit::{
    fit_categorical, fit_family_mle, fit_quantile_uniform, learn_lengthscale_box, quantile_sorted,
    DEFAULT_QUANTILES, MIN_MLE_SAMPLES,
};
pub use learn::{learn_priors, task_lengthscales, LearnOptions, PoolSize, WIDE_LENGTHSCALE_BOUNDS};
pub use pool::{aggregate_top_configs, aggregate_top_fraction, Evaluation, PoolEntry, TaskHistory, TopConfigPool};

pub use crate::gp::LengthscaleBox;

const SHIPPED: &str = include_str!("../../data/priors.json");

/// The ensemble bundled with the crate, learned from the built-in training
/// tasks over the `mulch5` space.
pub fn shipped_priors() -> PriorEnsemble {
    PriorEnsemble::from_json(SHIPPED).expect("bundled priors are valid")
}
