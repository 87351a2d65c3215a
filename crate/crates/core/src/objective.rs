//! The interface between optimizers and whatever they tune.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gbt::{objective, Dataset, EarlyStopConfig, GbtHyperparams};
use crate::space::Configuration;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    /// Larger is better.
    pub metric: f64,
    pub wall_time: f64,
    /// Deterministic cost proxy; 0 when the objective has none.
    pub work: u64,
}

/// A black-box function of a configuration at a fidelity in `(0, 1]`.
/// Implementations must be deterministic in `(config, fidelity, seed)` apart
/// from `wall_time`.
pub trait Objective: Sync {
    fn evaluate(&self, config: &Configuration, fidelity: f64, seed: u64) -> Result<EvalOutcome>;
}

impl<F> Objective for F
where
    F: Fn(&Configuration, f64, u64) -> Result<EvalOutcome> + Sync,
{
    fn evaluate(&self, config: &Configuration, fidelity: f64, seed: u64) -> Result<EvalOutcome> {
        self(config, fidelity, seed)
    }
}

/// Validation accuracy of the built-in boosted-tree trainer on one task.
#[derive(Debug, Clone)]
pub struct GbtObjective {
    pub task: Dataset,
    pub early_stop: EarlyStopConfig,
}

impl GbtObjective {
    pub fn new(task: Dataset, early_stop: EarlyStopConfig) -> Self {
        Self { task, early_stop }
    }
}

impl Objective for GbtObjective {
    fn evaluate(&self, config: &Configuration, fidelity: f64, seed: u64) -> Result<EvalOutcome> {
        let hp = GbtHyperparams::from_config(config)?;
        let out = objective(&self.task, &hp, fidelity, self.early_stop, seed)?;
        Ok(EvalOutcome {
            metric: out.accuracy,
            wall_time: out.wall_time,
            work: out.work,
        })
    }
}
