//! A miniature boosted-tree binary classifier used as the tunable objective,
//! with data-fraction fidelity and patience-based early stopping.

mod data;
mod synthetic;
mod tasks;
mod train;

use serde::{Deserialize, Serialize};

pub use data::{Dataset, MAX_CLASS_SHARE, VALID_FRACTION};
pub use synthetic::{make_synthetic, Shape, SyntheticSpec};
pub use tasks::{bundled_task, bundled_task_names, load_task, TaskInfo, BUNDLED_TASKS};
pub use train::{
    logistic_grad_hess, logistic_loss, sigmoid, train, EarlyStopConfig, Ensemble, GbtHyperparams, Node,
    TrainResult, Tree, IGNORED_PARAMETERS,
};

use crate::error::Result;
use crate::rng::derive_seed;

/// Result of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveOutcome {
    /// Validation accuracy in `[0, 1]`.
    pub accuracy: f64,
    /// Seconds spent subsampling and training.
    pub wall_time: f64,
    pub rounds_used: usize,
    pub work: u64,
}

/// Trains on a fraction `r` of the task's training rows and reports
/// validation accuracy. Everything but `wall_time` is a function of the
/// arguments.
pub fn objective(
    task: &Dataset,
    hp: &GbtHyperparams,
    r: f64,
    early_stop: EarlyStopConfig,
    seed: u64,
) -> Result<ObjectiveOutcome> {
    let start = std::time::Instant::now();
    let data = task.subsample(r, derive_seed(seed, "subsample", 0))?;
    let result = train(&data, hp, early_stop, derive_seed(seed, "train", 0))?;
    Ok(ObjectiveOutcome {
        accuracy: result.accuracy(),
        wall_time: start.elapsed().as_secs_f64(),
        rounds_used: result.rounds_used,
        work: result.work,
    })
}
