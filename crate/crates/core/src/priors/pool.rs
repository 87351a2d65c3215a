//! Pools of top configurations gathered from past experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Configuration;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub config: Configuration,
    pub metric: f64,
}

/// All evaluations of one past task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskHistory {
    pub task: String,
    pub evaluations: Vec<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub task: String,
    pub config: Configuration,
    pub metric: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopConfigPool {
    pub entries: Vec<PoolEntry>,
}

impl TopConfigPool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Indices of the `k` largest metrics, earliest first among ties.
fn top_indices(evals: &[Evaluation], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..evals.len()).collect();
    idx.sort_by(|&a, &b| evals[b].metric.total_cmp(&evals[a].metric));
    idx.truncate(k);
    idx
}

/// Takes the `per_task_count` best configurations (highest metric) from
/// each history.
pub fn aggregate_top_configs(histories: &[TaskHistory], per_task_count: usize) -> Result<TopConfigPool> {
    if per_task_count == 0 {
        return Err(Error::InvalidArgument("per_task_count must be >= 1".into()));
    }
    let mut entries = Vec::new();
    for h in histories {
        if h.evaluations.iter().any(|e| !e.metric.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "history `{}` has non-finite metrics",
                h.task
            )));
        }
        if h.evaluations.len() < per_task_count {
            return Err(Error::InsufficientData(format!(
                "history `{}` has {} evaluations, need {per_task_count}",
                h.task,
                h.evaluations.len()
            )));
        }
        for i in top_indices(&h.evaluations, per_task_count) {
            entries.push(PoolEntry {
                task: h.task.clone(),
                config: h.evaluations[i].config.clone(),
                metric: h.evaluations[i].metric,
            });
        }
    }
    Ok(TopConfigPool { entries })
}

/// Top `fraction` of the shortest history's evaluations, taken equally from
/// every task.
pub fn aggregate_top_fraction(histories: &[TaskHistory], fraction: f64) -> Result<TopConfigPool> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let shortest = histories
        .iter()
        .map(|h| h.evaluations.len())
        .min()
        .ok_or_else(|| Error::InsufficientData("no histories".into()))?;
    let k = ((shortest as f64 * fraction).ceil() as usize).max(1);
    aggregate_top_configs(histories, k)
}
