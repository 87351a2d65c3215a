//! Quasi-random configuration sweeps evaluated at one or more fidelities,
//! the input format of importance analysis and fidelity scoring.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fanova::EvaluationRecord;
use crate::fidelity::FidelitySweep;
use crate::mulch_mf::eval_seed;
use crate::objective::Objective;
use crate::space::{Configuration, SampleMode, SearchSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config_id: String,
    pub fidelity: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub configs: Vec<Configuration>,
    pub rows: Vec<SweepRow>,
}

pub fn config_id(i: usize) -> String {
    format!("c{i:04}")
}

/// Evaluates `n` quasi-random configurations at every fidelity in
/// `fidelities` (full fidelity is always included). A configuration keeps
/// one evaluation seed across fidelities.
pub fn quasi_sweep(
    objective: &dyn Objective,
    space: &SearchSpace,
    n: usize,
    fidelities: &[f64],
    seed: u64,
) -> Result<SweepResult> {
    let mut levels: Vec<f64> = fidelities.to_vec();
    if levels.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::InvalidArgument("fidelities must lie in (0, 1]".into()));
    }
    if !levels.contains(&1.0) {
        levels.push(1.0);
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let configs = space.sample(n, SampleMode::Quasi, seed)?;
    let jobs: Vec<(usize, f64)> = (0..n).flat_map(|i| levels.iter().map(move |&f| (i, f))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, f)| {
            let out = objective.evaluate(&configs[i], f, eval_seed(seed, i))?;
            Ok(SweepRow {
                config_id: config_id(i),
                fidelity: f,
                metric: out.metric,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { configs, rows })
}

impl SweepResult {
    pub fn fidelity_sweep(&self) -> Result<FidelitySweep> {
        let rows: Vec<(String, f64, f64)> = self
            .rows
            .iter()
            .map(|r| (r.config_id.clone(), r.fidelity, r.metric))
            .collect();
        FidelitySweep::from_rows(&rows)
    }

    /// Full-fidelity evaluations in configuration order.
    pub fn full_fidelity_records(&self) -> Vec<EvaluationRecord> {
        self.rows
            .iter()
            .filter(|r| r.fidelity == 1.0)
            .map(|r| {
                let i: usize = r.config_id[1..].parse().expect("ids come from config_id");
                EvaluationRecord {
                    config: self.configs[i].clone(),
                    metric: r.metric,
                }
            })
            .collect()
    }
}
