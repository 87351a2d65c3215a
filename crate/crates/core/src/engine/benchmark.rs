//! Repeated experiments over tasks and strategies, reduced to per-cell
//! summaries.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{best_seen, run_experiment, ExperimentConfig, Strategy};
use crate::engine::BoSettings;
use crate::error::{Error, Result};
use crate::gbt::{Dataset, EarlyStopConfig};
use crate::objective::GbtObjective;
use crate::priors::{quantile_sorted, PriorEnsemble};
use crate::rng::derive_seed;
use crate::space::SearchSpace;

/// What "time" means in a report. Measured seconds vary between runs;
/// `work` (split-search row visits) is reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeMeasure {
    Wall,
    Work,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub space: SearchSpace,
    pub strategies: Vec<Strategy>,
    pub repeats: usize,
    pub budget: f64,
    pub seed: u64,
    pub priors: Option<PriorEnsemble>,
    pub r_low: f64,
    pub early_stop: EarlyStopConfig,
    pub bo: BoSettings,
    pub time_measure: TimeMeasure,
}

impl BenchmarkOptions {
    pub fn new(space: SearchSpace, strategies: Vec<Strategy>, repeats: usize, budget: f64, seed: u64) -> Self {
        Self {
            space,
            strategies,
            repeats,
            budget,
            seed,
            priors: None,
            r_low: 0.1,
            early_stop: EarlyStopConfig::disabled(),
            bo: BoSettings::default(),
            time_measure: TimeMeasure::Work,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub task: String,
    pub strategy: Strategy,
    pub repeat: usize,
    pub seed: u64,
    pub final_metric: f64,
    /// Summed objective cost under the report's time measure.
    pub time: f64,
    /// Best full-fidelity metric at budgets 1, 2, …; `None` before the first.
    pub curve: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: String,
    pub strategy: Strategy,
    pub repeats: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean_time: f64,
    /// Mean time divided by random search's on the same task; `None` when
    /// random search is not part of the benchmark.
    pub time_normalized: Option<f64>,
    /// Median best-seen curve across repeats.
    pub curve: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub time_measure: TimeMeasure,
    pub rows: Vec<ReportRow>,
    pub cells: Vec<CellResult>,
}

fn median_of(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Runs every (task, strategy, repeat) cell, in parallel on the current
/// rayon pool. Cells of one (task, repeat) share a seed across strategies.
pub fn benchmark(tasks: &[Dataset], options: &BenchmarkOptions) -> Result<BenchmarkReport> {
    if options.repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    if options.strategies.is_empty() || tasks.is_empty() {
        return Err(Error::InvalidArgument("need at least one task and one strategy".into()));
    }
    let mut jobs = Vec::new();
    for task in tasks {
        for &strategy in &options.strategies {
            for repeat in 0..options.repeats {
                jobs.push((task, strategy, repeat));
            }
        }
    }
    let cells = jobs
        .par_iter()
        .map(|&(task, strategy, repeat)| run_cell(task, strategy, repeat, options))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for task in tasks {
        let of = |s: Strategy| -> Vec<&CellResult> {
            cells.iter().filter(|c| c.task == task.name && c.strategy == s).collect()
        };
        let mean_time = |cs: &[&CellResult]| cs.iter().map(|c| c.time).sum::<f64>() / cs.len() as f64;
        let reference = options
            .strategies
            .contains(&Strategy::Random)
            .then(|| mean_time(&of(Strategy::Random)));
        for &strategy in &options.strategies {
            let cs = of(strategy);
            let mut finals: Vec<f64> = cs.iter().map(|c| c.final_metric).collect();
            finals.sort_by(f64::total_cmp);
            let t = mean_time(&cs);
            let curve_len = cs[0].curve.len();
            let curve = (0..curve_len)
                .map(|i| {
                    let vals: Vec<f64> = cs.iter().filter_map(|c| c.curve[i]).collect();
                    (vals.len() == cs.len()).then(|| median_of(&vals))
                })
                .collect();
            rows.push(ReportRow {
                task: task.name.clone(),
                strategy,
                repeats: cs.len(),
                median: quantile_sorted(&finals, 0.5),
                q1: quantile_sorted(&finals, 0.25),
                q3: quantile_sorted(&finals, 0.75),
                mean_time: t,
                time_normalized: reference.map(|r| if r > 0.0 { t / r } else { f64::NAN }),
                curve,
            });
        }
    }
    Ok(BenchmarkReport {
        time_measure: options.time_measure,
        rows,
        cells,
    })
}

fn run_cell(task: &Dataset, strategy: Strategy, repeat: usize, options: &BenchmarkOptions) -> Result<CellResult> {
    let seed = derive_seed(options.seed, &task.name, repeat as u64);
    let mut config = ExperimentConfig::new(options.space.clone(), strategy, options.budget, seed);
    config.r_low = options.r_low;
    config.early_stop = options.early_stop;
    config.bo = options.bo;
    if matches!(strategy, Strategy::FslBo | Strategy::MulchMf) {
        config.priors = options.priors.clone();
    }
    let objective = GbtObjective::new(task.clone(), options.early_stop);
    let history = run_experiment(&config, &objective)?;
    let time = match options.time_measure {
        TimeMeasure::Wall => history.total_wall_time(),
        TimeMeasure::Work => history.total_work() as f64,
    };
    let checkpoints = options.budget.ceil() as usize;
    let curve = (1..=checkpoints)
        .map(|b| best_seen(&history, b as f64).ok().map(|(_, v)| v))
        .collect();
    let final_metric = best_seen(&history, f64::INFINITY)?.1;
    log::debug!("{} {strategy} #{repeat}: {final_metric:.4}", task.name);
    Ok(CellResult {
        task: task.name.clone(),
        strategy,
        repeat,
        seed,
        final_metric,
        time,
        curve,
    })
}

impl BenchmarkReport {
    /// One row per task and strategy.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "task",
            "strategy",
            "repeats",
            "median",
            "q1",
            "q3",
            "mean_time",
            "time_normalized",
            "time_measure",
        ])?;
        let measure = match self.time_measure {
            TimeMeasure::Wall => "wall",
            TimeMeasure::Work => "work",
        };
        for r in &self.rows {
            w.write_record([
                r.task.clone(),
                r.strategy.to_string(),
                r.repeats.to_string(),
                r.median.to_string(),
                r.q1.to_string(),
                r.q3.to_string(),
                r.mean_time.to_string(),
                r.time_normalized.map(|v| v.to_string()).unwrap_or_default(),
                measure.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
