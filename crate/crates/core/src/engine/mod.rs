//! Experiment orchestration: random search, single-fidelity BO with either
//! quasi-random or prior-sampled warm starts, and the two-fidelity
//! optimizer, all charged against one budget ledger.

mod benchmark;
mod bo;
mod history;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use benchmark::{benchmark, BenchmarkOptions, BenchmarkReport, CellResult, ReportRow, TimeMeasure};
pub use bo::{best_value, fit_surrogate, propose, resolve_box, BoSettings};
pub use history::{ExperimentHistory, HistoryRecord, HistoryWriter};
pub use sweep::{config_id, quasi_sweep, SweepResult, SweepRow};

use crate::error::{Error, Result};
use crate::gbt::EarlyStopConfig;
use crate::gp::{Direction, LengthscaleBox};
use crate::mulch_mf::{self, eval_seed, evaluate, from_micro, BudgetLedger, MulchMfConfig, MICRO};
use crate::objective::Objective;
use crate::priors::PriorEnsemble;
use crate::rng::derive_seed;
use crate::space::{Configuration, SampleMode, SearchSpace};

/// Initial design size shared by `bo` and `fsl-bo`.
pub const DEFAULT_INIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Random,
    Bo,
    FslBo,
    MulchMf,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Random, Strategy::Bo, Strategy::FslBo, Strategy::MulchMf];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Bo => "bo",
            Strategy::FslBo => "fsl-bo",
            Strategy::MulchMf => "mulch-mf",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}`")))
    }
}

fn default_r_low() -> f64 {
    0.1
}

fn default_init() -> usize {
    DEFAULT_INIT
}

fn default_mf_init() -> usize {
    MulchMfConfig::DEFAULT_INIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub space: SearchSpace,
    pub strategy: Strategy,
    /// In full-fidelity evaluations.
    pub budget: f64,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default)]
    pub priors: Option<PriorEnsemble>,
    /// Overrides the priors' lengthscale box for `fsl-bo` and `mulch-mf`.
    #[serde(default)]
    pub lengthscale_box: Option<LengthscaleBox>,
    #[serde(default)]
    pub early_stop: EarlyStopConfig,
    #[serde(default = "default_r_low")]
    pub r_low: f64,
    #[serde(default = "default_mf_init")]
    pub n_low: usize,
    #[serde(default = "default_mf_init")]
    pub n_high: usize,
    #[serde(default = "default_init")]
    pub init_count: usize,
    #[serde(default)]
    pub bo: BoSettings,
    pub seed: u64,
}

fn default_direction() -> Direction {
    Direction::Max
}

impl ExperimentConfig {
    pub fn new(space: SearchSpace, strategy: Strategy, budget: f64, seed: u64) -> Self {
        Self {
            space,
            strategy,
            budget,
            direction: Direction::Max,
            priors: None,
            lengthscale_box: None,
            early_stop: EarlyStopConfig::disabled(),
            r_low: default_r_low(),
            n_low: MulchMfConfig::DEFAULT_INIT,
            n_high: MulchMfConfig::DEFAULT_INIT,
            init_count: DEFAULT_INIT,
            bo: BoSettings::default(),
            seed,
        }
    }

    pub fn with_priors(mut self, priors: PriorEnsemble) -> Self {
        self.priors = Some(priors);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget >= 1.0) || !self.budget.is_finite() {
            return Err(Error::InvalidArgument(format!("budget must be >= 1, got {}", self.budget)));
        }
        if self.direction != Direction::Max {
            return Err(Error::InvalidArgument("only maximization is supported".into()));
        }
        if self.strategy == Strategy::FslBo && self.priors.is_none() {
            return Err(Error::InvalidArgument("fsl-bo needs priors".into()));
        }
        if self.init_count == 0 {
            return Err(Error::InvalidArgument("init_count must be >= 1".into()));
        }
        BudgetLedger::new(self.budget)?;
        if self.strategy == Strategy::MulchMf {
            self.mulch_mf_config().validate()?;
        }
        Ok(())
    }

    pub fn mulch_mf_config(&self) -> MulchMfConfig {
        MulchMfConfig {
            budget: self.budget,
            r_low: self.r_low,
            n_low: self.n_low,
            n_high: self.n_high,
            cost_key: MulchMfConfig::DEFAULT_COST_KEY.to_string(),
            seed: self.seed,
            bo: self.bo,
        }
    }

    /// The box used for kernel fitting: the default for `random` and `bo`,
    /// otherwise the explicit override, then the priors' box, then the default.
    pub fn effective_box(&self) -> LengthscaleBox {
        match self.strategy {
            Strategy::Random | Strategy::Bo => LengthscaleBox::default_for(self.space.dim()),
            Strategy::FslBo | Strategy::MulchMf => resolve_box(
                self.lengthscale_box
                    .as_ref()
                    .or(self.priors.as_ref().and_then(|p| p.lengthscale_box.as_ref())),
                &self.space,
            ),
        }
    }
}

/// `k` configurations drawn from the priors.
pub fn fsl_warm_start(priors: &PriorEnsemble, space: &SearchSpace, k: usize, seed: u64) -> Result<Vec<Configuration>> {
    crate::priors::sample_prior(priors, space, k, seed)
}

/// Best full-fidelity observation whose cumulative budget is within
/// `at_budget`; ties go to the earliest.
pub fn best_seen(history: &ExperimentHistory, at_budget: f64) -> Result<(Configuration, f64)> {
    let mut best: Option<&HistoryRecord> = None;
    for r in &history.records {
        if r.budget_after > at_budget + 1e-9 {
            break;
        }
        if r.is_full_fidelity() && best.is_none_or(|b| r.score() > b.score()) {
            best = Some(r);
        }
    }
    best.map(|r| (r.config.clone(), r.score()))
        .ok_or_else(|| Error::NoObservations(format!("no full-fidelity observation within budget {at_budget}")))
}

struct Recorder<'a> {
    strategy: Strategy,
    ledger: BudgetLedger,
    history: ExperimentHistory,
    sink: &'a mut dyn FnMut(&HistoryRecord) -> Result<()>,
}

impl Recorder<'_> {
    fn push(
        &mut self,
        iteration: usize,
        config: Configuration,
        fidelity: f64,
        cost: u64,
        outcome: (Option<f64>, f64, u64),
    ) -> Result<()> {
        self.ledger.charge(cost);
        self.record(iteration, config, fidelity, cost, outcome, self.ledger.consumed)
    }

    fn record(
        &mut self,
        iteration: usize,
        config: Configuration,
        fidelity: f64,
        cost: u64,
        outcome: (Option<f64>, f64, u64),
        budget_after: u64,
    ) -> Result<()> {
        let r = HistoryRecord {
            strategy: self.strategy,
            seq: self.history.len(),
            iteration,
            config,
            fidelity,
            metric: outcome.0,
            cost: from_micro(cost),
            work: outcome.2,
            wall_time: Some(outcome.1),
            budget_after: from_micro(budget_after),
        };
        (self.sink)(&r)?;
        self.history.records.push(r);
        Ok(())
    }
}

/// Runs one experiment to budget exhaustion, handing each record to `sink`
/// as it is produced.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    objective: &dyn Objective,
    sink: &mut dyn FnMut(&HistoryRecord) -> Result<()>,
) -> Result<ExperimentHistory> {
    config.validate()?;
    let space = &config.space;
    let seed = config.seed;
    let mut rec = Recorder {
        strategy: config.strategy,
        ledger: BudgetLedger::new(config.budget)?,
        history: ExperimentHistory::default(),
        sink,
    };
    match config.strategy {
        Strategy::Random => {
            let n = evaluations_for(config.budget)?;
            let configs = space.sample(n, SampleMode::Pseudo, derive_seed(seed, "random", 0))?;
            for (i, c) in configs.into_iter().enumerate() {
                let outcome = evaluate(objective, &c, 1.0, eval_seed(seed, i));
                rec.push(0, c, 1.0, MICRO, outcome)?;
            }
        }
        Strategy::Bo | Strategy::FslBo => {
            let init = initial_design(config)?;
            let lengthscale_box = config.effective_box();
            let mut iteration = 0;
            let mut pending = init.into_iter();
            while !rec.ledger.exhausted() {
                let (c, it) = match pending.next() {
                    Some(c) => (c, 0),
                    None => {
                        iteration += 1;
                        (next_bo_point(config, &rec.history, &lengthscale_box)?, iteration)
                    }
                };
                let outcome = evaluate(objective, &c, 1.0, eval_seed(seed, rec.history.len()));
                rec.push(it, c, 1.0, MICRO, outcome)?;
            }
        }
        Strategy::MulchMf => {
            let mf = config.mulch_mf_config();
            let lengthscale_box = config.effective_box();
            mulch_mf::run(&mf, space, objective, config.priors.as_ref(), &lengthscale_box, &mut |o| {
                rec.record(
                    o.iteration,
                    o.config.clone(),
                    o.fidelity,
                    o.cost,
                    (o.metric, o.wall_time, o.work),
                    o.budget_after,
                )
            })?;
        }
    }
    Ok(rec.history)
}

pub fn run_experiment(config: &ExperimentConfig, objective: &dyn Objective) -> Result<ExperimentHistory> {
    run_experiment_with(config, objective, &mut |_| Ok(()))
}

fn evaluations_for(budget: f64) -> Result<usize> {
    let micro = crate::mulch_mf::to_micro(budget)?;
    Ok(micro.div_ceil(MICRO) as usize)
}

/// Quasi-random points for `bo`, prior draws for `fsl-bo`.
fn initial_design(config: &ExperimentConfig) -> Result<Vec<Configuration>> {
    let k = config.init_count;
    let seed = derive_seed(config.seed, "init", 0);
    match (config.strategy, &config.priors) {
        (Strategy::FslBo, Some(p)) => fsl_warm_start(p, &config.space, k, seed),
        _ => config.space.sample(k, SampleMode::Quasi, seed),
    }
}

/// The EI proposal after the observations in `history`. The proposal seed
/// depends only on the experiment seed and the number of observations.
pub fn next_bo_point(config: &ExperimentConfig, history: &ExperimentHistory, lengthscale_box: &LengthscaleBox) -> Result<Configuration> {
    let data: Vec<(&Configuration, f64)> = history
        .records
        .iter()
        .filter_map(|r| r.metric.map(|m| (&r.config, m)))
        .collect();
    if data.is_empty() {
        // Every evaluation so far failed; keep exploring quasi-randomly.
        let seed = derive_seed(config.seed, "bo-fallback", 0);
        let n = history.len() + 1;
        return Ok(config.space.sample(n, SampleMode::Quasi, seed)?.swap_remove(n - 1));
    }
    let seed = bo_seed(config.seed, history.len());
    let (_, mut top) = propose(&config.space, &data, lengthscale_box, &config.bo, seed, 1)?;
    Ok(top.swap_remove(0).config)
}

/// Seed for the proposal made after `n_observations` observations.
pub fn bo_seed(seed: u64, n_observations: usize) -> u64 {
    derive_seed(seed, "bo", n_observations as u64)
}
