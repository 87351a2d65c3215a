//! Two-fidelity optimization with one GP per fidelity and cost-weighted
//! assignment of the two proposals to the two fidelities.
//!
//! Each iteration proposes `θ1` from the low-fidelity model and `θ2` from
//! the full-fidelity model. The low-fidelity slot is filled by drawing from
//! `{θ1, θ2}` with probability proportional to each candidate's cost value,
//! the full-fidelity slot with probability proportional to its reciprocal,
//! so expensive configurations tend to be screened cheaply and cheap ones
//! are trained in full.

use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::engine::{propose, BoSettings};
use crate::error::{Error, Result};
use crate::gp::LengthscaleBox;
use crate::objective::Objective;
use crate::priors::PriorEnsemble;
use crate::rng::{child_rng, derive_seed, Rng};
use crate::space::{Configuration, SearchSpace};

/// Budget units are kept as integer millionths so sums are exact.
pub const MICRO: u64 = 1_000_000;

/// Converts a nonnegative budget amount to millionths; fails unless it is a
/// whole number of millionths.
pub fn to_micro(x: f64) -> Result<u64> {
    let scaled = x * MICRO as f64;
    let rounded = scaled.round();
    if !(x >= 0.0) || !scaled.is_finite() || (scaled - rounded).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "budget amount {x} is not a nonnegative multiple of 1e-6"
        )));
    }
    Ok(rounded as u64)
}

pub fn from_micro(x: u64) -> f64 {
    x as f64 / MICRO as f64
}

/// Total budget `B` and consumption `b`, in millionths of a full evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub total: u64,
    pub consumed: u64,
}

impl BudgetLedger {
    pub fn new(total: f64) -> Result<Self> {
        let total = to_micro(total)?;
        if total == 0 {
            return Err(Error::InvalidArgument("budget must be positive".into()));
        }
        Ok(Self { total, consumed: 0 })
    }

    pub fn charge(&mut self, amount: u64) {
        self.consumed += amount;
    }

    pub fn exhausted(&self) -> bool {
        self.consumed >= self.total
    }

    pub fn consumed_units(&self) -> f64 {
        from_micro(self.consumed)
    }

    pub fn total_units(&self) -> f64 {
        from_micro(self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulchMfConfig {
    pub budget: f64,
    pub r_low: f64,
    pub n_low: usize,
    pub n_high: usize,
    pub cost_key: String,
    pub seed: u64,
    #[serde(default)]
    pub bo: BoSettings,
}

impl MulchMfConfig {
    pub const DEFAULT_INIT: usize = 4;
    pub const DEFAULT_COST_KEY: &'static str = "num_boost_round";

    pub fn new(budget: f64, r_low: f64, seed: u64) -> Self {
        Self {
            budget,
            r_low,
            n_low: Self::DEFAULT_INIT,
            n_high: Self::DEFAULT_INIT,
            cost_key: Self::DEFAULT_COST_KEY.to_string(),
            seed,
            bo: BoSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_low > 0.0 && self.r_low < 1.0) {
            return Err(Error::InvalidArgument(format!("r_low must be in (0, 1), got {}", self.r_low)));
        }
        if self.n_low == 0 || self.n_high == 0 {
            return Err(Error::InvalidArgument("n_low and n_high must be >= 1".into()));
        }
        let r = to_micro(self.r_low)?;
        let b = to_micro(self.budget)?;
        if b <= self.n_low as u64 * r + self.n_high as u64 * MICRO {
            return Err(Error::InvalidArgument(format!(
                "budget {} does not exceed the initial design cost",
                self.budget
            )));
        }
        Ok(())
    }
}

/// Selection probabilities over the pool `{θ1, θ2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostProbs {
    pub low: [f64; 2],
    pub high: [f64; 2],
}

impl CostProbs {
    pub const UNIFORM: CostProbs = CostProbs {
        low: [0.5, 0.5],
        high: [0.5, 0.5],
    };

    /// `low ∝ v`, `high ∝ 1/v`.
    pub fn from_values(v1: f64, v2: f64) -> Result<Self> {
        if !(v1 > 0.0 && v2 > 0.0) || !v1.is_finite() || !v2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cost values must be positive, got {v1} and {v2}"
            )));
        }
        let l1 = v1 / (v1 + v2);
        let h1 = (1.0 / v1) / (1.0 / v1 + 1.0 / v2);
        Ok(Self {
            low: [l1, 1.0 - l1],
            high: [h1, 1.0 - h1],
        })
    }

    /// Independent draws of the low- and full-fidelity picks (indices into
    /// the pool); both may land on the same element.
    pub fn draw(&self, rng: &mut Rng) -> (usize, usize) {
        let low = usize::from(rng.random::<f64>() >= self.low[0]);
        let high = usize::from(rng.random::<f64>() >= self.high[0]);
        (low, high)
    }
}

/// Cost probabilities from the native value of `cost_key`. When neither
/// configuration carries the key the pool is sampled uniformly.
pub fn cost_probs(a: &Configuration, b: &Configuration, cost_key: &str) -> Result<CostProbs> {
    match (a.get(cost_key), b.get(cost_key)) {
        (None, None) => Ok(CostProbs::UNIFORM),
        (Some(x), Some(y)) => {
            let value = |v: &crate::space::Value| {
                v.as_f64().ok_or_else(|| {
                    Error::InvalidArgument(format!("cost key `{cost_key}` must be numeric, got `{v}`"))
                })
            };
            CostProbs::from_values(value(x)?, value(y)?)
        }
        _ => Err(Error::InvalidArgument(format!(
            "cost key `{cost_key}` is present in only one configuration"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityObservation {
    /// 0 for the initial design, then the loop iteration.
    pub iteration: usize,
    pub config: Configuration,
    pub fidelity: f64,
    /// `None` when the evaluation failed.
    pub metric: Option<f64>,
    pub wall_time: f64,
    pub work: u64,
    /// Budget charged, in millionths.
    pub cost: u64,
    /// Ledger consumption after this observation, in millionths.
    pub budget_after: u64,
}

/// What one loop iteration proposed and picked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfStep {
    pub iteration: usize,
    pub pool: [Configuration; 2],
    pub probs: CostProbs,
    pub low_pick: usize,
    pub high_pick: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulchMfRun {
    pub observations: Vec<FidelityObservation>,
    pub steps: Vec<MfStep>,
    pub ledger: BudgetLedger,
}

impl MulchMfRun {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }
}

/// Evaluates once, turning errors and non-finite metrics into failures.
pub(crate) fn evaluate(objective: &dyn Objective, config: &Configuration, fidelity: f64, seed: u64) -> (Option<f64>, f64, u64) {
    let start = Instant::now();
    match objective.evaluate(config, fidelity, seed) {
        Ok(o) if o.metric.is_finite() => (Some(o.metric), o.wall_time, o.work),
        Ok(o) => {
            log::warn!("objective returned non-finite metric {}", o.metric);
            (None, o.wall_time, o.work)
        }
        Err(e) => {
            log::warn!("objective failed: {e}");
            (None, start.elapsed().as_secs_f64(), 0)
        }
    }
}

pub(crate) fn eval_seed(seed: u64, seq: usize) -> u64 {
    derive_seed(seed, "eval", seq as u64)
}

struct State<'a> {
    config: &'a MulchMfConfig,
    space: &'a SearchSpace,
    objective: &'a dyn Objective,
    lengthscale_box: &'a LengthscaleBox,
    r_micro: u64,
    run: MulchMfRun,
    /// Fallback draws for a fidelity with no successful data yet.
    fallback: crate::priors::PriorSampler,
    fallback_next: u32,
}

impl State<'_> {
    fn commit(
        &mut self,
        iteration: usize,
        config: Configuration,
        fidelity: f64,
        outcome: (Option<f64>, f64, u64),
        sink: &mut dyn FnMut(&FidelityObservation) -> Result<()>,
    ) -> Result<()> {
        let cost = if fidelity == 1.0 { MICRO } else { self.r_micro };
        self.run.ledger.charge(cost);
        let obs = FidelityObservation {
            iteration,
            config,
            fidelity,
            metric: outcome.0,
            wall_time: outcome.1,
            work: outcome.2,
            cost,
            budget_after: self.run.ledger.consumed,
        };
        sink(&obs)?;
        self.run.observations.push(obs);
        Ok(())
    }

    fn propose_at(&mut self, fidelity: f64, seed: u64) -> Result<Configuration> {
        let data: Vec<(&Configuration, f64)> = self
            .run
            .observations
            .iter()
            .filter(|o| o.fidelity == fidelity)
            .filter_map(|o| o.metric.map(|m| (&o.config, m)))
            .collect();
        if data.is_empty() {
            let c = self.fallback.sample_at(self.fallback_next);
            self.fallback_next += 1;
            return Ok(c);
        }
        let (_, mut top) = propose(self.space, &data, self.lengthscale_box, &self.config.bo, seed, 1)?;
        Ok(top.swap_remove(0).config)
    }

    fn step(&mut self, iteration: usize, sink: &mut dyn FnMut(&FidelityObservation) -> Result<()>) -> Result<()> {
        let seed = self.config.seed;
        let r_low = self.config.r_low;
        let theta1 = self.propose_at(r_low, derive_seed(seed, "mf-low", iteration as u64))?;
        let theta2 = self.propose_at(1.0, derive_seed(seed, "mf-high", iteration as u64))?;
        let probs = cost_probs(&theta1, &theta2, &self.config.cost_key)?;
        let (low_pick, high_pick) = probs.draw(&mut child_rng(seed, "mf-select", iteration as u64));
        let pool = [theta1, theta2];
        let seq = self.run.observations.len();
        let (low_cfg, high_cfg) = (&pool[low_pick], &pool[high_pick]);
        let objective = self.objective;
        let (low, high) = rayon::join(
            || evaluate(objective, low_cfg, r_low, eval_seed(seed, seq)),
            || evaluate(objective, high_cfg, 1.0, eval_seed(seed, seq + 1)),
        );
        self.commit(iteration, low_cfg.clone(), r_low, low, sink)?;
        self.commit(iteration, high_cfg.clone(), 1.0, high, sink)?;
        self.run.steps.push(MfStep {
            iteration,
            pool,
            probs,
            low_pick,
            high_pick,
        });
        Ok(())
    }
}

/// Runs the initial design (`n_low` prior draws at `r_low`, then `n_high`
/// at full fidelity) and iterates while the ledger is below the budget.
/// Each observation is handed to `sink` as soon as it is recorded.
pub fn run(
    config: &MulchMfConfig,
    space: &SearchSpace,
    objective: &dyn Objective,
    priors: Option<&PriorEnsemble>,
    lengthscale_box: &LengthscaleBox,
    sink: &mut dyn FnMut(&FidelityObservation) -> Result<()>,
) -> Result<MulchMfRun> {
    config.validate()?;
    let uniform;
    let priors = match priors {
        Some(p) => p,
        None => {
            uniform = PriorEnsemble::uniform(space);
            &uniform
        }
    };
    let sampler = priors.sampler(space, derive_seed(config.seed, "mf-init", 0))?;
    let n_init = (config.n_low + config.n_high) as u32;
    let mut state = State {
        config,
        space,
        objective,
        lengthscale_box,
        r_micro: to_micro(config.r_low)?,
        run: MulchMfRun {
            observations: Vec::new(),
            steps: Vec::new(),
            ledger: BudgetLedger::new(config.budget)?,
        },
        fallback: sampler.clone(),
        fallback_next: n_init,
    };
    for i in 0..n_init {
        let c = sampler.sample_at(i);
        let fidelity = if (i as usize) < config.n_low { config.r_low } else { 1.0 };
        let outcome = evaluate(objective, &c, fidelity, eval_seed(config.seed, i as usize));
        state.commit(0, c, fidelity, outcome, sink)?;
    }
    let mut iteration = 0;
    while !state.run.ledger.exhausted() {
        iteration += 1;
        state.step(iteration, sink)?;
    }
    Ok(state.run)
}
