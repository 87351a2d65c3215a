//! Suggestion service: requests are answered from a precomputed store,
//! re-ranked under the latest model snapshot, while observations trigger
//! model refits in the background.
//!
//! Per experiment, one mutex guards the config, the observation log and the
//! store, so every open → served → closed transition and every log append
//! is atomic. At most one refit job runs at a time; observations that
//! arrive meanwhile are folded into a single follow-up job.

mod persist;
mod store;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard, RwLock};

use serde::{Deserialize, Serialize};

pub use store::{ModelSnapshot, Store, SuggestionRecord, SuggestionState};

use crate::engine::{
    best_seen, best_value, bo_seed, fit_surrogate, propose, ExperimentConfig, ExperimentHistory, HistoryRecord,
    Strategy,
};
use crate::error::{Error, Result};
use crate::gp::fit_invocations;
use crate::mulch_mf::to_micro;
use crate::priors::PriorEnsemble;
use crate::rng::derive_seed;
use crate::space::{Configuration, Domain, Parameter, SearchSpace};
use persist::ExperimentDir;

/// Fallback samples placed in a new experiment's store.
pub const PREPOPULATED: usize = 8;
/// Fresh suggestions generated per refit.
pub const REFIT_SUGGESTIONS: usize = 4;

/// Where refit jobs run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobMode {
    /// On a spawned thread; reports return before the job finishes.
    Background,
    /// On the reporting thread before the report returns.
    Inline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub seq: usize,
    pub suggestion_id: u64,
    pub config: Configuration,
    pub metric: f64,
}

/// Partial update of an experiment. Bounds are in transformed coordinates
/// (base-10 exponents for log-scaled parameters).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPatch {
    #[serde(default)]
    pub bounds: Option<BTreeMap<String, [f64; 2]>>,
    #[serde(default)]
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStatus {
    pub id: String,
    pub model_version: u64,
    pub observations: usize,
    pub open_suggestions: usize,
    pub budget: f64,
    pub job_running: bool,
}

struct State {
    config: ExperimentConfig,
    observations: Vec<Observation>,
    store: Store,
    snapshot: Option<Arc<ModelSnapshot>>,
    job_running: bool,
    job_pending: bool,
}

impl State {
    fn exhausted(&self) -> bool {
        self.observations.len() as f64 >= self.config.budget - 1e-9
    }

    fn fallback_sample(&mut self) -> Result<Configuration> {
        let ensemble = fallback_ensemble(&self.config);
        let sampler = ensemble.sampler(&self.config.space, fallback_seed(&self.config))?;
        let c = sampler.sample_at(self.store.fallback_next);
        self.store.fallback_next += 1;
        Ok(c)
    }
}

struct Experiment {
    id: String,
    dir: Option<ExperimentDir>,
    state: Mutex<State>,
    idle: Condvar,
    request_fits: AtomicU64,
}

impl Experiment {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn persist_store(&self, state: &State) -> Result<()> {
        match &self.dir {
            Some(d) => d.write_store(&state.store),
            None => Ok(()),
        }
    }
}

/// The prior draws come from the experiment's priors under `fsl-bo` and the
/// full-domain uniform otherwise.
fn fallback_ensemble(config: &ExperimentConfig) -> PriorEnsemble {
    match (&config.strategy, &config.priors) {
        (Strategy::FslBo, Some(p)) => p.clone(),
        _ => PriorEnsemble::uniform(&config.space),
    }
}

/// Same seed as the engine's initial design, so the store's fallback
/// samples are the engine's warm-start points.
fn fallback_seed(config: &ExperimentConfig) -> u64 {
    derive_seed(config.seed, "init", 0)
}

struct JobInput {
    config: ExperimentConfig,
    data: Vec<(Configuration, f64)>,
}

struct JobOutput {
    version: u64,
    snapshot: Option<ModelSnapshot>,
    fresh: Vec<(Configuration, f64)>,
}

/// Refit on all observations inside the current space and generate fresh
/// suggestions. The proposal seed depends only on the observation count,
/// matching the sequential engine.
fn run_job(input: &JobInput) -> Result<JobOutput> {
    let version = input.data.len() as u64;
    let space = &input.config.space;
    let data: Vec<(&Configuration, f64)> = input
        .data
        .iter()
        .filter(|(c, _)| space.contains(c))
        .map(|(c, m)| (c, *m))
        .collect();
    if data.is_empty() {
        return Ok(JobOutput {
            version,
            snapshot: None,
            fresh: Vec::new(),
        });
    }
    let seed = bo_seed(input.config.seed, input.data.len());
    let lengthscale_box = input.config.effective_box();
    let (gp, top) = propose(space, &data, &lengthscale_box, &input.config.bo, seed, REFIT_SUGGESTIONS)?;
    Ok(JobOutput {
        version,
        snapshot: Some(ModelSnapshot {
            version,
            space: space.clone(),
            gp,
            best_y: best_value(&data),
        }),
        fresh: top.into_iter().map(|c| (c.config, c.ei)).collect(),
    })
}

/// Refits until no observations are pending, then marks the experiment idle.
fn job_loop(exp: &Experiment) {
    loop {
        let input = {
            let st = exp.lock();
            JobInput {
                config: st.config.clone(),
                data: st.observations.iter().map(|o| (o.config.clone(), o.metric)).collect(),
            }
        };
        let output = run_job(&input);
        let mut st = exp.lock();
        match output {
            Ok(out) if out.version > st.store.model_version || st.snapshot.is_none() => {
                let space = st.config.space.clone();
                let fresh = out.fresh.into_iter().filter(|(c, _)| space.contains(c)).collect();
                st.store.replace_open(fresh, out.version);
                st.store.model_version = out.version;
                st.snapshot = out.snapshot.map(Arc::new);
                if let Err(e) = exp.persist_store(&st) {
                    log::error!("{}: cannot persist store: {e}", exp.id);
                }
                log::debug!("{}: model version {}", exp.id, out.version);
            }
            Ok(_) => {}
            Err(e) => log::warn!("{}: refit failed, keeping the current store: {e}", exp.id),
        }
        if st.job_pending {
            st.job_pending = false;
            continue;
        }
        st.job_running = false;
        exp.idle.notify_all();
        return;
    }
}

struct Inner {
    data_dir: Option<PathBuf>,
    mode: JobMode,
    experiments: RwLock<BTreeMap<String, Arc<Experiment>>>,
    next_id: AtomicU64,
}

/// Handle to the service; clones share state.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

fn experiment_id(n: u64) -> String {
    format!("exp-{n:04}")
}

fn validate_service_config(config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    if !matches!(config.strategy, Strategy::Bo | Strategy::FslBo) {
        return Err(Error::InvalidArgument(format!(
            "service experiments run bo or fsl-bo, not {}",
            config.strategy
        )));
    }
    Ok(())
}

impl Service {
    /// A service that keeps everything in memory.
    pub fn in_memory(mode: JobMode) -> Self {
        Self {
            inner: Arc::new(Inner {
                data_dir: None,
                mode,
                experiments: RwLock::new(BTreeMap::new()),
                next_id: AtomicU64::new(1),
            }),
        }
    }

    /// A service persisted under `data_dir`, reloading every experiment
    /// found there by replaying its observation log.
    pub fn open(data_dir: &Path, mode: JobMode) -> Result<Self> {
        std::fs::create_dir_all(data_dir)?;
        let mut experiments = BTreeMap::new();
        let mut max_id = 0;
        let mut entries: Vec<PathBuf> = std::fs::read_dir(data_dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.sort();
        for path in entries {
            if !ExperimentDir::is_experiment(&path) {
                continue;
            }
            let id = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            if let Some(n) = id.strip_prefix("exp-").and_then(|n| n.parse::<u64>().ok()) {
                max_id = max_id.max(n);
            }
            let exp = Self::recover(id.clone(), ExperimentDir(path))?;
            experiments.insert(id, Arc::new(exp));
        }
        log::info!("loaded {} experiments from {}", experiments.len(), data_dir.display());
        Ok(Self {
            inner: Arc::new(Inner {
                data_dir: Some(data_dir.to_path_buf()),
                mode,
                experiments: RwLock::new(experiments),
                next_id: AtomicU64::new(max_id + 1),
            }),
        })
    }

    /// Rebuilds an experiment from its files. The model is refit from the
    /// log with the seed the original job used, so it is the same model; a
    /// store older than the log gets a fresh refit cycle.
    fn recover(id: String, dir: ExperimentDir) -> Result<Experiment> {
        let config = dir.read_config()?;
        let observations = dir.read_log()?;
        let mut store = dir.read_store()?;
        let exp = Experiment {
            id,
            dir: Some(dir),
            state: Mutex::new(State {
                config: config.clone(),
                observations,
                store: Store::default(),
                snapshot: None,
                job_running: false,
                job_pending: false,
            }),
            idle: Condvar::new(),
            request_fits: AtomicU64::new(0),
        };
        let n = exp.lock().observations.len();
        let served: Vec<u64> = exp.lock().observations.iter().map(|o| o.suggestion_id).collect();
        for r in &mut store.records {
            if served.contains(&r.id) {
                r.state = SuggestionState::Closed;
            }
        }
        if n == 0 {
            exp.lock().store = store;
            return Ok(exp);
        }
        if store.model_version == n as u64 {
            let mut st = exp.lock();
            let data: Vec<(&Configuration, f64)> = st
                .observations
                .iter()
                .filter(|o| config.space.contains(&o.config))
                .map(|o| (&o.config, o.metric))
                .collect();
            if !data.is_empty() {
                let gp = fit_surrogate(&config.space, &data, &config.effective_box(), &config.bo, bo_seed(config.seed, n))?;
                let best_y = best_value(&data);
                st.snapshot = Some(Arc::new(ModelSnapshot {
                    version: n as u64,
                    space: config.space.clone(),
                    gp,
                    best_y,
                }));
            }
            st.store = store;
        } else {
            {
                let mut st = exp.lock();
                st.store = store;
                st.job_running = true;
            }
            job_loop(&exp);
        }
        Ok(exp)
    }

    fn get(&self, id: &str) -> Result<Arc<Experiment>> {
        self.inner
            .experiments
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownExperiment(id.to_string()))
    }

    pub fn experiment_ids(&self) -> Vec<String> {
        self.inner.experiments.read().unwrap_or_else(|e| e.into_inner()).keys().cloned().collect()
    }

    /// Registers an experiment with a store of `PREPOPULATED` fallback
    /// samples at model version 0.
    pub fn create_experiment(&self, config: ExperimentConfig) -> Result<String> {
        validate_service_config(&config)?;
        let id = experiment_id(self.inner.next_id.fetch_add(1, Ordering::SeqCst));
        let mut state = State {
            config,
            observations: Vec::new(),
            store: Store::default(),
            snapshot: None,
            job_running: false,
            job_pending: false,
        };
        for _ in 0..PREPOPULATED {
            let c = state.fallback_sample()?;
            state.store.push(c, None, 0);
        }
        let dir = match &self.inner.data_dir {
            Some(root) => {
                let d = ExperimentDir::create(root, &id)?;
                d.write_config(&state.config)?;
                d.write_store(&state.store)?;
                Some(d)
            }
            None => None,
        };
        let exp = Experiment {
            id: id.clone(),
            dir,
            state: Mutex::new(state),
            idle: Condvar::new(),
            request_fits: AtomicU64::new(0),
        };
        self.inner
            .experiments
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.clone(), Arc::new(exp));
        log::info!("created experiment {id}");
        Ok(id)
    }

    /// Serves the best open suggestion under the current model snapshot,
    /// or a fresh fallback sample when the store is empty. Never refits.
    pub fn request_suggestion(&self, id: &str) -> Result<SuggestionRecord> {
        let exp = self.get(id)?;
        let fits_before = fit_invocations();
        let result = (|| {
            let mut st = exp.lock();
            if st.exhausted() {
                return Err(Error::BudgetExhausted);
            }
            let snapshot = st.snapshot.clone();
            let i = match st.store.rank_open(snapshot.as_deref()) {
                Some(i) => i,
                None => {
                    let c = st.fallback_sample()?;
                    let version = st.store.model_version;
                    st.store.push(c, None, version)
                }
            };
            st.store.records[i].state = SuggestionState::Served;
            exp.persist_store(&st)?;
            Ok(st.store.records[i].clone())
        })();
        exp.request_fits.fetch_add(fit_invocations() - fits_before, Ordering::Relaxed);
        result
    }

    /// Records a metric for a served suggestion and schedules a refit. In
    /// background mode this returns before the refit finishes.
    pub fn report_observation(&self, id: &str, suggestion_id: u64, metric: f64) -> Result<()> {
        if !metric.is_finite() {
            return Err(Error::InvalidArgument(format!("metric must be finite, got {metric}")));
        }
        let exp = self.get(id)?;
        let start_job = {
            let mut st = exp.lock();
            let key = suggestion_id.to_string();
            let record = st.store.get_mut(suggestion_id).ok_or_else(|| Error::UnknownSuggestion(key.clone()))?;
            match record.state {
                SuggestionState::Open => return Err(Error::NotServed(key)),
                SuggestionState::Closed => return Err(Error::DuplicateReport(key)),
                SuggestionState::Served => {}
            }
            let config = record.config.clone();
            let obs = Observation {
                seq: st.observations.len(),
                suggestion_id,
                config,
                metric,
            };
            if let Some(d) = &exp.dir {
                d.append_observation(&obs)?;
            }
            st.store.get_mut(suggestion_id).expect("found above").state = SuggestionState::Closed;
            st.observations.push(obs);
            exp.persist_store(&st)?;
            if st.job_running {
                st.job_pending = true;
                false
            } else {
                st.job_running = true;
                true
            }
        };
        if start_job {
            match self.inner.mode {
                JobMode::Inline => job_loop(&exp),
                JobMode::Background => {
                    std::thread::Builder::new()
                        .name(format!("refit-{id}"))
                        .spawn(move || job_loop(&exp))?;
                }
            }
        }
        Ok(())
    }

    /// Changes bounds and/or budget. Open suggestions outside new bounds are
    /// closed; the next refit uses the new space.
    pub fn update_experiment(&self, id: &str, patch: &ExperimentPatch) -> Result<()> {
        let exp = self.get(id)?;
        let mut st = exp.lock();
        let mut config = st.config.clone();
        if let Some(budget) = patch.budget {
            let consumed = st.observations.len() as f64;
            if !(budget >= 1.0) || budget < consumed {
                return Err(Error::InvalidPatch(format!(
                    "budget {budget} must be >= 1 and >= the {consumed} already consumed"
                )));
            }
            to_micro(budget).map_err(|e| Error::InvalidPatch(e.to_string()))?;
            config.budget = budget;
        }
        if let Some(bounds) = &patch.bounds {
            config.space = patched_space(&config.space, bounds)?;
        }
        let closed = st.store.close_outside(&config.space);
        if let Some(d) = &exp.dir {
            d.write_config(&config)?;
        }
        st.config = config;
        exp.persist_store(&st)?;
        log::info!("{id}: patched, {closed} open suggestions closed");
        Ok(())
    }

    /// Best observation so far; ties go to the earliest.
    pub fn get_best(&self, id: &str) -> Result<(Configuration, f64)> {
        let exp = self.get(id)?;
        let st = exp.lock();
        best_seen(&as_history(&st.observations, st.config.strategy), f64::INFINITY)
    }

    pub fn status(&self, id: &str) -> Result<ExperimentStatus> {
        let exp = self.get(id)?;
        let st = exp.lock();
        Ok(ExperimentStatus {
            id: exp.id.clone(),
            model_version: st.store.model_version,
            observations: st.observations.len(),
            open_suggestions: st.store.open_count(),
            budget: st.config.budget,
            job_running: st.job_running,
        })
    }

    pub fn suggestions(&self, id: &str) -> Result<Vec<SuggestionRecord>> {
        Ok(self.get(id)?.lock().store.records.clone())
    }

    pub fn observations(&self, id: &str) -> Result<Vec<Observation>> {
        Ok(self.get(id)?.lock().observations.clone())
    }

    pub fn config(&self, id: &str) -> Result<ExperimentConfig> {
        Ok(self.get(id)?.lock().config.clone())
    }

    /// The current model snapshot, if any refit has produced one.
    pub fn snapshot(&self, id: &str) -> Result<Option<Arc<ModelSnapshot>>> {
        Ok(self.get(id)?.lock().snapshot.clone())
    }

    /// Blocks until no refit job is running or pending.
    pub fn wait_idle(&self, id: &str) -> Result<()> {
        let exp = self.get(id)?;
        let mut st = exp.lock();
        while st.job_running {
            st = exp.idle.wait(st).unwrap_or_else(|e| e.into_inner());
        }
        Ok(())
    }

    /// GP fits that ran while handling suggestion requests.
    pub fn request_path_fits(&self, id: &str) -> Result<u64> {
        Ok(self.get(id)?.request_fits.load(Ordering::Relaxed))
    }
}

fn as_history(observations: &[Observation], strategy: Strategy) -> ExperimentHistory {
    ExperimentHistory {
        records: observations
            .iter()
            .enumerate()
            .map(|(i, o)| HistoryRecord {
                strategy,
                seq: i,
                iteration: i,
                config: o.config.clone(),
                fidelity: 1.0,
                metric: Some(o.metric),
                cost: 1.0,
                work: 0,
                wall_time: None,
                budget_after: (i + 1) as f64,
            })
            .collect(),
    }
}

fn patched_space(space: &SearchSpace, bounds: &BTreeMap<String, [f64; 2]>) -> Result<SearchSpace> {
    let mut out = space.clone();
    for (name, &[lo, hi]) in bounds {
        let p = out
            .parameter_mut(name)
            .ok_or_else(|| Error::InvalidPatch(format!("unknown parameter `{name}`")))?;
        let domain = match &p.domain {
            Domain::Continuous { transform, .. } => Domain::Continuous {
                lower: lo,
                upper: hi,
                transform: *transform,
            },
            Domain::Integer { .. } => {
                if lo.fract() != 0.0 || hi.fract() != 0.0 {
                    return Err(Error::InvalidPatch(format!("`{name}` bounds must be integers")));
                }
                Domain::Integer {
                    lower: lo as i64,
                    upper: hi as i64,
                }
            }
            Domain::Categorical { .. } => {
                return Err(Error::InvalidPatch(format!("`{name}` is categorical and has no bounds")));
            }
        };
        *p = Parameter::new(name, domain).map_err(|e| Error::InvalidPatch(e.to_string()))?;
    }
    Ok(out)
}
