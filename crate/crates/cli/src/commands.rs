//! Subcommand implementations. Arguments are fully validated before any
//! output file is created.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use mulch_core::engine::{
    benchmark, best_seen, quasi_sweep, run_experiment_with, BenchmarkOptions, BenchmarkReport, ExperimentConfig,
    ExperimentHistory, HistoryWriter, Strategy, SweepRow, TimeMeasure,
};
use mulch_core::fanova::{compute_importances, rank_parameters, EvaluationRecord, ForestConfig, Importance};
use mulch_core::fidelity::{score_table, FidelitySweep};
use mulch_core::gbt::{load_task, EarlyStopConfig};
use mulch_core::objective::GbtObjective;
use mulch_core::priors::{learn_priors, shipped_priors, LearnOptions, PoolSize, PriorEnsemble};
use mulch_core::service::{JobMode, Service};
use mulch_core::{Configuration, Domain, Error, Parameter, SearchSpace, Value};

use crate::args::{
    BenchmarkArgs, Cli, Command, FanovaArgs, FidelityArgs, LearnPriorsArgs, ReportArgs, ServeArgs, TuneArgs,
};
use crate::{usage, CliError, CliResult, FileConfig};

pub const DEFAULT_SPACE: &str = "mulch5";
pub const DEFAULT_BUDGET: f64 = 50.0;
pub const DEFAULT_REPEATS: usize = 5;
pub const DEFAULT_FANOVA_SAMPLES: usize = 1024;
pub const DEFAULT_SWEEP_SAMPLES: usize = 256;
pub const DEFAULT_LOW_FIDELITIES: [f64; 4] = [0.1, 0.3, 0.5, 0.7];
pub const DEFAULT_PORT: u16 = 8080;
pub const DATA_DIR_ENV: &str = "MULCH_DATA_DIR";

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Tune(_) => "tune",
            Command::Benchmark(_) => "benchmark",
            Command::Fanova(_) => "fanova",
            Command::FidelityScores(_) => "fidelity-scores",
            Command::LearnPriors(_) => "learn-priors",
            Command::Serve(_) => "serve",
            Command::Report(_) => "report",
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Tune(a) => tune(a, &cfg),
        Command::Benchmark(a) => run_benchmark(a, &cfg),
        Command::Fanova(a) => fanova(a, &cfg),
        Command::FidelityScores(a) => fidelity_scores(a, &cfg),
        Command::LearnPriors(a) => learn(a, &cfg),
        Command::Serve(a) => serve(a, &cfg),
        Command::Report(a) => report(a, &cfg),
    }
}

fn required<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing {flag}")))
}

fn as_usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

/// A preset name or a space JSON file.
pub fn parse_space(spec: &str) -> CliResult<SearchSpace> {
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(SearchSpace::from_json(&fs::read_to_string(path)?)?);
    }
    SearchSpace::preset(spec).map_err(as_usage)
}

fn parse_strategy(s: &str) -> CliResult<Strategy> {
    s.parse().map_err(as_usage)
}

/// `shipped` (the default), `none`, or an ensemble JSON file.
pub fn load_priors(spec: Option<&str>) -> CliResult<Option<PriorEnsemble>> {
    match spec {
        None | Some("shipped") => Ok(Some(shipped_priors())),
        Some("none") => Ok(None),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read priors {path}: {e}")))?;
            Ok(Some(PriorEnsemble::from_json(&text)?))
        }
    }
}

fn early_stop(patience: Option<usize>) -> CliResult<EarlyStopConfig> {
    match patience {
        Some(n) => EarlyStopConfig::with_patience(n).map_err(as_usage),
        None => Ok(EarlyStopConfig::disabled()),
    }
}

fn positive<T: PartialOrd + Default + Copy + std::fmt::Display>(v: T, flag: &str) -> CliResult<T> {
    if v > T::default() {
        Ok(v)
    } else {
        usage(format!("{flag} must be positive, got {v}"))
    }
}

/// Runs `f` on a dedicated pool of `jobs` threads, or the global pool.
fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> CliResult<R> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Runtime(Error::InvalidArgument(e.to_string())))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn create_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    create_parent(path)?;
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct TuneSummary {
    task: String,
    strategy: Strategy,
    parameters: Vec<String>,
    budget: f64,
    seed: u64,
    evaluations: usize,
    consumed: f64,
    best_metric: Option<f64>,
    best_config: Option<Configuration>,
    total_work: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time: Option<f64>,
}

fn tune(a: TuneArgs, cfg: &FileConfig) -> CliResult<()> {
    let task_spec: String = required(cfg.pick(a.task, "task")?, "--task")?;
    let space = parse_space(&cfg.pick(a.space, "space")?.unwrap_or_else(|| DEFAULT_SPACE.into()))?;
    let strategy = parse_strategy(&cfg.pick(a.strategy, "strategy")?.unwrap_or_else(|| "fsl-bo".into()))?;
    let budget = cfg.pick(a.budget, "budget")?.unwrap_or(DEFAULT_BUDGET);
    let seed = cfg.pick(a.seed, "seed")?.unwrap_or(0);
    let priors_spec: Option<String> = cfg.pick(a.priors, "priors")?;
    let r_low = cfg.pick(a.r_low, "r_low")?.unwrap_or(0.1);
    let stop = early_stop(cfg.pick(a.patience, "patience")?)?;
    let out: PathBuf = cfg.pick(a.out, "out")?.unwrap_or_else(|| PathBuf::from("."));
    let keep_wall = cfg.pick_flag(a.wall_time, "wall_time")?;

    let mut config = ExperimentConfig::new(space, strategy, budget, seed);
    config.r_low = r_low;
    config.early_stop = stop;
    if matches!(strategy, Strategy::FslBo | Strategy::MulchMf) {
        config.priors = load_priors(priors_spec.as_deref())?;
    }
    config.validate().map_err(as_usage)?;
    let task = load_task(&task_spec)?;
    let objective = GbtObjective::new(task, stop);

    fs::create_dir_all(&out)?;
    let mut writer = HistoryWriter::create(&out.join("history.jsonl"), keep_wall)?;
    let history = run_experiment_with(&config, &objective, &mut |r| writer.write(r))?;
    let best = best_seen(&history, f64::INFINITY).ok();
    let summary = TuneSummary {
        task: objective.task.name.clone(),
        strategy,
        parameters: config.space.parameters().iter().map(|p| p.name.clone()).collect(),
        budget,
        seed,
        evaluations: history.len(),
        consumed: history.consumed(),
        best_metric: best.as_ref().map(|b| b.1),
        best_config: best.map(|b| b.0),
        total_work: history.total_work(),
        wall_time: keep_wall.then(|| history.total_wall_time()),
    };
    write_json(&out.join("summary.json"), &summary)?;
    match summary.best_metric {
        Some(m) => println!("{}: best {m:.4} over {} evaluations", summary.task, summary.evaluations),
        None => println!("{}: no successful full-fidelity evaluation", summary.task),
    }
    Ok(())
}

fn run_benchmark(a: BenchmarkArgs, cfg: &FileConfig) -> CliResult<()> {
    let tasks: Vec<String> = cfg.pick_list(a.task, "task")?;
    if tasks.is_empty() {
        return usage("missing --task");
    }
    let strategies: Vec<Strategy> = match cfg.pick_list(a.strategy, "strategy")? {
        s if s.is_empty() => Strategy::ALL.to_vec(),
        s => s.iter().map(|n: &String| parse_strategy(n)).collect::<CliResult<_>>()?,
    };
    let repeats = positive(cfg.pick(a.repeats, "repeats")?.unwrap_or(DEFAULT_REPEATS), "--repeats")?;
    let space = parse_space(&cfg.pick(a.space, "space")?.unwrap_or_else(|| DEFAULT_SPACE.into()))?;
    let budget = cfg.pick(a.budget, "budget")?.unwrap_or(DEFAULT_BUDGET);
    let seed = cfg.pick(a.seed, "seed")?.unwrap_or(0);
    let priors_spec: Option<String> = cfg.pick(a.priors, "priors")?;
    let r_low = cfg.pick(a.r_low, "r_low")?.unwrap_or(0.1);
    let stop = early_stop(cfg.pick(a.patience, "patience")?)?;
    let jobs = cfg.pick(a.jobs, "jobs")?.map(|j| positive(j, "--jobs")).transpose()?;
    let out: PathBuf = cfg.pick(a.out, "out")?.unwrap_or_else(|| PathBuf::from("."));
    let wall = cfg.pick_flag(a.wall_time, "wall_time")?;

    let mut opts = BenchmarkOptions::new(space, strategies, repeats, budget, seed);
    opts.priors = load_priors(priors_spec.as_deref())?;
    opts.r_low = r_low;
    opts.early_stop = stop;
    opts.time_measure = if wall { TimeMeasure::Wall } else { TimeMeasure::Work };
    for &s in &opts.strategies {
        let mut c = ExperimentConfig::new(opts.space.clone(), s, budget, seed);
        c.r_low = r_low;
        c.priors = opts.priors.clone();
        c.validate().map_err(as_usage)?;
    }
    let datasets = tasks.iter().map(|t| load_task(t)).collect::<Result<Vec<_>, _>>()?;
    let report = with_jobs(jobs, || benchmark(&datasets, &opts))??;
    fs::create_dir_all(&out)?;
    report.write_csv(&out.join("report.csv"))?;
    report.write_json(&out.join("report.json"))?;
    write_curves(&report, &out.join("curves.csv"))?;
    for row in &report.rows {
        println!(
            "{:<12} {:<9} median {:.4} [{:.4}, {:.4}]",
            row.task, row.strategy, row.median, row.q1, row.q3
        );
    }
    Ok(())
}

/// Median best-seen curves in long format.
fn write_curves(report: &BenchmarkReport, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["task", "strategy", "budget", "best"])?;
    for row in &report.rows {
        for (i, v) in row.curve.iter().enumerate() {
            w.write_record([
                row.task.clone(),
                row.strategy.to_string(),
                (i + 1).to_string(),
                v.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_value(p: &Parameter, s: &str) -> Option<Value> {
    let s = s.trim();
    match &p.domain {
        Domain::Integer { .. } => s
            .parse::<i64>()
            .ok()
            .or_else(|| s.parse::<f64>().ok().filter(|f| f.fract() == 0.0).map(|f| f as i64))
            .map(Value::Int),
        Domain::Continuous { .. } => s.parse::<f64>().ok().map(Value::Float),
        Domain::Categorical { .. } => Some(Value::Str(s.to_string())),
    }
}

pub fn read_evals(path: &Path, space: &SearchSpace) -> CliResult<Vec<EvaluationRecord>> {
    let data_err = |m: String| CliError::Runtime(Error::Data(format!("{}: {m}", path.display())));
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| data_err(format!("missing column `{name}`")))
    };
    let metric_col = column("metric")?;
    let cols = space.parameters().iter().map(|p| column(&p.name)).collect::<CliResult<Vec<_>>>()?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut config = Configuration::default();
        for (p, &c) in space.parameters().iter().zip(&cols) {
            let v = parse_value(p, &rec[c]).ok_or_else(|| data_err(format!("row {}: bad `{}`", line + 2, p.name)))?;
            config.insert(p.name.clone(), v);
        }
        let metric = rec[metric_col]
            .trim()
            .parse::<f64>()
            .map_err(|_| data_err(format!("row {}: bad metric", line + 2)))?;
        out.push(EvaluationRecord { config, metric });
    }
    Ok(out)
}

fn write_evals(path: &Path, space: &SearchSpace, records: &[EvaluationRecord]) -> CliResult<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = space.parameters().iter().map(|p| p.name.as_str()).collect();
    header.push("metric");
    w.write_record(&header)?;
    for r in records {
        let mut row: Vec<String> = space
            .parameters()
            .iter()
            .map(|p| r.config.get(&p.name).map(|v| v.to_string()).unwrap_or_default())
            .collect();
        row.push(r.metric.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ImportanceOutput {
    scores: Vec<Importance>,
    residual: f64,
    degenerate: bool,
    ranking: Vec<String>,
}

fn fanova(a: FanovaArgs, cfg: &FileConfig) -> CliResult<()> {
    let space = parse_space(&cfg.pick(a.space, "space")?.unwrap_or_else(|| "xgb12".into()))?;
    let evals: Option<PathBuf> = cfg.pick(a.evals, "evals")?;
    let task: Option<String> = cfg.pick(a.task, "task")?;
    let samples = positive(cfg.pick(a.samples, "samples")?.unwrap_or(DEFAULT_FANOVA_SAMPLES), "--samples")?;
    let trees = positive(cfg.pick(a.trees, "trees")?.unwrap_or(ForestConfig::default().n_trees), "--trees")?;
    let seed = cfg.pick(a.seed, "seed")?.unwrap_or(0);
    let jobs = cfg.pick(a.jobs, "jobs")?.map(|j| positive(j, "--jobs")).transpose()?;
    let out: PathBuf = cfg.pick(a.out, "out")?.unwrap_or_else(|| PathBuf::from("importances.json"));
    if task.is_none() && evals.is_none() {
        return usage("give --evals or --task");
    }

    let records = match &task {
        Some(t) => {
            let objective = GbtObjective::new(load_task(t)?, EarlyStopConfig::disabled());
            let sweep = with_jobs(jobs, || quasi_sweep(&objective, &space, samples, &[1.0], seed))??;
            let records = sweep.full_fidelity_records();
            if let Some(path) = &evals {
                write_evals(path, &space, &records)?;
            }
            records
        }
        None => read_evals(evals.as_deref().expect("checked above"), &space)?,
    };
    let forest = ForestConfig {
        n_trees: trees,
        ..ForestConfig::default()
    };
    let report = with_jobs(jobs, || compute_importances(&records, &space, forest, seed))??;
    let output = ImportanceOutput {
        ranking: rank_parameters(&report),
        scores: report.scores,
        residual: report.residual,
        degenerate: report.degenerate,
    };
    write_json(&out, &output)?;
    for s in &output.scores {
        println!("{:<18} {:.4}", s.parameter, s.score);
    }
    Ok(())
}

pub fn read_sweep(path: &Path) -> CliResult<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let expected = ["config-id", "fidelity", "metric"];
    if headers.iter().map(str::trim).collect::<Vec<_>>() != expected {
        return Err(CliError::Runtime(Error::Data(format!(
            "{}: expected columns {}",
            path.display(),
            expected.join(",")
        ))));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = || CliError::Runtime(Error::Data(format!("{}: row {}", path.display(), line + 2)));
        rows.push(SweepRow {
            config_id: rec[0].trim().to_string(),
            fidelity: rec[1].trim().parse().map_err(|_| bad())?,
            metric: rec[2].trim().parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}

fn write_sweep(path: &Path, rows: &[SweepRow]) -> CliResult<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["config-id", "fidelity", "metric"])?;
    for r in rows {
        w.write_record([r.config_id.clone(), r.fidelity.to_string(), r.metric.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn fidelity_scores(a: FidelityArgs, cfg: &FileConfig) -> CliResult<()> {
    let sweep_path: Option<PathBuf> = cfg.pick(a.sweep, "sweep")?;
    let task: Option<String> = cfg.pick(a.task, "task")?;
    let space = parse_space(&cfg.pick(a.space, "space")?.unwrap_or_else(|| DEFAULT_SPACE.into()))?;
    let samples = positive(cfg.pick(a.samples, "samples")?.unwrap_or(DEFAULT_SWEEP_SAMPLES), "--samples")?;
    let mut fidelities: Vec<f64> = cfg.pick_list(a.fidelities, "fidelities")?;
    if fidelities.is_empty() {
        fidelities = DEFAULT_LOW_FIDELITIES.to_vec();
    }
    if fidelities.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return usage("--fidelities must lie in (0, 1]");
    }
    let seed = cfg.pick(a.seed, "seed")?.unwrap_or(0);
    let jobs = cfg.pick(a.jobs, "jobs")?.map(|j| positive(j, "--jobs")).transpose()?;
    let out: PathBuf = cfg.pick(a.out, "out")?.unwrap_or_else(|| PathBuf::from("scores.csv"));
    if task.is_none() && sweep_path.is_none() {
        return usage("give --sweep or --task");
    }

    let rows = match &task {
        Some(t) => {
            let objective = GbtObjective::new(load_task(t)?, EarlyStopConfig::disabled());
            let sweep = with_jobs(jobs, || quasi_sweep(&objective, &space, samples, &fidelities, seed))??;
            if let Some(path) = &sweep_path {
                write_sweep(path, &sweep.rows)?;
            }
            sweep.rows
        }
        None => read_sweep(sweep_path.as_deref().expect("checked above"))?,
    };
    let triples: Vec<(String, f64, f64)> = rows.iter().map(|r| (r.config_id.clone(), r.fidelity, r.metric)).collect();
    let table = score_table(&FidelitySweep::from_rows(&triples)?)?;
    create_parent(&out)?;
    let mut w = csv::Writer::from_path(&out)?;
    w.write_record(["fidelity", "correlation", "precision", "recall"])?;
    for r in &table {
        w.write_record([
            r.fidelity.to_string(),
            r.correlation.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
        ])?;
        println!(
            "r={:<5} correlation {:.4} precision {:.4} recall {:.4}",
            r.fidelity, r.correlation, r.precision, r.recall
        );
    }
    w.flush()?;
    Ok(())
}

/// A history file's task name: its stem, or its directory's name for the
/// `history.jsonl` files that `tune` writes.
pub fn history_task_name(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("task");
    if stem == "history" {
        if let Some(dir) = path.parent().and_then(|p| p.file_name()).and_then(|n| n.to_str()) {
            return dir.to_string();
        }
    }
    stem.to_string()
}

fn learn(a: LearnPriorsArgs, cfg: &FileConfig) -> CliResult<()> {
    let pattern: String = required(cfg.pick(a.histories, "histories")?, "--histories")?;
    let space = parse_space(&cfg.pick(a.space, "space")?.unwrap_or_else(|| DEFAULT_SPACE.into()))?;
    let per_task: Option<usize> = cfg.pick(a.per_task, "per_task")?;
    let top_fraction: Option<f64> = cfg.pick(a.top_fraction, "top_fraction")?;
    let seed = cfg.pick(a.seed, "seed")?.unwrap_or(0);
    let out: PathBuf = cfg.pick(a.out, "out")?.unwrap_or_else(|| PathBuf::from("priors.json"));
    let pool = match (per_task, top_fraction) {
        (Some(_), Some(_)) => return usage("give --per-task or --top-fraction, not both"),
        (_, Some(f)) => PoolSize::TopFraction(f),
        (k, None) => PoolSize::PerTask(positive(k.unwrap_or(10), "--per-task")?),
    };
    let mut paths: Vec<PathBuf> = glob::glob(&pattern)
        .map_err(|e| CliError::Usage(format!("bad --histories pattern: {e}")))?
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Runtime(Error::Io(e.into())))?;
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Runtime(Error::InsufficientData(format!("no files match `{pattern}`"))));
    }
    let histories = paths
        .iter()
        .map(|p| Ok(ExperimentHistory::read_jsonl(p)?.to_task_history(&history_task_name(p))))
        .collect::<CliResult<Vec<_>>>()?;
    let options = LearnOptions {
        pool,
        seed,
        ..LearnOptions::default()
    };
    let ensemble = learn_priors(&histories, &space, &options)?;
    create_parent(&out)?;
    fs::write(&out, ensemble.to_json() + "\n")?;
    println!("learned priors from {} histories", histories.len());
    Ok(())
}

/// Every `.jsonl` file under `dir`, sorted.
fn history_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "jsonl") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Best-seen curves per strategy, one column each, at integer budgets.
/// Several runs of one strategy are combined by their median once every
/// run has a full-fidelity observation.
fn report(a: ReportArgs, cfg: &FileConfig) -> CliResult<()> {
    let runs: PathBuf = required(cfg.pick(a.runs, "runs")?, "--runs")?;
    let out: PathBuf = cfg.pick(a.out, "out")?.unwrap_or_else(|| PathBuf::from("curves.csv"));
    if !runs.is_dir() {
        return usage(format!("--runs {} is not a directory", runs.display()));
    }
    let mut by_strategy: BTreeMap<Strategy, Vec<ExperimentHistory>> = BTreeMap::new();
    for path in history_files(&runs)? {
        let h = ExperimentHistory::read_jsonl(&path)?;
        if let Some(first) = h.records.first() {
            by_strategy.entry(first.strategy).or_default().push(h);
        }
    }
    if by_strategy.is_empty() {
        return Err(CliError::Runtime(Error::NoObservations(format!(
            "no history files under {}",
            runs.display()
        ))));
    }
    let horizon = by_strategy
        .values()
        .flatten()
        .map(|h| h.consumed())
        .fold(0.0, f64::max)
        .ceil() as usize;
    create_parent(&out)?;
    let mut w = csv::Writer::from_path(&out)?;
    let mut header = vec!["budget".to_string()];
    header.extend(by_strategy.keys().map(|s| s.to_string()));
    w.write_record(&header)?;
    for b in 1..=horizon {
        let mut row = vec![b.to_string()];
        for hs in by_strategy.values() {
            let vals: Option<Vec<f64>> = hs.iter().map(|h| best_seen(h, b as f64).ok().map(|x| x.1)).collect();
            row.push(vals.map(|mut v| median(&mut v).to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    println!("{} strategies, budgets 1..={horizon}", by_strategy.len());
    Ok(())
}

fn serve(a: ServeArgs, cfg: &FileConfig) -> CliResult<()> {
    let port = cfg.pick(a.port, "port")?.unwrap_or(DEFAULT_PORT);
    let host: String = cfg.pick(a.host, "host")?.unwrap_or_else(|| "127.0.0.1".into());
    let data_dir: PathBuf = match cfg.pick(a.data_dir, "data_dir")? {
        Some(d) => d,
        None => std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("mulch-data")),
    };
    let service = Service::open(&data_dir, JobMode::Background)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
        eprintln!("listening on http://{} (data in {})", listener.local_addr()?, data_dir.display());
        axum::serve(listener, crate::http::router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}
