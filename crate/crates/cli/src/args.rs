//! Command-line grammar. Every value flag is optional here so that a
//! `--config` file can supply it; defaults are applied after merging.

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mulch", version, about = "Hyperparameter optimization for gradient-boosted trees")]
pub struct Cli {
    /// JSON file of flag values (keys use underscores, e.g. "r_low");
    /// command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one optimization experiment on a task.
    Tune(TuneArgs),
    /// Compare strategies over tasks and repeated seeds.
    Benchmark(BenchmarkArgs),
    /// Per-parameter importance scores from evaluations.
    Fanova(FanovaArgs),
    /// Similarity of low-fidelity sweeps to the full-fidelity sweep.
    FidelityScores(FidelityArgs),
    /// Learn prior densities from past experiment histories.
    LearnPriors(LearnPriorsArgs),
    /// Serve the suggestion HTTP API.
    Serve(ServeArgs),
    /// Best-seen curves per strategy from history files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// `synthetic:NAME` for a bundled task, or a CSV file with a "label" column.
    #[arg(long)]
    pub task: Option<String>,
    /// Preset name (mulch5, xgb12, top(k)) or a space JSON file.
    #[arg(long)]
    pub space: Option<String>,
    /// random, bo, fsl-bo or mulch-mf.
    #[arg(long)]
    pub strategy: Option<String>,
    /// In full-fidelity evaluations.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Prior ensemble JSON; "shipped" for the bundled one, "none" for none.
    #[arg(long)]
    pub priors: Option<String>,
    /// Low fidelity for mulch-mf.
    #[arg(long)]
    pub r_low: Option<f64>,
    /// Early-stopping patience in boosting rounds; off when omitted.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Output directory for history.jsonl and summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep measured wall times in the output files.
    #[arg(long)]
    pub wall_time: bool,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Tasks, comma-separated or repeated.
    #[arg(long, value_delimiter = ',')]
    pub task: Vec<String>,
    /// Strategies, comma-separated or repeated; all four when omitted.
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub priors: Option<String>,
    #[arg(long)]
    pub r_low: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Worker threads for benchmark cells.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory for report.csv, report.json and curves.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report measured seconds instead of the reproducible work count.
    #[arg(long)]
    pub wall_time: bool,
}

#[derive(Debug, Args)]
pub struct FanovaArgs {
    /// CSV with one column per parameter plus "metric". With --task it is
    /// written instead of read.
    #[arg(long)]
    pub evals: Option<PathBuf>,
    #[arg(long)]
    pub space: Option<String>,
    /// Evaluate a quasi-random sample on this task instead of reading --evals.
    #[arg(long)]
    pub task: Option<String>,
    /// Sample size with --task.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output JSON file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FidelityArgs {
    /// CSV with columns config-id, fidelity, metric. With --task it is
    /// written instead of read.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Low fidelities to sweep with --task, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub fidelities: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output CSV file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LearnPriorsArgs {
    /// Glob of history JSON-lines files, one per past task.
    #[arg(long)]
    pub histories: Option<String>,
    #[arg(long)]
    pub space: Option<String>,
    /// Top configurations taken from each history.
    #[arg(long, conflicts_with = "top_fraction")]
    pub per_task: Option<usize>,
    /// Alternatively, a fraction of the shortest history's length.
    #[arg(long)]
    pub top_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output JSON file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub host: Option<String>,
    /// Where experiments are persisted; defaults to $MULCH_DATA_DIR.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched recursively for history .jsonl files.
    #[arg(long)]
    pub runs: Option<PathBuf>,
    /// Output CSV file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
