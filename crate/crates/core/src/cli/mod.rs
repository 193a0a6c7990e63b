//! `hlab` command-line front end.
//!
//! Every subcommand writes its artifacts into `--out-dir` along with a
//! `<command>.manifest.json` listing inputs, outputs and effective parameters.
//! Exit status: 0 on success, 1 on a module error, 2 on a usage error.

mod commands;
mod tables;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dynamics::{Estimator, ForgettingMode};
use crate::error::{HlabError, Result};

pub use tables::{read_class_recall, read_hardness_csv, write_hardness_csv};

pub const THREADS_ENV: &str = "HLAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hlab", version, about = "Hardness estimation and hardness-based data curation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving all outputs.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads; falls back to HLAB_THREADS, then to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the four-blob fixture (or a custom blob spec) with a stratified holdout.
    Synth(SynthArgs),
    /// Train reference linear models and write their dynamics logs.
    TrainRef(TrainArgs),
    /// Ensemble hardness from dynamics logs.
    Estimate(EstimateArgs),
    /// Class hardness, resampling ratios and target counts.
    Ratios(RatiosArgs),
    /// Index-level resampling plan.
    Resample(ResampleArgs),
    /// Dataset- or class-level pruning plans.
    Prune(PruneArgs),
    /// Overlap between two pruning plans.
    Overlap(OverlapArgs),
    /// Transition metrics over growing ensembles.
    Stability(StabilityArgs),
    /// Remove the hardest samples as presumed label noise.
    Denoise(DenoiseArgs),
    /// Data-based hardness metrics and distribution families.
    Metrics(MetricsArgs),
    /// Spearman correlation between class hardness and class recall.
    Correlate(CorrelateArgs),
    /// Run the whole pipeline on the four-blob fixture.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::TrainRef(_) => "train-ref",
            Command::Estimate(_) => "estimate",
            Command::Ratios(_) => "ratios",
            Command::Resample(_) => "resample",
            Command::Prune(_) => "prune",
            Command::Overlap(_) => "overlap",
            Command::Stability(_) => "stability",
            Command::Denoise(_) => "denoise",
            Command::Metrics(_) => "metrics",
            Command::Correlate(_) => "correlate",
            Command::Report(_) => "report",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Synth(a) => &a.common,
            Command::TrainRef(a) => &a.common,
            Command::Estimate(a) => &a.common,
            Command::Ratios(a) => &a.common,
            Command::Resample(a) => &a.common,
            Command::Prune(a) => &a.common,
            Command::Overlap(a) => &a.common,
            Command::Stability(a) => &a.common,
            Command::Denoise(a) => &a.common,
            Command::Metrics(a) => &a.common,
            Command::Correlate(a) => &a.common,
            Command::Report(a) => &a.common,
        }
    }

    fn parameters(&self) -> serde_json::Value {
        let v = match self {
            Command::Synth(a) => serde_json::to_value(a),
            Command::TrainRef(a) => serde_json::to_value(a),
            Command::Estimate(a) => serde_json::to_value(a),
            Command::Ratios(a) => serde_json::to_value(a),
            Command::Resample(a) => serde_json::to_value(a),
            Command::Prune(a) => serde_json::to_value(a),
            Command::Overlap(a) => serde_json::to_value(a),
            Command::Stability(a) => serde_json::to_value(a),
            Command::Denoise(a) => serde_json::to_value(a),
            Command::Metrics(a) => serde_json::to_value(a),
            Command::Correlate(a) => serde_json::to_value(a),
            Command::Report(a) => serde_json::to_value(a),
        };
        let mut v = v.unwrap_or(serde_json::Value::Null);
        if let Some(obj) = v.as_object_mut() {
            obj.remove("common");
        }
        v
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Samples per class of the four-blob fixture.
    #[arg(long, default_value_t = 500)]
    pub per_class: usize,
    /// JSON blob spec replacing the fixture; its seed is overridden by --seed.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub train: PathBuf,
    /// Held-out set for precision/recall; the training set is used when absent.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub models: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [60, 120, 160])]
    pub decay_epochs: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    pub decay_factor: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub estimator: Estimator,
    #[arg(long, num_args = 1.., required = true)]
    pub dynamics: Vec<PathBuf>,
    /// 0-based epoch read by EL2N.
    #[arg(long, default_value_t = 20)]
    pub probe_epoch: usize,
    #[arg(long, default_value = "event-count", value_parser = parse_forgetting_mode)]
    pub forgetting_mode: ForgettingMode,
    /// Output file name inside --out-dir; defaults to hardness_<estimator>.csv.
    #[arg(long)]
    pub output: Option<String>,
}

fn parse_forgetting_mode(s: &str) -> std::result::Result<ForgettingMode, String> {
    match s {
        "event-count" => Ok(ForgettingMode::EventCount),
        "never-learned-max" => Ok(ForgettingMode::NeverLearnedMax),
        other => Err(format!("unknown forgetting mode {other:?}")),
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RatiosArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub hardness: PathBuf,
    /// HFEA file supplying the labels.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ResampleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub hardness: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// random | smote | easy | hard
    #[arg(long, default_value = "random")]
    pub strategy: crate::resampling::Strategy,
    /// full | no-oversampling | no-undersampling
    #[arg(long, default_value = "full")]
    pub mode: crate::resampling::ResampleMode,
    #[arg(long, default_value_t = crate::resampling::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = crate::resampling::SMOTE_NEIGHBORS)]
    pub smote_neighbors: usize,
    /// Also write the resampled feature set.
    #[arg(long)]
    pub materialize: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PruneArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub hardness: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// dlp | clp
    #[arg(long, default_value = "dlp")]
    pub mode: crate::pruning::PruneMode,
    #[arg(long, value_delimiter = ',', required = true)]
    pub rate: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OverlapArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub common: Common,
    /// resampling | pruning | class-accuracy
    #[arg(long)]
    pub task: crate::stability::StabilityTask,
    #[arg(long, default_value = "aum")]
    pub estimator: Estimator,
    /// Per-model dynamics logs, in ensemble order.
    #[arg(long, num_args = 1..)]
    pub dynamics: Vec<PathBuf>,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5])]
    pub rates: Vec<f64>,
    /// eval_metrics.csv from train-ref, for the class-accuracy task.
    #[arg(long)]
    pub eval_metrics: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub probe_epoch: usize,
    /// Report the smallest ensemble size from which every series stays at or below this.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DenoiseArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub hardness: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// fraction | elbow
    #[arg(long, default_value = "elbow")]
    pub mode: crate::denoise::DenoiseMode,
    #[arg(long)]
    pub fraction: Option<f64>,
    /// shifted | raw
    #[arg(long, default_value = "shifted", value_parser = parse_transform)]
    pub transform: crate::denoise::MassTransform,
}

fn parse_transform(s: &str) -> std::result::Result<crate::denoise::MassTransform, String> {
    match s {
        "shifted" => Ok(crate::denoise::MassTransform::Shifted),
        "raw" => Ok(crate::denoise::MassTransform::Raw),
        other => Err(format!("unknown mass transform {other:?}")),
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub features: PathBuf,
    /// Neighbourhood size for the kNN metrics.
    #[arg(long, default_value_t = crate::geometry::DEFAULT_K)]
    pub k: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub hardness: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// class_recall.csv from train-ref.
    #[arg(long)]
    pub recall: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 500)]
    pub per_class: usize,
    #[arg(long, default_value_t = 8)]
    pub models: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value = "aum")]
    pub estimator: Estimator,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value = "random")]
    pub strategy: crate::resampling::Strategy,
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5, 0.7])]
    pub rates: Vec<f64>,
    #[arg(long, default_value_t = 40)]
    pub k: usize,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub parameters: serde_json::Value,
    pub status: String,
    pub error: Option<String>,
}

/// Tracks files read and written by one invocation.
#[derive(Debug)]
pub struct Run {
    out_dir: PathBuf,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl Run {
    fn new(out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir).map_err(|e| HlabError::io(out_dir, e))?;
        Ok(Run {
            out_dir: out_dir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Registers an input path and returns it.
    fn input<'a>(&mut self, p: &'a Path) -> &'a Path {
        let s = p.display().to_string();
        if !self.inputs.contains(&s) {
            self.inputs.push(s);
        }
        p
    }

    /// Registers an output file name inside the out dir and returns its path.
    fn output(&mut self, name: &str) -> PathBuf {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        self.out_dir.join(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.output(name);
        std::fs::write(&path, text).map_err(|e| HlabError::io(&path, e))?;
        Ok(path)
    }
}

fn effective_threads(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var(THREADS_ENV).ok()?.parse().ok())
        .filter(|&t| t > 0)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs one parsed command and writes its manifest, also on failure.
pub fn execute(cmd: &Command) -> Result<()> {
    let common = cmd.common();
    let threads = effective_threads(common.threads);
    let mut run = Run::new(&common.out_dir)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| HlabError::Parameter(format!("thread pool: {e}")))?;
    let result = pool.install(|| commands::dispatch(cmd, &mut run));
    let manifest = RunManifest {
        command: cmd.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: common.seed,
        threads,
        inputs: run.inputs.clone(),
        outputs: run.outputs.clone(),
        parameters: cmd.parameters(),
        status: if result.is_ok() { "ok" } else { "error" }.to_string(),
        error: result.as_ref().err().map(|e| e.to_string()),
    };
    let path = common.out_dir.join(format!("{}.manifest.json", cmd.name()));
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").map_err(|e| HlabError::io(&path, e))?;
    result
}
