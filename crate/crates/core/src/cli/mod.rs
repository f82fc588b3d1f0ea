//! Command-line front end: `synth`, `features`, `train`, `eval-eer`, `scd`.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::evaluation::Method;

pub use config::{EvalConfig, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "tristou", version, about = "Triplet-loss speaker embeddings and their evaluation")]
pub struct Cli {
    /// JSON run configuration; missing fields take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed for every stochastic component.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus.
    Synth,
    /// Extract features from WAV files listed in an annotation file.
    Features(FeaturesArgs),
    /// Train one model per configured duration.
    Train(TrainArgs),
    /// Same/different trials scored by equal error rate.
    EvalEer(EvalArgs),
    /// Speaker change detection with purity/coverage curves.
    Scd(ScdArgs),
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Directory holding `<uri>.wav` for every annotated uri.
    #[arg(long)]
    pub audio_dir: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    /// Derivative-free set with static energy.
    #[arg(long)]
    pub baseline: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Comma-separated sequence durations, overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub durations: Option<Vec<f64>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Write a checkpoint every k epochs (0 = never).
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    /// Continue from a checkpoint; needs exactly one duration.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Comma-separated methods: embedding, divergence, bic.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Embedding model files; each is used at the duration it was trained on,
    /// a single model at every duration.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub durations: Option<Vec<f64>>,
    #[arg(long)]
    pub per_speaker: Option<usize>,
    #[arg(long)]
    pub include_training_speakers: bool,
}

#[derive(Debug, Args)]
pub struct ScdArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Comma-separated purity/coverage thresholds.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long)]
    pub peak_context: Option<f64>,
}

pub(crate) fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    names.iter().map(|n| n.trim().parse()).collect()
}

/// Runs a parsed command line inside a worker pool of the requested size.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    }
    .resolve(cli.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    pool.install(|| match &cli.command {
        Command::Synth => commands::synth(&cfg, &cli.out),
        Command::Features(a) => commands::features(&cfg, a, &cli.out),
        Command::Train(a) => commands::train(&cfg, a, &cli.out),
        Command::EvalEer(a) => commands::eval_eer(&cfg, a, &cli.out),
        Command::Scd(a) => commands::scd(&cfg, a, &cli.out),
    })
}

/// Entry point for the binary: parses `args`, runs, and reports failures as
/// a single `error: <kind>: <message>` line. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            1
        }
    }
}
