use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use drpc::model::Ablation;
use drpc::training::Precision;

#[derive(Debug, Parser)]
#[command(name = "drpc", version, about = "Relation extraction with dependency-edge supervision")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoint, log and manifest to a directory.
    Train(TrainArgs),
    /// Score a checkpoint on a corpus.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients on a toy instance.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic corpus with train/dev/test splits.
    Synth(SynthArgs),
    /// Representation similarity or sample-complexity analyses.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

/// Options shared by every command that trains. Flags override the config file.
#[derive(Debug, Args, Clone, Default)]
pub struct TrainOpts {
    /// JSON file with optional "model" and "train" sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for per-instance gradients.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub ablation: Option<Ablation>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight of the dependency loss.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub stop_at_dev_f1: Option<f64>,
    /// Pre-trained word vectors in text format.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "f64")]
    pub precision: Precision,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Only score instances from this domain.
    #[arg(long)]
    pub domain: Option<String>,
    /// Config file whose model section must match the checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the report here instead of only printing it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = drpc::check::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = drpc::check::DEFAULT_STEP)]
    pub step: f64,
    #[arg(long, default_value = "full")]
    pub ablation: Ablation,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Total number of instances over all splits.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Draw the test split from the domain-shifted distribution.
    #[arg(long)]
    pub shift: bool,
    #[arg(long, default_value_t = 0.1)]
    pub dev_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test_frac: f64,
    /// JSON generator settings; --n overrides its count.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Mean cosine similarity of train and test representations per test domain.
    Similarity(SimilarityArgs),
    /// Dev F1 as a function of the training-set fraction.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SimilarityArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Sample this many pairs per domain when there are more.
    #[arg(long, default_value_t = drpc::evaluation::DEFAULT_SAMPLE_CAP)]
    pub cap: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    /// Comma-separated fractions in (0, 1].
    #[arg(long, value_delimiter = ',', required = true)]
    pub ratios: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub opts: TrainOpts,
}
