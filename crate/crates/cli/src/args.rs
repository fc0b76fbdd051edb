use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use idsel::lexical::Smoothing;
use idsel::selectors::{LlsMode, Method};

#[derive(Debug, Parser)]
#[command(name = "idsel", version, about = "Informed data selection for few-shot annotation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Order a corpus and write a selection file.
    Select(SelectArgs),
    /// Simulate annotation with gold labels and report θ over an n_shots grid.
    Simulate(SimulateArgs),
    /// Train a nearest-centroid classifier on each simulated annotated set
    /// and score it on a held-out split.
    Evaluate(EvaluateArgs),
    /// Run the annotation HTTP service.
    Serve(ServeArgs),
    /// Write a seeded synthetic corpus, test split and embeddings.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LlsModeArg {
    Previous,
    All,
}

impl From<LlsModeArg> for LlsMode {
    fn from(m: LlsModeArg) -> Self {
        match m {
            LlsModeArg::Previous => LlsMode::PreviousOnly,
            LlsModeArg::All => LlsMode::AllKept,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmoothingArg {
    None,
    Epsilon,
}

impl From<SmoothingArg> for Smoothing {
    fn from(s: SmoothingArg) -> Self {
        match s {
            SmoothingArg::None => Smoothing::None,
            SmoothingArg::Epsilon => Smoothing::AddEpsilon,
        }
    }
}

/// Selector parameters shared by every batch command.
#[derive(Debug, Clone, Args)]
pub struct SelectorArgs {
    /// Corpus JSONL (`{"id", "text", "label"?}` per line).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Binary embedding file; required for rss and oc.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// LLS threshold: drop a document whose BLEU to the reference exceeds it.
    #[arg(long, default_value_t = idsel::selectors::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, value_enum, default_value = "previous")]
    pub lls_mode: LlsModeArg,
    #[arg(long, default_value_t = 4)]
    pub max_ngram: usize,
    #[arg(long, value_enum, default_value = "none")]
    pub smoothing: SmoothingArg,
    /// OC: defaults to max(5, n/100).
    #[arg(long)]
    pub min_cluster_size: Option<usize>,
    /// OC: defaults to 5, capped at the minimum cluster size.
    #[arg(long)]
    pub min_samples: Option<usize>,
    /// Seed for random and lls; repeat i of a sweep uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub selector: SelectorArgs,
    #[arg(long)]
    pub method: Method,
    /// Selection file; run metadata goes to `<out>.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// One or more methods, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub method: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_values_t = idsel::experiment::DEFAULT_N_SHOTS)]
    pub n_shots: Vec<usize>,
    /// Runs per stochastic method; deterministic methods run once.
    #[arg(long, default_value_t = idsel::experiment::DEFAULT_REPEATS)]
    pub repeats: usize,
    /// JSON report with a metadata header. The text table goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub selector: SelectorArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub selector: SelectorArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Held-out labeled documents; never seen by the selectors.
    #[arg(long)]
    pub test_file: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Default corpus for create requests that name none.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Append-only session journal; sessions survive restarts when set.
    #[arg(long)]
    pub journal: Option<PathBuf>,
    /// Directory with the UI bundle, served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Corpora larger than this are ordered in the background.
    #[arg(long, default_value_t = idsel_service::DEFAULT_BACKGROUND_THRESHOLD)]
    pub background_threshold: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Pool documents per class.
    #[arg(long, value_delimiter = ',', required = true)]
    pub counts: Vec<usize>,
    /// Held-out documents per class; none by default.
    #[arg(long, value_delimiter = ',')]
    pub test_counts: Vec<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Receives corpus.jsonl, embeddings.bin and, with test counts, test.jsonl.
    #[arg(long)]
    pub out_dir: PathBuf,
}
