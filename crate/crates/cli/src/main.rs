mod cmd;
mod config;
mod error;
mod manifest;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Tokenizer;

#[derive(Parser)]
#[command(
    name = "tiebias",
    version,
    about = "Train toy transformers with tied or untied embeddings and compare their embedding spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a toy model, writing checkpoints, a gradient trace and a manifest.
    Train(TrainArgs),
    /// Align two embedding matrices (identity, orthogonal, linear) and score per-token cosine.
    Align(AlignArgs),
    /// k-nearest-neighbour overlap between two embedding matrices.
    Knn(GraphArgs),
    /// Omnibus spectral distance between the kNN graphs of two embedding matrices.
    Spectral(GraphArgs),
    /// Cosine drift of a run's embeddings against step 0 and between checkpoints.
    Drift(DriftArgs),
    /// Embedding norm against log token frequency.
    Normfreq(NormfreqArgs),
    /// Share of parameters held by the embedding matrices.
    Params(ParamsArgs),
    /// Train tuned-lens translators on a run and report per-layer residual KL.
    Lens(LensArgs),
    /// Render a report as an SVG chart.
    Plot(PlotArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    /// TOML config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training text.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub tokenizer: Option<Tokenizer>,
    /// Vocabulary cap for the word tokenizer (including `<unk>`).
    #[arg(long)]
    pub max_vocab: Option<usize>,
    /// Share one matrix between input embedding and unembedding.
    #[arg(long, conflicts_with = "untied")]
    pub tied: bool,
    #[arg(long)]
    pub untied: bool,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub context: Option<usize>,
    #[arg(long)]
    pub mlp_ratio: Option<usize>,
    /// Initialisation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Batch-sampling seed.
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    /// Scale λ applied to the input-pathway embedding gradient.
    #[arg(long)]
    pub input_grad_scale: Option<f64>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Skip recording the gradient trace.
    #[arg(long)]
    pub no_trace: bool,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct AlignArgs {
    /// Matrix to be mapped (EMBX).
    #[arg(long)]
    pub src: PathBuf,
    /// Target matrix (EMBX).
    #[arg(long)]
    pub dst: PathBuf,
    /// Alignment kinds to fit.
    #[arg(long, value_delimiter = ',', default_values_t = ["identity".to_string(), "orthogonal".to_string(), "linear".to_string()])]
    pub kinds: Vec<String>,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-token CSV; defaults to `<out>.tokens.csv` when `--out` is given.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Neighbours per token.
    #[arg(long)]
    pub k: Option<usize>,
    /// Spectral embedding dimension.
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Args)]
pub struct DriftArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct NormfreqArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Embedding matrix (EMBX).
    #[arg(long)]
    pub matrix: PathBuf,
    /// Frequency table (`token_id,count` lines).
    #[arg(long)]
    pub freq: PathBuf,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Args)]
pub struct ParamsArgs {
    #[arg(long)]
    pub vocab: u64,
    #[arg(long)]
    pub hidden: u64,
    /// Non-embedding parameters (suffixes K, M, B accepted).
    #[arg(long, conflicts_with = "total", required_unless_present = "total")]
    pub other_params: Option<String>,
    /// Total parameters of the model as configured (suffixes K, M, B accepted).
    #[arg(long)]
    pub total: Option<String>,
    /// The model is tied (one embedding matrix).
    #[arg(long)]
    pub tied: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct LensArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Second run to overlay.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Checkpoint step; the latest by default.
    #[arg(long)]
    pub step: Option<usize>,
    /// Text to fit and evaluate on; the run's training corpus by default.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Translator training steps (0 gives the logit lens).
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the report and translators.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PlotArgs {
    /// Report produced by another subcommand.
    #[arg(long)]
    pub report: PathBuf,
    /// SVG output path.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd::train::run(a),
        Command::Align(a) => cmd::compare::align(a),
        Command::Knn(a) => cmd::compare::knn(a),
        Command::Spectral(a) => cmd::compare::spectral(a),
        Command::Drift(a) => cmd::compare::drift(a),
        Command::Normfreq(a) => cmd::compare::normfreq(a),
        Command::Params(a) => cmd::compare::params(a),
        Command::Lens(a) => cmd::lens::run(a),
        Command::Plot(a) => cmd::plot::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
