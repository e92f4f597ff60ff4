//! Library side of the `dignn` command. [`run`] parses arguments, dispatches
//! to a `cmd_*` function and maps errors to exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | gradient check failed |
//! | 2 | usage or configuration error |
//! | 3 | graph or model file could not be loaded, or they do not match |
//! | 4 | training diverged |
//! | 5 | any other failure (I/O, empty splits, ...) |
// `!(x > 0.0)` is used to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dignn::Error;

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{cmd_eval, cmd_export_embeddings, cmd_gradcheck, cmd_synth, cmd_train};
pub use config::RunConfig;
pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_GRADCHECK: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_LOAD: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;
pub const EXIT_OTHER: i32 = 5;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Load(_) | Error::ModelFile(_) => EXIT_LOAD,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_OTHER,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dignn",
    version,
    about = "Graph fraud detection with disentangled topology and attribute views"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write manifest, model, history and metrics.
    Train(TrainArgs),
    /// Evaluate a saved model on one split.
    Eval(EvalArgs),
    /// Generate a synthetic graph directory.
    Synth(SynthArgs),
    /// Compare analytic and finite-difference gradients on a toy graph.
    Gradcheck(GradcheckArgs),
    /// Write fused embeddings of a saved model as CSV.
    ExportEmbeddings(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Minibatch,
    Fullbatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblationArg {
    Full,
    #[value(name = "no_mi")]
    NoMi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    /// Every labeled node.
    Labeled,
}

/// Config file plus per-flag overrides.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// `key = value` file, or `default`.
    #[arg(long, default_value = "default")]
    pub config: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_enum)]
    pub ablation: Option<AblationArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Graph directory. Required unless --manifest is given.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory. Defaults to the manifest's when --manifest is given.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Repeat the run recorded in this manifest. Config flags are ignored.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "labeled")]
    pub split: SplitArg,
    /// CSV destination.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4000)]
    pub nodes: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.15)]
    pub fraud_rate: f64,
    /// Distance between class means along the all-ones direction.
    #[arg(long, default_value_t = 2.33)]
    pub separation: f64,
    /// Fraction of a node's edges that stay within its own class.
    #[arg(long, default_value_t = 0.19)]
    pub h: f64,
    #[arg(long, default_value_t = 20.0)]
    pub avg_degree: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Loss weights of the first variant; the other two are 0/0 and 1/1.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Negate the analytic gradient of one tensor (for testing the checker).
    #[arg(long, hide = true)]
    pub flip_sign: Option<String>,
}

/// Runs one invocation. `args` includes the program name.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a, out).map(|_| EXIT_OK),
        Command::Eval(a) => cmd_eval(a, out).map(|_| EXIT_OK),
        Command::Synth(a) => cmd_synth(a, out).map(|_| EXIT_OK),
        Command::Gradcheck(a) => cmd_gradcheck(a, out).map(|ok| if ok { EXIT_OK } else { EXIT_GRADCHECK }),
        Command::ExportEmbeddings(a) => cmd_export_embeddings(a, out).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
