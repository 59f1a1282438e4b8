//! `haggle`: run negotiation self-play sessions, analyse transcript logs,
//! replay stored games and evaluate the moderator's demo bank.

pub mod commands;
pub mod config;
pub mod transcript;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use haggle_core::EngineId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{aborted} of {runs} runs aborted")]
    Aborted { aborted: usize, runs: usize },
    #[error("replay diverged: {0}")]
    Divergence(String),
    #[error("accuracy {accuracy:.3} is below the threshold {threshold:.2}")]
    BelowThreshold { accuracy: f64, threshold: f64 },
}

impl CliError {
    /// 2 for anything that prevented the command from doing its work, 1 for
    /// a completed command whose result is a failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Analysis(_) | CliError::Io(_) => 2,
            CliError::Aborted { .. } | CliError::Divergence(_) | CliError::BelowThreshold { .. } => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "haggle", version, about = "Negotiation self-play with feedback")]
pub struct Cli {
    #[command(flatten)]
    pub shared: SharedArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Default)]
pub struct SharedArgs {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for runs. Does not affect results.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Refuse every engine that needs the network.
    #[arg(long, global = true)]
    pub offline: bool,
    /// Where output files go (default: current directory).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

impl SharedArgs {
    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play a session and write transcripts.jsonl.
    Run(RunArgs),
    /// Per-round summary, histogram and response-length tables from a log.
    Analyze(AnalyzeArgs),
    /// Re-execute stored games and compare them with the log.
    Replay(ReplayArgs),
    /// Moderator accuracy on a labeled corpus.
    ModeratorEval(ModeratorEvalArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub engine_improved: Option<EngineId>,
    #[arg(long)]
    pub runs: Option<u32>,
    #[arg(long)]
    pub rounds: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub log: PathBuf,
    /// Whose utterances the response-length table measures (default: the
    /// improved player).
    #[arg(long)]
    pub role: Option<haggle_core::Role>,
    /// Count each failed game as a deal at this price in the mean-price
    /// column. By default means cover deals only.
    #[arg(long)]
    pub no_deal_price: Option<haggle_core::Price>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, required_unless_present = "all")]
    pub run: Option<u32>,
    #[arg(long, required_unless_present = "all")]
    pub round: Option<u32>,
    /// Replay every stored game instead of one.
    #[arg(long, conflicts_with_all = ["run", "round"])]
    pub all: bool,
    /// Do not print the dialog.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalBackend {
    /// Rule-based reading of the protocol sentences.
    Oracle,
    /// Offline nearest-demo classifier.
    Stub,
    /// A remote chat engine, see `--engine`.
    Remote,
}

#[derive(Debug, Clone, Args)]
pub struct ModeratorEvalArgs {
    /// Demo bank (default: the config's bank, else the built-in one).
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// Labeled corpus (default: the built-in one).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EvalBackend::Stub)]
    pub backend: EvalBackend,
    #[arg(long, default_value = "gpt-3.5-turbo")]
    pub engine: EngineId,
    #[arg(long, default_value_t = 0.90)]
    pub threshold: f64,
    /// Write the bank with the misclassified items appended.
    #[arg(long)]
    pub harden_out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => commands::run::execute(&cli.shared, &args).map(|_| ()),
        Command::Analyze(args) => commands::analyze::execute(&cli.shared, &args).map(|_| ()),
        Command::Replay(args) => commands::replay::execute(&cli.shared, &args),
        Command::ModeratorEval(args) => commands::moderator_eval::execute(&cli.shared, &args).map(|_| ()),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
