//! `distelect`: elicit vote-share distributions, compute state and Electoral
//! College win probabilities, and report against actual results.
//!
//! Exit codes: 0 success, 2 data or domain errors, 64 usage errors.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

pub const EXIT_DATA: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "distelect", version, about = "Electoral forecasts from LLM token-probability distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Elicit both directions of each state race and write a cell store.
    Fetch(FetchArgs),
    /// Per-state tie-excluded win probabilities.
    Wins(MatchupSelect),
    /// Exact Electoral College distribution for one matchup.
    Ec(EcArgs),
    /// Average-case map from weighted means.
    Map(MapArgs),
    /// Error table against a ground-truth CSV.
    Error(TruthArgs),
    /// Signed error in swing versus safe states.
    Bias(BiasArgs),
    /// Grid of hypothetical matchups.
    Matchup(MatchupArgs),
    /// Replay a cell store as a chat-completions endpoint.
    ServeStub(ServeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct EndpointArgs {
    /// Base URL of the chat-completions API, e.g. https://host/v1.
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Alternatives requested for the first output token.
    #[arg(long, default_value_t = 20)]
    pub top_k: u32,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,
    /// Initial retry delay in milliseconds, doubled per retry.
    #[arg(long, default_value_t = 500)]
    pub backoff_ms: u64,
    /// Maximum concurrent requests.
    #[arg(long, default_value_t = 4)]
    pub parallel: usize,
}

#[derive(Args, Debug)]
pub struct FetchArgs {
    #[arg(long)]
    pub c1: String,
    #[arg(long)]
    pub c2: String,
    #[arg(long)]
    pub year: i32,
    /// Comma-separated state names, or `all`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub states: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Args, Debug)]
pub struct MatchupSelect {
    #[arg(long)]
    pub store: PathBuf,
    /// First candidate; inferred when the store holds exactly two.
    #[arg(long)]
    pub c1: Option<String>,
    #[arg(long)]
    pub c2: Option<String>,
    /// Election year; inferred when the store holds one.
    #[arg(long)]
    pub year: Option<i32>,
    /// `state,electoral_votes` CSV replacing the bundled apportionment.
    #[arg(long)]
    pub alloc: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EcArgs {
    #[command(flatten)]
    pub select: MatchupSelect,
    /// Electoral votes needed to win; defaults to a majority of the allocation.
    #[arg(long)]
    pub threshold: Option<u32>,
    /// Write the full PMF as `k,probability` CSV.
    #[arg(long)]
    pub pmf: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MapArgs {
    #[command(flatten)]
    pub select: MatchupSelect,
}

#[derive(Args, Debug)]
pub struct TruthArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// `state,candidate,share_percent` CSV.
    #[arg(long)]
    pub truth: PathBuf,
    /// Year of the results; inferred when the store holds one.
    #[arg(long)]
    pub year: Option<i32>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BiasArgs {
    #[command(flatten)]
    pub truth: TruthArgs,
    /// Actual margin, in points, below which a state is a swing state.
    #[arg(long, default_value_t = distelect_core::analysis::DEFAULT_SWING_MARGIN)]
    pub margin: f64,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("mode").required(true).args(["from_store", "live"])))]
pub struct MatchupArgs {
    /// Answer every cell from this store; no network access.
    #[arg(long, conflicts_with = "live")]
    pub from_store: Option<PathBuf>,
    /// Fetch cells from the configured endpoint.
    #[arg(long)]
    pub live: bool,
    /// With --live: read cells from this store first and add fetched ones to it.
    #[arg(long, requires = "live")]
    pub cache: Option<PathBuf>,
    /// Comma-separated candidates for the first side (c1).
    #[arg(long, value_delimiter = ',', required = true)]
    pub dems: Vec<String>,
    /// Comma-separated candidates for the second side (c2).
    #[arg(long, value_delimiter = ',', required = true)]
    pub reps: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub years: Vec<i32>,
    #[arg(long)]
    pub alloc: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<u32>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8089")]
    pub addr: String,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

/// An invalid flag combination found after parsing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Fetch(args) => commands::fetch(args),
        Command::Wins(args) => commands::wins(args),
        Command::Ec(args) => commands::ec(args),
        Command::Map(args) => commands::map(args),
        Command::Error(args) => commands::error(args),
        Command::Bias(args) => commands::bias(args),
        Command::Matchup(args) => commands::matchup(args),
        Command::ServeStub(args) => commands::serve_stub(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_DATA)
            }
        }
    }
}
