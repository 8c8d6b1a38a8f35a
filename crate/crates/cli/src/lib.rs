//! The `omniloop` command line: run episodes, generate suites, benchmark and compare planners,
//! and lint scene files.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};
use omniloop_core::planner::PlannerKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_CANT_CREATE: i32 = 73;

/// A failure with the process exit status it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }

    pub fn no_input(message: impl Into<String>) -> Self {
        Self { code: EXIT_NO_INPUT, message: message.into() }
    }

    pub fn cant_create(message: impl Into<String>) -> Self {
        Self { code: EXIT_CANT_CREATE, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Parser)]
#[command(name = "omniloop", version, about = "Audio-guided active-perception agent over simulated audio-video scenes")]
pub struct Cli {
    /// TOML config file; values are overridden by OMNILOOP_* variables, then by flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel episodes (0 = one per logical core).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode and write its trace.
    Run(RunArgs),
    /// Generate a seeded scene suite.
    Gen(GenArgs),
    /// Run planners over a suite and write reports.
    Bench(BenchArgs),
    /// Compare two planners on a suite question by question.
    Compare(CompareArgs),
    /// Check scene, question and suite files for format and invariant errors.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct EpisodeFlags {
    /// Non-ANSWER step cap per episode.
    #[arg(long, value_name = "N")]
    pub max_steps: Option<usize>,
    /// Token ceiling as VISUAL,AUDIO,TEXT; past it CLIP_QA is refused.
    #[arg(long, value_name = "V,A,T")]
    pub token_budget: Option<String>,
    /// Master seed for seeded planners.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scene name (looked up in the scenes directory) or path to a .scene.json file.
    #[arg(long, value_name = "NAME|PATH")]
    pub scene: String,
    /// Question id.
    #[arg(long, value_name = "ID")]
    pub question: String,
    /// Questions file; defaults to the scene's sibling .questions.json or the suite's questions.json.
    #[arg(long, value_name = "PATH")]
    pub questions: Option<PathBuf>,
    /// Planner: heuristic, replay, random, adversarial, dense or llm.
    #[arg(long, value_name = "KIND")]
    pub planner: Option<PlannerKind>,
    /// Trace file whose decisions the replay planner repeats.
    #[arg(long, value_name = "PATH")]
    pub script: Option<PathBuf>,
    /// Answer tool calls through the gateway instead of the simulator.
    #[arg(long)]
    pub live_tools: bool,
    /// Where to write the trace (default: <traces dir>/<scene>.<question>.<planner>.jsonl).
    #[arg(long, value_name = "PATH")]
    pub trace_out: Option<PathBuf>,
    #[command(flatten)]
    pub episode: EpisodeFlags,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Generator seed.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Number of scenes.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Generator profile (TOML); missing keys take defaults.
    #[arg(long, value_name = "PATH")]
    pub profile: Option<PathBuf>,
    /// Output directory (default: suites/seed-<SEED>).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Suite directory containing manifest.json.
    #[arg(long, value_name = "DIR")]
    pub suite: PathBuf,
    /// Comma-separated planners to run.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "heuristic,dense,random")]
    pub planners: Vec<PlannerKind>,
    /// Report directory (default: the configured reports directory).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also write every trace under DIR/<planner>/<question>.jsonl.
    #[arg(long, value_name = "DIR")]
    pub traces: Option<PathBuf>,
    #[command(flatten)]
    pub episode: EpisodeFlags,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Suite directory containing manifest.json.
    #[arg(long, value_name = "DIR")]
    pub suite: PathBuf,
    /// Planner under test.
    #[arg(long, value_name = "KIND", default_value = "heuristic")]
    pub candidate: PlannerKind,
    /// Reference planner.
    #[arg(long, value_name = "KIND", default_value = "dense")]
    pub baseline: PlannerKind,
    /// Write the comparison as JSON to PATH.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub episode: EpisodeFlags,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Scene files, question files or suite directories.
    #[arg(required = true, value_name = "PATH")]
    pub paths: Vec<PathBuf>,
}

/// Parses `args` and runs the command, returning the process exit status.
/// `env` stands in for the process environment.
pub fn main_with<I, T>(args: I, env: &dyn Fn(&str) -> Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::dispatch(cli, env) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("omniloop: {e}");
            e.code
        }
    }
}

/// The clap command tree, for help rendering and flag-coverage checks.
pub fn command() -> clap::Command {
    Cli::command()
}
