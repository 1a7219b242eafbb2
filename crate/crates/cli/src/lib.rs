//! The `locus` command.
//!
//! Exit codes are a stable contract: 0 success, 1 domain failure (invalid
//! game, failed expectation), 2 input error (unreadable or malformed input,
//! bad flags), 3 environment error (address busy, snapshot write failed).

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use locus_core::model::{parse_game_bytes, validate_game, GameSpec, Severity};

mod play;
mod serve;
mod simulate;
mod validate;

pub use play::Repl;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ENV: i32 = 3;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:7878";

#[derive(Debug, Parser)]
#[command(
    name = "locus",
    version,
    about = "Locative interactive-narrative game engine"
)]
pub struct Cli {
    /// Log verbosity on stderr
    #[arg(
        long,
        value_enum,
        env = "LOCUS_LOG_LEVEL",
        default_value = "info",
        global = true
    )]
    pub log_level: LogLevel,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl From<LogLevel> for log::LevelFilter {
    fn from(l: LogLevel) -> Self {
        match l {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check game files and print their diagnostics
    Validate {
        /// Game files to check
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Serve every valid game of a directory over HTTP
    Serve(ServeArgs),
    /// Play a game on the terminal
    Play {
        /// Game file
        game: PathBuf,
        /// Player id to join as
        #[arg(long, default_value = "player")]
        player: String,
    },
    /// Run bot scripts against a game and print their transcripts
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Directory holding *.game files
    #[arg(long, env = "LOCUS_GAMES_DIR", default_value = "games")]
    pub games_dir: PathBuf,
    /// Address to listen on, host:port
    #[arg(long, env = "LOCUS_LISTEN", default_value = DEFAULT_LISTEN)]
    pub listen: String,
    /// Resume from and save snapshots to this directory
    #[arg(long, env = "LOCUS_SNAPSHOT_DIR")]
    pub snapshot_dir: Option<PathBuf>,
    /// Static web client bundle served under /app
    #[arg(long, env = "LOCUS_APP_DIR")]
    pub app_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Game file
    pub game: PathBuf,
    /// Script files; each runs on a fresh instance
    #[arg(required = true)]
    pub scripts: Vec<PathBuf>,
    /// Interleaving seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write one <script>.txt transcript per script file here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run through a loopback server instead of in process
    #[arg(long)]
    pub wire: bool,
}

pub fn init_logging(level: LogLevel) {
    let _ = env_logger::Builder::new()
        .filter_level(level.into())
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Runs a parsed command line and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Validate { paths } => validate::run(&paths, &mut io::stdout().lock()),
        Command::Serve(args) => serve::run(&args),
        Command::Play { game, player } => play::run(&game, &player),
        Command::Simulate(args) => simulate::run(&args, &mut io::stdout().lock()),
    }
}

#[derive(Debug)]
pub enum LoadError {
    Unreadable(io::Error),
    /// Parse errors or ERROR-severity diagnostics, one line each.
    Invalid(Vec<String>),
}

impl LoadError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LoadError::Unreadable(_) => EXIT_INPUT,
            LoadError::Invalid(_) => EXIT_FAILURE,
        }
    }

    pub fn report(&self, path: &Path) -> String {
        match self {
            LoadError::Unreadable(e) => format!("{}: cannot read: {e}", path.display()),
            LoadError::Invalid(lines) => lines
                .iter()
                .map(|l| format!("{}: {l}", path.display()))
                .collect::<Vec<_>>()
                .join("\n"),
        }
    }
}

/// Reads, parses and validates one game file.
pub fn load_game(path: &Path) -> Result<GameSpec, LoadError> {
    let bytes = fs::read(path).map_err(LoadError::Unreadable)?;
    let spec = parse_game_bytes(&bytes)
        .map_err(|errs| LoadError::Invalid(errs.iter().map(ToString::to_string).collect()))?;
    let errors: Vec<String> = validate_game(&spec)
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .map(ToString::to_string)
        .collect();
    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(LoadError::Invalid(errors))
    }
}
