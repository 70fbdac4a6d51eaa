//! Experiment runner for the molecular channel toolkit.
//!
//! Every subcommand reads one TOML configuration, draws all randomness
//! from the `--seed` it is given and writes CSV tables plus a JSON summary
//! into the output directory. The same configuration and seed give
//! byte-identical files whatever the number of worker threads.

pub mod build;
pub mod commands;
pub mod output;
pub mod suite;

use std::fmt;
use std::fs;
use std::path::PathBuf;

use molchan::config::ExperimentConfig;

use commands::Context;
use output::{config_hash, write_artifacts, Artifacts};

#[derive(Debug)]
pub enum CliError {
    Core(molchan::Error),
    Io(String),
    Usage(String),
    /// The acceptance suite ran but some checks failed.
    Acceptance(Vec<String>),
}

impl From<molchan::Error> for CliError {
    fn from(e: molchan::Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) | CliError::Usage(m) => f.write_str(m),
            CliError::Acceptance(failed) => write!(f, "acceptance failures: {}", failed.join(", ")),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    /// 2 for configuration errors, 3 for guard violations, 4 for failed
    /// acceptance checks, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        use molchan::Error as E;
        match self {
            CliError::Core(E::Config { .. }) | CliError::Usage(_) => 2,
            CliError::Core(E::ConfigGuard { .. } | E::Guard { .. }) => 3,
            CliError::Acceptance(_) => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    FptScan,
    PermEstimate,
    AdimaScan,
    DbarScan,
    MixingScan,
    Capacity,
    CodeEval,
    SourceChannel,
    PaperSuite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FptScan => "fpt-scan",
            Command::PermEstimate => "perm-estimate",
            Command::AdimaScan => "adima-scan",
            Command::DbarScan => "dbar-scan",
            Command::MixingScan => "mixing-scan",
            Command::Capacity => "capacity",
            Command::CodeEval => "code-eval",
            Command::SourceChannel => "source-channel",
            Command::PaperSuite => "paper-suite",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    pub trials: Option<usize>,
}

/// Parses the configuration file behind `path`.
pub fn load_config(path: &std::path::Path) -> Result<(ExperimentConfig, String), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let cfg = ExperimentConfig::parse(&text).map_err(|e| match e {
        molchan::Error::Config { line, column, message } => molchan::Error::Config {
            line,
            column,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })?;
    Ok((cfg, text))
}

/// Runs one subcommand and writes its artifacts.
pub fn run(inv: &Invocation) -> Result<(), CliError> {
    let (cfg, text) = load_config(&inv.config)?;
    if inv.trials == Some(0) {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let ctx = Context {
        cfg: &cfg,
        config_hash: config_hash(&text),
        seed: inv.seed,
        trials: inv.trials,
    };
    let artifacts: Artifacts = match inv.command {
        Command::FptScan => commands::fpt_scan(&ctx)?,
        Command::PermEstimate => commands::perm_estimate(&ctx)?,
        Command::AdimaScan => commands::adima(&ctx)?,
        Command::DbarScan => commands::dbar(&ctx)?,
        Command::MixingScan => commands::mixing(&ctx)?,
        Command::Capacity => commands::capacity(&ctx)?,
        Command::CodeEval => commands::code_eval(&ctx)?,
        Command::SourceChannel => commands::source_channel(&ctx)?,
        Command::PaperSuite => {
            if inv.trials.is_some() {
                return Err(CliError::Usage("paper-suite pins its own trial counts; drop --trials".into()));
            }
            let report = suite::run_suite(&ctx)?;
            write_artifacts(&inv.out, "suite", &report.artifacts)?;
            let failed = report.failed();
            return if failed.is_empty() { Ok(()) } else { Err(CliError::Acceptance(failed)) };
        }
    };
    write_artifacts(&inv.out, "summary", &artifacts)
}
