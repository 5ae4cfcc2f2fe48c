//! Experiment runner: resolves a configuration, runs one experiment, and
//! writes its report, tables and digest manifest into a fresh directory.

pub mod config;
pub mod experiments;
pub mod output;
pub mod plot;
pub mod suite;

use std::path::{Path, PathBuf};

use clap::Subcommand;

pub use config::RunConfig;
pub use experiments::{ExtractKind, SearchKind};
pub use output::RunManifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] zklab_core::Error),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 3 for enumeration and budget limits, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(zklab_core::Error::EnumerationLimit { .. } | zklab_core::Error::BudgetViolation { .. }) => 3,
            _ => 2,
        }
    }
}

pub const EXIT_VERDICT: i32 = 4;

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Exhaustive uniformity audit of a hash family.
    HashAudit,
    /// Run or compose protocols.
    Protocol {
        #[command(subcommand)]
        action: ProtocolAction,
    },
    /// Graph-isomorphism instances and simulators.
    Gi {
        #[command(subcommand)]
        action: GiAction,
    },
    /// Extract a cheating prover from a simulator.
    Extract {
        #[arg(value_enum)]
        kind: ExtractKind,
    },
    /// Search-bound experiments.
    Searchlab {
        #[arg(value_enum)]
        kind: SearchKind,
    },
    /// Long-format plot series from report files.
    Plot { reports: Vec<PathBuf> },
    /// The full experiment battery.
    Suite,
}

#[derive(Clone, Debug, Subcommand)]
pub enum ProtocolAction {
    /// Exact transcript distribution against the honest verifier.
    Run,
    /// Parallel repetition of a spec.
    Compose,
}

#[derive(Clone, Debug, Subcommand)]
pub enum GiAction {
    /// Writes the protocol spec and a simulator.
    Build,
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::HashAudit => "hash-audit".into(),
            Command::Protocol { action: ProtocolAction::Run } => "protocol run".into(),
            Command::Protocol { action: ProtocolAction::Compose } => "protocol compose".into(),
            Command::Gi { .. } => "gi build".into(),
            Command::Extract { kind } => format!("extract {kind:?}").to_lowercase(),
            Command::Searchlab { kind } => format!("searchlab {kind:?}").to_lowercase(),
            Command::Plot { .. } => "plot".into(),
            Command::Suite => "suite".into(),
        }
    }
}

/// Runs `command` and writes its outputs into `out`.
pub fn execute(command: &Command, cfg: &RunConfig, out: &Path) -> Result<RunManifest, CliError> {
    let outcome = match command {
        Command::HashAudit => experiments::hash_audit(cfg)?,
        Command::Protocol { action: ProtocolAction::Run } => experiments::protocol_run(cfg)?,
        Command::Protocol { action: ProtocolAction::Compose } => experiments::protocol_compose(cfg)?,
        Command::Gi { action: GiAction::Build } => experiments::gi_build(cfg)?,
        Command::Extract { kind } => experiments::extract(cfg, *kind)?,
        Command::Searchlab { kind } => experiments::searchlab_run(cfg, *kind)?,
        Command::Plot { reports } => experiments::Outcome { artifacts: plot::emit_plot_data(reports)?, checks: vec![] },
        Command::Suite => suite::run_suite(cfg)?,
    };
    output::write_run(out, &command.name(), cfg, &outcome.artifacts, outcome.passed())
}
