use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use zklab::{execute, Command, RunConfig, EXIT_VERDICT};

#[derive(Parser)]
#[command(name = "zklab", version, about = "Hash-verifier extraction and search-bound laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat TOML file with run keys; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Fresh directory for the run's outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(flatten)]
    flags: RunConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let resolved = (|| {
        let base = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        base.overlay(&cli.flags).with_env()
    })();
    let cfg = match resolved {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let Some(out) = cli.out else {
        eprintln!("error: --out is required");
        return ExitCode::from(2);
    };
    match execute(&cli.command, &cfg, &out) {
        Ok(m) => {
            println!("{} -> {} ({} files, {})", m.command, out.display(), m.files.len(), if m.passed { "pass" } else { "FAIL" });
            if m.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERDICT as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
