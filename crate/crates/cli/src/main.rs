use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use thinlayer::checks::{limits_detail_csv, run_limits, thermo_check};
use thinlayer::{run_study, HarnessError, StudyConfig};
use thinlayer_core::gravity::limit_csv;

#[derive(Parser)]
#[command(name = "thinlayer", about = "Thin-layer dimension-reduction studies", disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the planar reference and the layer sweep of a study config.
    Run {
        config: PathBuf,
        /// Output directory; THINLAYER_OUT and the config value are used otherwise.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(short, long)]
        quiet: bool,
    },
    /// Print the gravity kernel-limit errors as CSV.
    Limits {
        config: PathBuf,
        /// Also write the CSV (with the column-mean diagnostic) to this file.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Thermodynamic consistency, structural and coercivity checks.
    ThermoCheck { config: PathBuf },
    /// Print the version.
    Version,
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Run { config, out, quiet } => {
            let cfg = StudyConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir());
            let report = run_study(&cfg, &dir, !quiet)?;
            print!("{}", report.convergence_csv());
            if report.failed() {
                return Err(HarnessError::Runtime(format!(
                    "one or more layer runs failed; partial outputs are in {}",
                    dir.display()
                )));
            }
            Ok(())
        }
        Command::Limits { config, out } => {
            let cfg = StudyConfig::load(&config)?;
            let rows = run_limits(&cfg)?;
            print!("{}", limit_csv(&rows));
            if let Some(path) = out {
                std::fs::write(&path, limits_detail_csv(&rows)).map_err(|source| HarnessError::Io { path, source })?;
            }
            Ok(())
        }
        Command::ThermoCheck { config } => {
            let cfg = StudyConfig::load(&config)?;
            let check = thermo_check(&cfg)?;
            print!("{}", check.render());
            if check.passed() {
                Ok(())
            } else {
                Err(HarnessError::Validation("constitutive checks failed".into()))
            }
        }
        Command::Version => {
            println!("thinlayer {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
