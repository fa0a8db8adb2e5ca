use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pairwave_cli::config::RunConfig;
use pairwave_cli::pipeline::{execute, parse_grid, sweep, Stage, SweepParam};
use pairwave_cli::{CliError, EXIT_CHECK_FAILED, EXIT_PASS};

#[derive(Parser)]
#[command(name = "pairwave", version, about = "Pair-excitation spectra of a trapped Bose gas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and all enabled checks.
    Run { config: PathBuf },
    /// Solve the Hartree equation and cache the condensate.
    Hartree { config: PathBuf },
    /// Solve the Riccati equation from the cached condensate.
    Riccati { config: PathBuf },
    /// Excitation spectrum from the cached kernel.
    Spectrum { config: PathBuf },
    /// Fock-space oracles from the cached kernel.
    FockVerify { config: PathBuf },
    /// Vary g or N over start:stop:count and write the spectra as long CSV.
    Sweep {
        param: String,
        grid: String,
        config: PathBuf,
    },
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    let (stage, path) = match cmd {
        Command::Sweep { param, grid, config } => {
            let cfg = RunConfig::load(&config)?;
            let param = SweepParam::parse(&param)?;
            let grid = parse_grid(&grid)?;
            let out = sweep(&cfg, param, &grid)?;
            println!("wrote {}", out.display());
            return Ok(EXIT_PASS);
        }
        Command::Run { config } => (Stage::Run, config),
        Command::Hartree { config } => (Stage::Hartree, config),
        Command::Riccati { config } => (Stage::Riccati, config),
        Command::Spectrum { config } => (Stage::Spectrum, config),
        Command::FockVerify { config } => (Stage::FockVerify, config),
    };
    let cfg = RunConfig::load(&path)?;
    let report = execute(&cfg, stage)?;
    let passed = report.passed();
    println!(
        "{}: {} (artifacts in {})",
        stage.name(),
        if passed { "pass" } else { "fail" },
        cfg.output.directory.display()
    );
    Ok(if passed { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
