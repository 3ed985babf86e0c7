use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use tweezer_sim::config::{load_config, RunConfig};
use tweezer_sim::experiments::{run_experiment, Experiment};
use tweezer_sim::io::write_outputs;
use tweezer_sim::Result;

const EXIT_FAILED_VERDICT: u8 = 1;
const EXIT_ERROR: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Thermometry,
    Transport,
    Echo,
    Transfer,
    Adiabaticity,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Thermometry => Experiment::Thermometry,
            Command::Transport => Experiment::Transport,
            Command::Echo => Experiment::Echo,
            Command::Transfer => Experiment::Transfer,
            Command::Adiabaticity => Experiment::Adiabaticity,
        }
    }
}

/// Monte Carlo simulator for a single-atom qubit in a moving optical tweezer.
#[derive(Debug, Parser)]
#[command(name = "tweezer-sim", version)]
struct Cli {
    /// Experiment to run.
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured number of shots.
    #[arg(long)]
    shots: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = load_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(shots) = cli.shots {
        cfg.shots = shots;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = load(cli)?;
    let report = run_experiment(cli.command.into(), &cfg)?;
    for path in write_outputs(&report, &cfg.output_dir)? {
        println!("wrote {}", path.display());
    }
    for v in &report.verdicts {
        println!(
            "{} {}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.criterion,
            v.detail
        );
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED_VERDICT),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
