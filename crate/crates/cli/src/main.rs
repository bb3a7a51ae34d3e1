use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pathwise_cli::config::SEED_ENV;
use pathwise_cli::{commands, CliError, CliResult, Experiment, ExperimentConfig};

/// Pathwise gradient estimator experiments. Writes CSV.
#[derive(Debug, Parser)]
#[command(name = "pathwise", version)]
struct Cli {
    /// Command; may instead come from --experiment or the config file.
    #[arg(value_enum)]
    command: Option<Experiment>,

    /// Flat key = value config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: ExperimentConfig,
}

fn resolve(cli: &Cli) -> CliResult<(Experiment, ExperimentConfig)> {
    let file = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = file.overlay(&cli.overrides).with_env_seed(std::env::var(SEED_ENV).ok().as_deref())?;
    let experiment = match (cli.command, cfg.experiment) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(format!("command {} conflicts with experiment = {}", a.name(), b.name())))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(CliError::Config("no command given (positional or --experiment)".into())),
    };
    cfg.experiment = Some(experiment);
    cfg.validate()?;
    Ok((experiment, cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(&cli).and_then(|(experiment, cfg)| {
        let out = commands::run(experiment, &cfg)?;
        match &cfg.out {
            Some(path) => std::fs::write(path, &out.csv)?,
            None => print!("{}", out.csv),
        }
        Ok((experiment, out.passed))
    });
    match result {
        Ok((_, true)) => ExitCode::SUCCESS,
        Ok((experiment, false)) => {
            eprintln!("{}: one or more thresholds failed", experiment.name());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
