use clap::{Parser, ValueEnum};
use coupled_plates::config::{parse_config, ExperimentConfig};
use coupled_plates::pipeline::{run, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Spectrum,
    ResolventSweep,
    Evolve,
    AbstractSweep,
    ValidateDamping,
    FullAcceptance,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Spectrum => Subcommand::Spectrum,
            Command::ResolventSweep => Subcommand::ResolventSweep,
            Command::Evolve => Subcommand::Evolve,
            Command::AbstractSweep => Subcommand::AbstractSweep,
            Command::ValidateDamping => Subcommand::ValidateDamping,
            Command::FullAcceptance => Subcommand::FullAcceptance,
        }
    }
}

/// Coupled damped plate laboratory: spectra, resolvent sweeps, time
/// integration and the acceptance suite.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(ok) => {
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> coupled_plates::Result<bool> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| coupled_plates::LabError::Config(format!("--threads: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => parse_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    let sub = Subcommand::from(cli.command);
    let report = run(&cfg, sub, &out)?;

    let mut ok = true;
    if sub == Subcommand::FullAcceptance {
        if let Some(list) = report.results["criteria"].as_array() {
            for c in list {
                let pass = c["pass"].as_bool().unwrap_or(false);
                ok &= pass;
                println!(
                    "criterion {} {}  {}: {}",
                    c["id"],
                    if pass { "PASS" } else { "FAIL" },
                    c["title"].as_str().unwrap_or(""),
                    c["detail"].as_str().unwrap_or("")
                );
            }
        }
    } else {
        println!("{}", serde_json::to_string_pretty(&report.results)?);
    }
    for p in &report.outputs {
        eprintln!("wrote {}", p.display());
    }
    Ok(ok)
}
