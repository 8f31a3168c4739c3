use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use msa_core::harness::config::{parse_override, ExperimentConfig, ProbeKind};
use msa_core::harness::{run_experiment, ProbeStatus};
use msa_core::Error;

/// Built-in configuration used when a probe subcommand gets no `--config`.
const DEFAULT_RECIPE: &str = include_str!("../../../recipes/d1-strong-disorder.json");

const EXIT_CONFIG: u8 = 2;
const EXIT_PROBE: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "msa",
    version,
    about = "Finite-volume multiscale-analysis probes for the Anderson model"
)]
struct Cli {
    /// Master seed (overrides `seeds.master`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of disorder samples (overrides `seeds.samples`).
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "msa-out")]
    out: PathBuf,
    /// Dotted-path override, e.g. `ledger.theta=0.2`. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the probes listed in a configuration file.
    Run { config: PathBuf },
    /// Good-scale certificates over the energy grid.
    Certify(ProbeArgs),
    /// Good-shell percolation in a coarse annulus.
    Shell(ProbeArgs),
    /// Reduced spectrum counts across scales.
    Reduce(ProbeArgs),
    /// Fixed-energy trap on generalized-eigenfunction proxies.
    Trap(ProbeArgs),
    /// Key-theorem implication and product bound.
    Keythm(ProbeArgs),
    /// Moment growth and the dynamical localization statistic.
    Dynamics(ProbeArgs),
}

#[derive(clap::Args, Debug)]
struct ProbeArgs {
    /// Configuration file; defaults to the built-in d1-strong-disorder recipe.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig, Error> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => ExperimentConfig::from_json_str(DEFAULT_RECIPE),
    }
}

fn effective(cli: &Cli) -> Result<(ExperimentConfig, Vec<String>), Error> {
    let (path, probe) = match &cli.command {
        Command::Run { config } => (Some(config.as_path()), None),
        Command::Certify(a) => (a.config.as_deref(), Some(ProbeKind::Certify)),
        Command::Shell(a) => (a.config.as_deref(), Some(ProbeKind::Shell)),
        Command::Reduce(a) => (a.config.as_deref(), Some(ProbeKind::Reduce)),
        Command::Trap(a) => (a.config.as_deref(), Some(ProbeKind::Trap)),
        Command::Keythm(a) => (a.config.as_deref(), Some(ProbeKind::Keythm)),
        Command::Dynamics(a) => (a.config.as_deref(), Some(ProbeKind::Dynamics)),
    };
    let base = load(path)?;
    let mut pairs = Vec::new();
    let mut echoed = Vec::new();
    if let Some(seed) = cli.seed {
        pairs.push(("seeds.master".to_string(), seed.to_string()));
    }
    if let Some(n) = cli.samples {
        pairs.push(("seeds.samples".to_string(), n.to_string()));
    }
    if let Some(p) = probe {
        pairs.push(("probes".to_string(), format!("[\"{}\"]", p.name())));
    }
    for o in &cli.overrides {
        pairs.push(parse_override(o)?);
    }
    for (k, v) in &pairs {
        echoed.push(format!("{k}={v}"));
    }
    Ok((base.with_overrides(&pairs)?, echoed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (config, echoed) = match effective(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("msa: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let manifest = match run_experiment(&config, &cli.out, &echoed) {
        Ok(m) => m,
        Err(e @ Error::Config { .. }) => {
            eprintln!("msa: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("msa: {e}");
            return ExitCode::from(EXIT_PROBE);
        }
    };
    for p in &manifest.probes {
        match p.status {
            ProbeStatus::Ok => println!(
                "{:<9} ok     {:>7} rows  {:>8.2}s",
                p.probe.name(),
                p.rows,
                p.seconds
            ),
            ProbeStatus::Error => println!(
                "{:<9} error  {}",
                p.probe.name(),
                p.message.as_deref().unwrap_or("unknown error")
            ),
        }
    }
    println!("artifacts in {}", cli.out.display());
    if manifest.failed() {
        ExitCode::from(EXIT_PROBE)
    } else {
        ExitCode::SUCCESS
    }
}
