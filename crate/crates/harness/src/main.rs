use std::fs::{self, File};
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use gibbs_harness::analyze::{analyze, write_estimates};
use gibbs_harness::config::{parse_config, parse_grid};
use gibbs_harness::manifest::config_source;
use gibbs_harness::reference::{write_reference, ChainParameters, Curve};
use gibbs_harness::run::{plan, run_experiment, workers};

/// Boltzmann-Gibbs sampling experiments.
#[derive(Parser)]
#[command(name = "gibbs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a configuration file or a previous manifest.
    /// Worker threads come from GIBBS_WORKERS.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the planned chains and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Estimate an observable for every grid point of a finished run.
    Analyze {
        dir: PathBuf,
        #[arg(long)]
        observable: String,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Emit an analytic curve on a grid (`start:stop:points` or a comma list).
    Reference {
        #[arg(long)]
        curve: String,
        #[arg(long)]
        grid: String,
        /// Chain length for `ising1d_f`.
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
        #[arg(long, default_value_t = 0.0)]
        field: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn sink(path: Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, out, dry_run } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = parse_config(&config_source(&text)).map_err(|e| anyhow!("invalid configuration:\n{e}"))?;
            if dry_run {
                for p in plan(&cfg) {
                    println!("{} {}={} seed={}", p.stem(), p.parameter.token(), p.value, p.seed);
                }
                return Ok(());
            }
            let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
            let manifest = run_experiment(&cfg, &dir, workers())?;
            let failed = manifest.entries().iter().filter(|(k, v)| k.ends_with(".status") && v != "ok").count();
            eprintln!("wrote {} ({failed} failed chains)", dir.display());
        }
        Command::Analyze { dir, observable, output } => {
            let rows = analyze(&dir, &observable)?;
            write_estimates(sink(output)?, &rows)?;
        }
        Command::Reference { curve, grid, n, coupling, field, output } => {
            let grid = parse_grid(&grid).map_err(|e| anyhow!(e))?;
            write_reference(sink(output)?, Curve::from_token(&curve)?, &grid, ChainParameters { n, coupling, field })?;
        }
    }
    Ok(())
}
