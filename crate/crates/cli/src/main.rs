use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use srd_cli::commands::{self, Outcome, Overrides, PlotKind};
use srd_cli::parse_config;

#[derive(Parser)]
#[command(name = "srd", version, about = "Stochastic reaction-diffusion simulation and certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML).
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Certify a coercivity or dissipativity condition.
    Check(Common),
    /// Simulate one path and write diagnostics.
    Run(Common),
    /// Run a path ensemble with tail tables and the energy certificate.
    Ensemble(Common),
    /// Monte Carlo test matrix of the stochastic Gronwall tail bound.
    Gronwall {
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired runs measuring dependence on initial data.
    Depcheck(Common),
    /// Long-format CSV for plotting.
    Plotdata {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long, default_value_t = 0)]
        component: usize,
    },
}

fn load(c: &Common) -> Result<srd_cli::RunConfig> {
    commands::configure_threads(c.threads)?;
    let mut cfg = parse_config(&c.config)?;
    Overrides {
        seed: c.seed,
        out: c.out.clone(),
    }
    .apply(&mut cfg);
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Check(c) => commands::check(&load(&c)?),
        Command::Run(c) => commands::run(&load(&c)?),
        Command::Ensemble(c) => commands::ensemble(&load(&c)?),
        Command::Depcheck(c) => commands::depcheck(&load(&c)?),
        Command::Plotdata { common, kind, component } => commands::plotdata(&load(&common)?, kind, component),
        Command::Gronwall {
            config,
            seed,
            threads,
            out,
        } => {
            commands::configure_threads(threads)?;
            let cfg = config.as_deref().map(parse_config).transpose()?;
            let seed = seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
            let out = out
                .or(cfg.as_ref().map(|c| c.output.clone()))
                .unwrap_or_else(|| PathBuf::from("srd-out"));
            commands::gronwall(cfg.as_ref(), seed, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
