//! `saddle-dd`: batch driver for the domain decomposition saddle point solver.
//!
//! Exit codes: 0 success, 1 failed check, 2 configuration or input error,
//! 3 numerical failure (factorization or non-convergence).

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use saddle_dd::DdError;
use serde::Serialize;

use crate::config::{ConfigArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "saddle-dd", version, about = "Two-level domain decomposition solver for saddle point systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the preconditioner chain and solve the block system.
    Run(ConfigArgs),
    /// Run every invariant check and print a pass/fail table.
    Verify {
        #[command(flatten)]
        args: ConfigArgs,
        /// Test hook: perturb one dual partition-of-unity weight.
        #[arg(long, hide = true)]
        corrupt_dual_weights: bool,
    },
    /// Solve for every subdomain count in `sweep_n`, one CSV row each.
    Sweep(ConfigArgs),
    /// Export the problem as Matrix Market and split files.
    Gen(ConfigArgs),
    /// Dense spectra of the preconditioned operators.
    Spectrum(ConfigArgs),
    /// Print the resolved configuration as JSON.
    Config(ConfigArgs),
}

enum Failure {
    Checks,
    Config(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<DdError>() {
            Some(d) if d.is_numerical() => Failure::Numerical(e),
            _ => Failure::Config(e),
        }
    }
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

fn setup_threads(cfg: &RunConfig) -> Result<()> {
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<(), Failure> {
    let (args, corrupt) = match &cmd {
        Command::Verify { args, corrupt_dual_weights } => (args, *corrupt_dual_weights),
        Command::Run(a) | Command::Sweep(a) | Command::Gen(a) | Command::Spectrum(a) | Command::Config(a) => (a, false),
    };
    let cfg = args.resolve().map_err(Failure::Config)?;
    setup_threads(&cfg)?;
    let output = cfg.output.as_deref();
    match cmd {
        Command::Run(_) => {
            let summary = commands::run(&cfg)?;
            emit(&summary, output)?;
            if summary.verify.as_ref().is_some_and(|v| !v.passed()) {
                if let Some(v) = &summary.verify {
                    eprint!("{v}");
                }
                return Err(Failure::Checks);
            }
        }
        Command::Verify { .. } => {
            let report = if corrupt { verify_corrupted(&cfg)? } else { commands::verify(&cfg)? };
            print!("{report}");
            if let Some(p) = output {
                emit(&report, Some(p))?;
            }
            if !report.passed() {
                return Err(Failure::Checks);
            }
        }
        Command::Sweep(_) => {
            let rows = commands::sweep(&cfg)?;
            if let Some(p) = &cfg.csv {
                commands::write_sweep_csv(&rows, p)?;
            }
            emit(&rows, output)?;
        }
        Command::Gen(_) => {
            let dir: PathBuf = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("problem"));
            commands::gen(&cfg, &dir)?;
            eprintln!("wrote {}", dir.display());
        }
        Command::Spectrum(_) => emit(&commands::spectrum(&cfg)?, output)?,
        Command::Config(_) => emit(&cfg, output)?,
    }
    Ok(())
}

fn verify_corrupted(cfg: &RunConfig) -> Result<saddle_dd::verify::VerifyReport> {
    let sys = commands::load_problem(cfg)?;
    let chain = commands::build_chain(cfg, &sys, cfg.n_parts)?;
    let mut dec = chain.dec.clone();
    saddle_dd::verify::corrupt_dual_weights(&mut dec);
    let opts = saddle_dd::verify::VerifyOptions {
        probes: cfg.probes,
        ..Default::default()
    };
    Ok(saddle_dd::verify::verify_chain(&sys, &chain, &dec, &opts)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => {
            eprintln!("error: one or more checks failed");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(3)
        }
    }
}
