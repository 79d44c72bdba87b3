//! `qhavg` — experiment runner for quasihyperbolic distance fields,
//! L^s-averaging sweeps, and divergence certificates.
//!
//! Every subcommand reads one TOML experiment configuration (see
//! `config.rs` for the schema), writes its artifacts and a JSON manifest
//! into the output directory, and exits with:
//! 0 on success, 2 on an inconclusive classification, 3 on a certificate
//! refusal, and 1 on any error.

mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand};
use commands::Outcome;
use config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "qhavg",
    version,
    about = "Quasihyperbolic distance fields, averaging sweeps, and divergence certificates"
)]
struct Cli {
    /// Experiment configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides the configured one).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed for sampled checks (overrides the configured one).
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "INT")]
    threads: Option<usize>,

    /// Check tolerance (overrides the configured one).
    #[arg(long, global = true, value_name = "FLOAT")]
    tol: Option<f64>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rasterize the domain at every configured pitch.
    Rasterize,
    /// Solve the distance field from z0 at every configured pitch.
    Solve,
    /// L^s integrals of the field over the s-grid and pitch list.
    Integrate,
    /// Joint refinement/truncation sweep with growth classification per s.
    Sweep,
    /// Classify the whole s-grid and bracket the growth threshold.
    Scan,
    /// Hall oscillation ratios against their guaranteed lower bounds.
    Poincare,
    /// Verify an essential-tube family and certify series divergence.
    Tubes,
    /// Generate a subdivision family, validate its axioms, export it.
    Whitney,
    /// Two-domain union inequalities: pointwise, subset, and averaged chain.
    Union,
    /// Aggregate the manifests of one output directory.
    Report,
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Rasterize => "rasterize",
            Cmd::Solve => "solve",
            Cmd::Integrate => "integrate",
            Cmd::Sweep => "sweep",
            Cmd::Scan => "scan",
            Cmd::Poincare => "poincare",
            Cmd::Tubes => "tubes",
            Cmd::Whitney => "whitney",
            Cmd::Union => "union",
            Cmd::Report => "report",
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, String> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or("missing --config <PATH>; every subcommand needs the experiment file")?;
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(out) = cli.out {
        cfg.run.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(tol) = cli.tol {
        if !(tol > 0.0) {
            return Err("--tol must be positive".into());
        }
        cfg.run.tol = tol;
    }
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| format!("cannot configure {threads} threads: {e}"))?;
    }
    let out = cfg.run.out_dir.clone();
    let tol = cfg.run.tol;
    match cli.cmd {
        Cmd::Rasterize => commands::cmd_rasterize(&cfg, &out),
        Cmd::Solve => commands::cmd_solve(&cfg, &out),
        Cmd::Integrate => commands::cmd_integrate(&cfg, &out),
        Cmd::Sweep => commands::cmd_sweep(&cfg, &out),
        Cmd::Scan => commands::cmd_scan(&cfg, &out),
        Cmd::Poincare => commands::cmd_poincare(&cfg, &out, tol),
        Cmd::Tubes => commands::cmd_tubes(&cfg, &out, tol),
        Cmd::Whitney => commands::cmd_whitney(&cfg, &out),
        Cmd::Union => commands::cmd_union(&cfg, &out),
        Cmd::Report => commands::cmd_report(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.cmd.name();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("{name}: finished with status {:?}", outcome);
            ExitCode::from(outcome.code() as u8)
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
