use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use memsim_core::config::{parse_number_list, RunConfig};
use memsim_core::sweep::{all_pass, run_scaling_check, scaling_csv, Pipeline};
use memsim_core::{make_target_mode, ControlSolution, Error};

/// Readout simulator for a cavity-assisted Raman quantum memory.
#[derive(Parser)]
#[command(name = "memsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the configured durations and write the budget tables.
    Run {
        #[command(flatten)]
        common: Common,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory, overrides `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the 1/ω_sg² scaling of the luminescence weights.
    Scaling {
        #[command(flatten)]
        common: Common,
        /// Multipliers applied to ω_sg.
        #[arg(long, default_value = "0.5,2,4")]
        factors: String,
        /// Duration 2κT of the run being rescaled.
        #[arg(long, default_value_t = 12.0)]
        tau: f64,
        /// Also write scaling.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regime checks only.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma list of durations 2κT, overrides `[sweep] durations`.
    #[arg(long)]
    durations: Option<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(list) = &self.durations {
            cfg.durations = parse_number_list(list)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

fn config_err(e: Error) -> Failure {
    Failure::Config(e.into())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Run { common, jobs, out } => {
            let mut cfg = common.load().map_err(config_err)?;
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            let pipeline = Pipeline::new(&cfg).map_err(config_err)?;
            let runs = pipeline.run_all(jobs).map_err(|e| Failure::Run(e.into()))?;
            pipeline
                .write_outputs(&cfg.out_dir, &runs)
                .with_context(|| format!("writing outputs to {}", cfg.out_dir.display()))
                .map_err(Failure::Run)?;
            print!("{}", pipeline.summary(&runs));
            Ok(all_pass(&runs))
        }
        Command::Scaling { common, factors, tau, out } => {
            let cfg = common.load().map_err(config_err)?;
            let factors = parse_number_list(&factors).map_err(config_err)?;
            if factors.is_empty() {
                return Err(Failure::Config(anyhow::anyhow!("no scaling factors given")));
            }
            let rows = run_scaling_check(&cfg, tau, &factors).map_err(|e| match e {
                Error::InvalidParameter { .. } => config_err(e),
                other => Failure::Run(other.into()),
            })?;
            let p = cfg.validate().map_err(config_err)?;
            let table = scaling_csv(&cfg.header(&p), &rows);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)
                    .and_then(|_| std::fs::write(dir.join("scaling.csv"), &table))
                    .with_context(|| format!("writing {}", dir.display()))
                    .map_err(Failure::Run)?;
            }
            print!("{table}");
            Ok(rows.iter().all(|r| r.deviation < 1e-10))
        }
        Command::Validate { common } => {
            let cfg = common.load().map_err(config_err)?;
            let p = cfg.validate().map_err(config_err)?;
            let mut pass = true;
            for &tau in &cfg.durations {
                let duration = tau / (2.0 * p.kappa);
                let report = make_target_mode(duration, p.kappa, cfg.grid_n)
                    .and_then(|m| ControlSolution::synthesize(&m, &p, &cfg.control))
                    .map(|c| memsim_core::params::validate_regime(&p, &cfg.thresholds, c.omega_max(), duration));
                match report {
                    Ok(r) => {
                        pass &= r.pass;
                        println!(
                            "tau {tau}: gamma/|delta| {:.4} kappa/|delta| {:.4} 2|omega_sg|/gamma {:.3} (> {}) D {:.4} (< {}) {}",
                            r.gamma_over_delta.value,
                            r.kappa_over_delta.value,
                            r.spin_splitting.value,
                            r.spin_splitting.limit,
                            r.depletion.value,
                            r.depletion.limit,
                            if r.pass { "pass" } else { "FAIL" }
                        );
                    }
                    Err(e) => {
                        pass = false;
                        println!("tau {tau}: error: {e}");
                    }
                }
            }
            Ok(pass)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("memsim: configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("memsim: {e:#}");
            ExitCode::from(1)
        }
    }
}
