//! Front end for the twin-field QKD toolkit: ingest experiment tables,
//! configure scenarios, and write reproducible CSV reports.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid input data,
//! 3 infeasible decoy data, 4 configuration error.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod fixtures;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ConfigFile, Settings};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "tfqkd", version, about = "Twin-field QKD key-rate analysis and phase-drift simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario file (`key = value`), or `fixture:NAME`.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Experiment data CSV, or `fixture:NAME`. Defaults to the bundled tables.
    #[arg(long, global = true)]
    pub data: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long, global = true, value_enum)]
    pub feedback: Option<OnOff>,
    /// Widening of infeasible decoy data: `auto`, `off`, or a relative amount.
    #[arg(long, global = true)]
    pub relax: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Calibration,
    Analytic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bound yields, leakage and key rate for every record of the data file.
    Analyze,
    /// Forward-simulate decoy data, then analyze it. With `--data`, every
    /// record's distance and intensities are simulated.
    Simulate,
    /// Rate against distance, with the linear bound and its crossover.
    Sweep {
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// Optimize the signal intensity at every distance.
        #[arg(long)]
        optimize_mu: bool,
    },
    /// Phase-stabilization session trace.
    Phasesim {
        /// Simulated seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
}

/// Config file with every command-line override folded in, so the config
/// hash covers them.
pub fn effective_config(cli: &Cli) -> Result<ConfigFile> {
    let mut config = match &cli.common.config {
        Some(source) => ConfigFile::load(source)?,
        None => ConfigFile::default(),
    };
    let c = &cli.common;
    if let Some(d) = &c.data {
        config.set("data.path", d);
    }
    if let Some(s) = c.seed {
        config.set("run.seed", s);
    }
    if let Some(b) = c.backend {
        config.set(
            "leakage.backend",
            match b {
                BackendArg::Calibration => "calibration",
                BackendArg::Analytic => "analytic",
            },
        );
    }
    if let Some(f) = c.feedback {
        config.set("phasesim.feedback", match f {
            OnOff::On => "on",
            OnOff::Off => "off",
        });
    }
    if let Some(r) = &c.relax {
        config.set("lp.relax", r);
    }
    match &cli.command {
        Command::Sweep {
            from,
            to,
            step,
            optimize_mu,
        } => {
            if let Some(v) = from {
                config.set("sweep.from_km", v);
            }
            if let Some(v) = to {
                config.set("sweep.to_km", v);
            }
            if let Some(v) = step {
                config.set("sweep.step_km", v);
            }
            if *optimize_mu {
                config.set("sweep.mu", "optimize");
            }
        }
        Command::Phasesim { duration: Some(d) } => config.set("phasesim.duration_s", d),
        _ => {}
    }
    Ok(config)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let settings = Settings::from_config(&effective_config(cli)?)?;
    let out = &cli.common.out;
    match &cli.command {
        Command::Analyze => {
            let o = commands::cmd_analyze(&settings, out)?;
            for r in &o.reports {
                println!(
                    "{:>6} km  R = {:.3e}  R_LB = {:.3e}  beats bound: {}",
                    r.distance_km, r.rate, r.linear_bound, r.beats_bound
                );
            }
            println!("wrote {}", o.path.display());
        }
        Command::Simulate => {
            let targets = match &cli.common.data {
                Some(_) => Some(data::load(&settings.data)?),
                None => None,
            };
            let o = commands::cmd_simulate(&settings, targets.as_ref(), out)?;
            for r in &o.reports {
                println!(
                    "{:>6} km  Q = {:.3e}  e = {:.4}  R = {:.3e}",
                    r.distance_km,
                    r.inputs.q_code.get(),
                    r.inputs.e_code.get(),
                    r.rate
                );
            }
            println!("wrote {}", o.yields_path.display());
            println!("wrote {}", o.report_path.display());
        }
        Command::Sweep { .. } => {
            let o = commands::cmd_sweep(&settings, out)?;
            let failed = o.points.iter().filter(|p| p.report.is_err()).count();
            if failed > 0 {
                log::warn!("{failed} of {} sweep points failed; see the error column", o.points.len());
            }
            match o.crossover {
                Some(c) => println!(
                    "rate exceeds the linear bound from {} km (interpolated {})",
                    c.first_beating_km,
                    c.interpolated_km.map_or("n/a".into(), |k| format!("{k:.1} km"))
                ),
                None => println!("rate never exceeds the linear bound"),
            }
            println!("wrote {}", o.path.display());
        }
        Command::Phasesim { .. } => {
            let o = commands::cmd_phasesim(&settings, out)?;
            println!(
                "mean visibility {:.4}, mean QBER {:.4} over {} s",
                o.trace.mean_visibility(),
                o.trace.mean_qber(),
                settings.duration_s
            );
            println!("wrote {}", o.path.display());
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
