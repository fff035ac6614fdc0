use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use topopt::commands::{self, DEFAULT_EPS_LIST};
use topopt::io::{parse_direction, RunManifest};
use topopt::levelset::SaturationR;
use topopt::presets;
use topopt::sensitivity::DescentChoice;

/// Fixed-domain level-set topology optimization for minimal compliance.
#[derive(Parser)]
#[command(name = "topopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the descent loop and write VTK snapshots and a convergence CSV.
    Run {
        #[command(flatten)]
        common: Common,
        /// Descent direction: i (pointwise), ii (saturated) or iii (smoothed).
        #[arg(long)]
        direction: Option<String>,
        /// Override the iteration bound.
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Compare states at several epsilon values against the sharp reference.
    EpsStudy {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly decreasing epsilon values.
        #[arg(long, value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
        /// Level set to study (`x,y,g` CSV as written by `run`); defaults to the initial guess.
        #[arg(long)]
        g_file: Option<PathBuf>,
    },
    /// Check the analytic directional derivative against central differences.
    GradCheck {
        #[command(flatten)]
        common: Common,
        /// Number of random directions.
        #[arg(long, default_value_t = 5)]
        directions: usize,
        #[arg(long, default_value_t = 1e-5)]
        fd_step: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// cantilever, bridge or bridge-half.
    #[arg(long)]
    preset: Option<String>,
    /// INI configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid resolution as NXxNY, e.g. 120x60.
    #[arg(long)]
    resolution: Option<String>,
}

impl Common {
    fn manifest(&self) -> Result<RunManifest> {
        let mut manifest = match (&self.config, &self.preset) {
            (Some(path), None) => RunManifest::from_file(path)?,
            (None, Some(name)) => RunManifest::for_preset(presets::by_name(name)?),
            (None, None) => RunManifest::for_preset(presets::cantilever()),
            (Some(_), Some(_)) => bail!("--preset and --config are mutually exclusive; set the preset in the config"),
        };
        if let Some(out) = &self.out {
            manifest.out_dir = out.clone();
        }
        if let Some(res) = &self.resolution {
            let (nx, ny) = res
                .split_once(['x', 'X'])
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                .with_context(|| format!("invalid resolution '{res}', expected NXxNY"))?;
            manifest.preset.mesh(nx, ny)?;
            manifest.resolution = (nx, ny);
        }
        Ok(manifest)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, direction, max_iters } => {
            let mut manifest = common.manifest()?;
            if let Some(d) = direction {
                let (c, gamma) = match manifest.optimizer.direction {
                    DescentChoice::DirII(r) => (r.c, 1e-3),
                    DescentChoice::DirIII { gamma } => (SaturationR::default().c, gamma),
                    DescentChoice::DirI => (SaturationR::default().c, 1e-3),
                };
                manifest.optimizer.direction = parse_direction(&d, c, gamma)?;
            }
            if let Some(n) = max_iters {
                manifest.optimizer.max_iters = n;
                manifest.optimizer.validate()?;
            }
            let summary = commands::cmd_run(&manifest)?;
            println!(
                "{} iterations, J {:.6} -> {:.6}, stop: {}",
                summary.history.len(),
                summary.initial_cost,
                summary.final_cost,
                summary.stop_reason
            );
            println!("history written to {}", summary.history_path.display());
        }
        Command::EpsStudy { common, eps_list, g_file } => {
            let manifest = common.manifest()?;
            let eps = eps_list.unwrap_or_else(|| DEFAULT_EPS_LIST.to_vec());
            let study = commands::cmd_eps_study(&manifest, &eps, g_file.as_deref())?;
            print!("{}", study.to_csv());
        }
        Command::GradCheck { common, directions, fd_step, seed } => {
            let manifest = common.manifest()?;
            let (rows, max) = commands::cmd_grad_check(&manifest, directions, fd_step, seed)?;
            for r in &rows {
                println!("{:>8}  analytic {:+.10e}  fd {:+.10e}  rel {:.2e}", r.label, r.analytic, r.finite_difference, r.rel_error);
            }
            println!("max relative error {max:.3e}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    topopt::par::init_threads_from_env();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
