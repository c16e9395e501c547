//! Argument parsing for the `fovguide` binary.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{self, Context};
use crate::config::Config;
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "fovguide", version, about = "Extremal sweep, network training and closed-loop simulation")]
pub struct Cli {
    /// TOML configuration; defaults are used for absent keys or when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory holding every artifact.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (all cores by default).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides `train.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Propagate the extremal family over the (alpha, beta) grid.
    Sweep,
    /// Turn the sweep into supervised samples.
    Dataset,
    /// Train the feedback network.
    Train,
    /// Fly the configured scenario with the network law.
    Simulate,
    /// Fly the scenario with the network law and the PN baselines.
    Compare,
    /// Run the invariant suite on the current artifacts.
    Audit,
    /// Summarize the artifacts in the output directory.
    Report,
    /// Every stage in order.
    Pipeline,
}

impl Cli {
    pub fn context(&self) -> Result<Context> {
        let config = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        Ok(Context { config, out: self.out.clone(), threads: self.threads, seed: self.seed })
    }
}

/// Runs one subcommand and returns a one-line summary.
pub fn execute(cli: &Cli) -> Result<String> {
    let ctx = cli.context()?;
    Ok(match cli.command {
        Command::Sweep => {
            let r = commands::cmd_sweep(&ctx)?;
            format!("sweep: {} trajectories, {} failures", r.seeds.len(), r.failures.len())
        }
        Command::Dataset => format!("dataset: {} samples", commands::cmd_dataset(&ctx)?.len()),
        Command::Train => {
            let (_, r) = commands::cmd_train(&ctx)?;
            format!("train: held-out RMSE {:.3e} (best epoch {})", r.held_out_rmse, r.best_epoch)
        }
        Command::Simulate => {
            let s = commands::cmd_simulate(&ctx)?;
            format!(
                "simulate: {:?}, impact error {:.4} s, sigma peak {:.3} deg, J {:.1}",
                s.outcome, s.impact_time_error, s.sigma_peak_deg, s.effort_j
            )
        }
        Command::Compare => format!("compare: {} laws", commands::cmd_compare(&ctx)?.table.rows.len()),
        Command::Audit => format!("audit: {} checks passed", commands::cmd_audit(&ctx)?.checks.len()),
        Command::Report => {
            commands::cmd_report(&ctx)?;
            format!("report: {}", ctx.out.join(commands::REPORT_MD).display())
        }
        Command::Pipeline => {
            commands::cmd_pipeline(&ctx)?;
            format!("pipeline: done, see {}", ctx.out.join(commands::REPORT_MD).display())
        }
    })
}
