//! `icrlab simulate`: trajectory runs and randomized suites.

use clap::Args;
use serde::Serialize;

use icrlab_core::sim::{self, SimConfig, Trajectory};

use crate::output::{config_hash, to_pretty_json, OutDir};
use crate::{scenario, CliError, CommonArgs, Format};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Compose the base loss with the ICR penalty.
    #[arg(long)]
    pub icr: bool,

    /// Penalty weight; only meaningful with --icr (default 2.5).
    #[arg(long)]
    pub delta: Option<f64>,

    /// Run a randomized-init suite of this many seeds instead of the
    /// scenario's single init.
    #[arg(long)]
    pub seeds: Option<usize>,

    /// Base seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct ResolvedConfig<'a> {
    scenario: &'a sim::Scenario,
    config: &'a SimConfig,
    seeds: Option<usize>,
}

#[derive(Debug, Serialize)]
struct RunReport {
    file: String,
    converged_at: Option<usize>,
    final_iou: f64,
    final_loss: f64,
    flat: bool,
    aborted: Option<String>,
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let scenario = scenario::resolve(&args.common.scenario)?;
    let icr = super::icr_from_flags(args.icr, args.delta, args.common.loss, "--icr")?;
    let cfg = scenario.into_config(args.common.loss, icr, args.seed);
    cfg.validate()
        .map_err(|e| CliError::Config(format!("--scenario: {e}")))?;

    if let Some(seeds) = args.seeds {
        if seeds == 0 {
            return Err(CliError::Usage("--seeds must be at least 1".into()));
        }
    }

    let hash = config_hash(
        "simulate",
        &ResolvedConfig {
            scenario: &scenario,
            config: &cfg,
            seeds: args.seeds,
        },
    )?;

    let trajectories: Vec<Trajectory> = match args.seeds {
        Some(n) => sim::randomized_suite(&cfg, n).map_err(|e| CliError::Config(e.to_string()))?,
        None => vec![sim::run(&cfg).map_err(|e| CliError::Config(e.to_string()))?],
    };

    let mut out = OutDir::resolve(args.common.out.clone());
    let arm = super::arm_name(args.icr);
    let mut reports = Vec::with_capacity(trajectories.len());
    for t in &trajectories {
        let stem = format!(
            "{}-{}-{}-{}",
            scenario.name, args.common.loss, arm, t.config_echo.seed
        );
        out.write(&format!("{stem}.csv"), &t.to_csv())?;
        out.write(&format!("{stem}.json"), &to_pretty_json(t)?)?;
        let last = t.final_step();
        reports.push(RunReport {
            file: format!("{stem}.csv"),
            converged_at: t.converged_at,
            final_iou: last.iou_to_gt,
            final_loss: last.loss,
            flat: t.is_flat(),
            aborted: t.abort.clone(),
        });
    }
    out.finish("simulate", &hash)?;

    match args.common.format {
        Format::Json => println!("{}", to_pretty_json(&reports)?),
        Format::Text => {
            for r in &reports {
                let mut line = match r.converged_at {
                    Some(at) => format!("{}: converged at iteration {at}", r.file),
                    None => format!("{}: did not converge", r.file),
                };
                line.push_str(&format!(
                    " (final iou {:.4}, loss {:.4})",
                    r.final_iou, r.final_loss
                ));
                if r.flat {
                    line.push_str(" [flat loss: zero gradient everywhere]");
                }
                if let Some(reason) = &r.aborted {
                    line.push_str(&format!(" [aborted: {reason}]"));
                }
                println!("{line}");
            }
        }
    }
    Ok(())
}
