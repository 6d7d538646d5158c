//! `icrlab sweep`: convergence statistics over a list of penalty weights.

use clap::Args;
use serde::Serialize;

use icrlab_core::sim::{self, SimConfig};

use crate::output::{config_hash, to_pretty_json, OutDir};
use crate::{scenario, CliError, CommonArgs, Format};

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Comma-separated penalty weights, e.g. 1.0,1.25,1.5.
    #[arg(long)]
    pub deltas: String,

    /// Randomized-init seeds per weight.
    #[arg(long, default_value_t = 100)]
    pub seeds: usize,

    /// Base seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct ResolvedConfig<'a> {
    config: &'a SimConfig,
    deltas: &'a [f64],
    seeds: usize,
}

fn parse_deltas(spec: &str) -> Result<Vec<f64>, CliError> {
    let mut deltas = Vec::new();
    for token in spec.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        let value: f64 = token.parse().map_err(|_| {
            CliError::Usage(format!("--deltas: cannot parse '{token}' as a number"))
        })?;
        if !value.is_finite() || value < 0.0 {
            return Err(CliError::Usage(format!(
                "--deltas: weights must be finite and >= 0, got {value}"
            )));
        }
        if deltas.contains(&value) {
            eprintln!("warning: --deltas: duplicate weight {value} ignored");
            continue;
        }
        deltas.push(value);
    }
    if deltas.is_empty() {
        return Err(CliError::Usage(
            "--deltas: the weight list must not be empty".into(),
        ));
    }
    Ok(deltas)
}

pub fn run(args: SweepArgs) -> Result<(), CliError> {
    let deltas = parse_deltas(&args.deltas)?;
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let scenario = scenario::resolve(&args.common.scenario)?;
    let cfg = scenario.into_config(args.common.loss, None, args.seed);
    cfg.validate()
        .map_err(|e| CliError::Config(format!("--scenario: {e}")))?;

    let hash = config_hash(
        "sweep",
        &ResolvedConfig {
            config: &cfg,
            deltas: &deltas,
            seeds: args.seeds,
        },
    )?;

    let rows =
        sim::delta_sweep(&cfg, &deltas, args.seeds).map_err(|e| CliError::Config(e.to_string()))?;

    let mut out = OutDir::resolve(args.common.out.clone());
    let stem = format!("sweep-{}-{}", scenario.name, args.common.loss);
    out.write(&format!("{stem}.csv"), &sim::sweep_to_csv(&rows))?;
    out.write(&format!("{stem}.json"), &to_pretty_json(&rows)?)?;
    out.finish("sweep", &hash)?;

    match args.common.format {
        Format::Json => println!("{}", to_pretty_json(&rows)?),
        Format::Text => {
            println!(
                "{:>8}  {:>20}  {:>16}",
                "delta", "median_converged_at", "convergence_rate"
            );
            for r in &rows {
                println!(
                    "{:>8}  {:>20}  {:>16.3}",
                    r.delta, r.median_converged_at, r.convergence_rate
                );
            }
        }
    }
    Ok(())
}
