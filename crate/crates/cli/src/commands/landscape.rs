//! `icrlab landscape`: grid export and base-vs-ICR comparison.

use clap::Args;
use serde::Serialize;

use icrlab_core::landscape::{self, Grid, GridSpec};

use crate::output::{config_hash, to_pretty_json, OutDir};
use crate::{scenario, CliError, CommonArgs, Format};

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Evaluate the ICR-composed arm instead of the base arm.
    #[arg(long)]
    pub icr: bool,

    /// Penalty weight; only meaningful with --icr or --compare.
    #[arg(long)]
    pub delta: Option<f64>,

    /// Nodes per grid axis.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,

    /// Evaluate both arms and write a comparison summary.
    #[arg(long)]
    pub compare: bool,
}

#[derive(Debug, Serialize)]
struct ResolvedConfig<'a> {
    base_spec: &'a GridSpec,
    icr_spec: Option<&'a GridSpec>,
    compare: bool,
}

pub fn run(args: LandscapeArgs) -> Result<(), CliError> {
    let scenario = scenario::resolve(&args.common.scenario)?;
    let want_icr = args.icr || args.compare;
    let icr = super::icr_from_flags(want_icr, args.delta, args.common.loss, "--icr or --compare")?;

    let make_spec = |icr_cfg| {
        GridSpec::for_scenario(&scenario, args.grid, args.common.loss, icr_cfg)
            .map_err(|e| CliError::Config(format!("--grid/--scenario: {e}")))
    };

    // with --compare both arms run; with --icr only that arm; else base only
    let base_spec = make_spec(None)?;
    let icr_spec = if want_icr {
        Some(make_spec(icr)?)
    } else {
        None
    };

    let hash = config_hash(
        "landscape",
        &ResolvedConfig {
            base_spec: &base_spec,
            icr_spec: icr_spec.as_ref(),
            compare: args.compare,
        },
    )?;

    let mut out = OutDir::resolve(args.common.out.clone());
    let write_grid = |out: &mut OutDir, grid: &Grid, arm: &str| -> Result<(), CliError> {
        let stem = format!("{}-{}-{}", scenario.name, args.common.loss, arm);
        out.write(&format!("{stem}-values.csv"), &grid.values_csv())?;
        out.write(&format!("{stem}-gradmag.csv"), &grid.grad_mag_csv())?;
        out.write(&format!("{stem}.json"), &to_pretty_json(grid)?)?;
        Ok(())
    };

    let mut summary_json = None;
    let mut lines = Vec::new();

    let base_grid = if args.compare || !args.icr {
        let g = landscape::evaluate(&base_spec).map_err(|e| CliError::Config(e.to_string()))?;
        write_grid(&mut out, &g, "base")?;
        let (x, y) = g.argmin_coords();
        lines.push(format!(
            "base arm: {} nodes, argmin at ({x}, {y})",
            args.grid * args.grid
        ));
        Some(g)
    } else {
        None
    };

    let icr_grid = match &icr_spec {
        Some(spec) => {
            let g = landscape::evaluate(spec).map_err(|e| CliError::Config(e.to_string()))?;
            write_grid(&mut out, &g, "icr")?;
            let (x, y) = g.argmin_coords();
            lines.push(format!(
                "icr arm: {} nodes, argmin at ({x}, {y})",
                args.grid * args.grid
            ));
            Some(g)
        }
        None => None,
    };

    if args.compare {
        let base = base_grid.as_ref().expect("compare evaluates the base arm");
        let icr = icr_grid.as_ref().expect("compare evaluates the icr arm");
        let summary = landscape::compare(base, icr).map_err(|e| CliError::Config(e.to_string()))?;
        out.write("compare.json", &to_pretty_json(&summary)?)?;
        lines.push(format!(
            "compare: mean value ratio {:.4}, max {:.4}, argmin agree: {}",
            summary.mean_value_ratio, summary.max_value_ratio, summary.argmin_agree
        ));
        summary_json = Some(summary);
    }

    out.finish("landscape", &hash)?;

    match args.common.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                lines: &'a [String],
                compare: Option<&'a landscape::CompareSummary>,
            }
            println!(
                "{}",
                to_pretty_json(&Report {
                    lines: &lines,
                    compare: summary_json.as_ref()
                })?
            );
        }
        Format::Text => {
            for line in &lines {
                println!("{line}");
            }
        }
    }
    Ok(())
}
