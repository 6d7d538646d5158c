//! `icrlab gradcheck`: analytic-vs-finite-difference verification gate.

use clap::Args;
use serde::Serialize;

use icrlab_core::geometry::BBox;
use icrlab_core::icr::{self, IcrConfig};
use icrlab_core::loss::{self, grad_close, grad_tolerance_ratio, LossKind};
use icrlab_core::sample;

use crate::output::{config_hash, to_pretty_json, OutDir};
use crate::{CliError, Format};

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Check a single loss kind.
    #[arg(long, conflicts_with = "all")]
    pub loss: Option<LossKind>,

    /// Check every loss kind.
    #[arg(long)]
    pub all: bool,

    /// Random general-position triples per kind.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,

    /// Relative tolerance; the absolute floor is tol/1000.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,

    /// Penalty weight for the composed-loss checks.
    #[arg(long, default_value_t = icrlab_core::icr::DEFAULT_DELTA)]
    pub delta: f64,

    /// Sampler seed.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    #[arg(long)]
    pub out: Option<std::path::PathBuf>,

    #[arg(long, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Serialize)]
struct ResolvedConfig {
    kinds: Vec<LossKind>,
    samples: usize,
    tol: f64,
    floor: f64,
    delta: f64,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct WorstCase {
    kind: LossKind,
    composed: bool,
    tolerance_ratio: f64,
    pred: BBox,
    gt: BBox,
    container: BBox,
    analytic: [f64; 4],
    finite_difference: [f64; 4],
}

#[derive(Debug, Serialize)]
struct KindReport {
    kind: LossKind,
    samples: usize,
    failures: usize,
    worst: WorstCase,
}

pub fn run(args: GradcheckArgs) -> Result<(), CliError> {
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    if args.tol <= 0.0 || !args.tol.is_finite() {
        return Err(CliError::Usage(format!(
            "--tol must be positive and finite, got {}",
            args.tol
        )));
    }
    let kinds: Vec<LossKind> = match (args.all, args.loss) {
        (false, Some(kind)) => vec![kind],
        _ => LossKind::ALL.to_vec(),
    };
    let floor = args.tol * 1e-3;

    let resolved = ResolvedConfig {
        kinds: kinds.clone(),
        samples: args.samples,
        tol: args.tol,
        floor,
        delta: args.delta,
        seed: args.seed,
    };
    let hash = config_hash("gradcheck", &resolved)?;

    let triples = sample::triples(args.seed, args.samples);
    let mut reports = Vec::new();
    let mut any_failure = false;

    for &kind in &kinds {
        let cfg = IcrConfig::new(args.delta, kind)
            .map_err(|e| CliError::Config(format!("--delta: {e}")))?;
        let mut failures = 0usize;
        let mut worst: Option<WorstCase> = None;

        for &(pred, gt, container) in &triples {
            let step = 1e-6 * pred.width().max(pred.height()).max(1.0);
            let checks = [
                (
                    false,
                    loss::loss_grad(kind, pred, gt).grad,
                    loss::fd_grad(kind, pred, gt, step),
                ),
                (
                    true,
                    icr::icr_loss(pred, gt, container, &cfg).grad,
                    icr::fd_grad(pred, gt, container, &cfg, step),
                ),
            ];
            for (composed, analytic, fd) in checks {
                let ratio = grad_tolerance_ratio(&analytic, &fd, args.tol, floor);
                if !grad_close(&analytic, &fd, args.tol, floor) {
                    failures += 1;
                }
                if worst.as_ref().is_none_or(|w| ratio > w.tolerance_ratio) {
                    worst = Some(WorstCase {
                        kind,
                        composed,
                        tolerance_ratio: ratio,
                        pred,
                        gt,
                        container,
                        analytic,
                        finite_difference: fd,
                    });
                }
            }
        }

        let worst = worst.expect("at least one sample was checked");
        if failures > 0 {
            any_failure = true;
        }
        reports.push(KindReport {
            kind,
            samples: args.samples,
            failures,
            worst,
        });
    }

    let mut out = OutDir::resolve(args.out.clone());
    out.write("gradcheck-report.json", &to_pretty_json(&reports)?)?;
    out.finish("gradcheck", &hash)?;

    match args.format {
        Format::Json => println!("{}", to_pretty_json(&reports)?),
        Format::Text => {
            for r in &reports {
                println!(
                    "{}: {} samples, {} failures, worst tolerance ratio {:.4}{}",
                    r.kind,
                    r.samples,
                    r.failures,
                    r.worst.tolerance_ratio,
                    if r.worst.composed {
                        " (icr-composed)"
                    } else {
                        " (base)"
                    }
                );
            }
        }
    }

    if any_failure {
        let failing: Vec<&KindReport> = reports.iter().filter(|r| r.failures > 0).collect();
        return Err(CliError::Verification(format!(
            "gradient check failed; worst cases: {}",
            to_pretty_json(&failing)?
        )));
    }
    Ok(())
}
