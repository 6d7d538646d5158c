//! The inter-class relational (ICR) penalty.
//!
//! A small object usually sits inside a known larger one (a license plate
//! inside its vehicle). The penalty measures how much of the predicted small
//! box lies inside the *ground-truth* box of the paired larger object (the
//! containment ratio) and scales the base loss by
//! `delta * (1 - ratio) + 1`. A fully contained prediction is left alone;
//! an escaped one has its loss, and so its gradient, amplified by up to
//! `delta + 1`.
//!
//! The container is always the ground-truth large-object box paired with
//! the assigned ground truth; predicted large-object boxes are never used
//! as containers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{corner_area, BBox};
use crate::loss::{self, LossKind};

/// Default penalty weight.
pub const DEFAULT_DELTA: f64 = 2.5;

#[derive(Debug, Error, PartialEq)]
pub enum IcrError {
    #[error("containment ratio must lie in [0, 1], got {0}")]
    RatioOutOfRange(f64),
    #[error("delta must be finite and >= 0, got {0}")]
    InvalidDelta(f64),
    #[error("the simple penalty form requires delta > 1, got {0}")]
    DeltaNotAboveOne(f64),
}

/// Penalty weight plus the base loss it composes with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIcrConfig")]
pub struct IcrConfig {
    pub delta: f64,
    pub base: LossKind,
}

#[derive(Deserialize)]
struct RawIcrConfig {
    delta: f64,
    base: LossKind,
}

impl TryFrom<RawIcrConfig> for IcrConfig {
    type Error = IcrError;

    fn try_from(raw: RawIcrConfig) -> Result<Self, Self::Error> {
        IcrConfig::new(raw.delta, raw.base)
    }
}

impl IcrConfig {
    /// `delta = 0` is allowed and makes the composed loss equal to the
    /// base loss bit for bit, the natural baseline-equivalence control.
    pub fn new(delta: f64, base: LossKind) -> Result<Self, IcrError> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(IcrError::InvalidDelta(delta));
        }
        Ok(Self { delta, base })
    }
}

impl Default for IcrConfig {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            base: LossKind::Ciou,
        }
    }
}

/// A composed evaluation: the base loss, the containment ratio and factor,
/// and the product with its gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IcrEval {
    pub base_value: f64,
    /// Containment ratio of the prediction in the container, in [0, 1].
    pub ratio: f64,
    /// `delta * (1 - ratio) + 1`, in [1, delta + 1].
    pub factor: f64,
    /// `factor * base_value`.
    pub value: f64,
    pub grad: [f64; 4],
    pub kink: bool,
}

/// Fraction of the predicted box's own area overlapped by the container:
/// 1 iff fully contained, 0 iff disjoint.
pub fn containment_ratio(pred: BBox, container: BBox) -> f64 {
    let overlap = loss::overlap_grad(&pred, &container).area;
    (overlap / corner_area(&pred)).clamp(0.0, 1.0)
}

/// The penalty factor `delta * (1 - ratio) + 1`.
pub fn icr_factor(ratio: f64, delta: f64) -> Result<f64, IcrError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(IcrError::RatioOutOfRange(ratio));
    }
    if !delta.is_finite() || delta < 0.0 {
        return Err(IcrError::InvalidDelta(delta));
    }
    Ok(factor_raw(ratio, delta))
}

fn factor_raw(ratio: f64, delta: f64) -> f64 {
    delta * (1.0 - ratio) + 1.0
}

/// The all-or-nothing penalty form: the base value is multiplied by `delta`
/// whenever the prediction is not fully contained. Requires `delta > 1`.
pub fn icr_simple(base_value: f64, ratio: f64, delta: f64) -> Result<f64, IcrError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(IcrError::RatioOutOfRange(ratio));
    }
    if !delta.is_finite() || delta <= 1.0 {
        return Err(IcrError::DeltaNotAboveOne(delta));
    }
    Ok(if ratio < 1.0 {
        delta * base_value
    } else {
        base_value
    })
}

/// The composed loss `(delta * (1 - ratio) + 1) * base(pred, gt)` with its
/// analytic gradient, by the product rule:
///
/// `grad = factor * grad_base + base_value * (-delta) * grad_ratio`.
pub fn icr_loss(pred: BBox, gt: BBox, container: BBox, cfg: &IcrConfig) -> IcrEval {
    let base = loss::loss_grad(cfg.base, pred, gt);
    let (ratio, dratio, ratio_kink) = ratio_grad(&pred, &container);
    let factor = factor_raw(ratio, cfg.delta);
    let value = factor * base.value;
    let corr = base.value * -cfg.delta;
    let grad = [
        factor * base.grad[0] + corr * dratio[0],
        factor * base.grad[1] + corr * dratio[1],
        factor * base.grad[2] + corr * dratio[2],
        factor * base.grad[3] + corr * dratio[3],
    ];
    IcrEval {
        base_value: base.value,
        ratio,
        factor,
        value,
        grad,
        kink: base.kink || ratio_kink,
    }
}

/// [`icr_loss`] for datasets where a small object may lack a paired
/// container. Without a container the factor defaults to 1 (the base loss
/// passes through untouched) and the returned flag is `true` so callers can
/// count the occurrences.
pub fn icr_loss_opt(
    pred: BBox,
    gt: BBox,
    container: Option<BBox>,
    cfg: &IcrConfig,
) -> (IcrEval, bool) {
    match container {
        Some(c) => (icr_loss(pred, gt, c, cfg), false),
        None => {
            let base = loss::loss_grad(cfg.base, pred, gt);
            (
                IcrEval {
                    base_value: base.value,
                    ratio: 1.0,
                    factor: 1.0,
                    value: base.value,
                    grad: base.grad,
                    kink: base.kink,
                },
                true,
            )
        }
    }
}

fn ratio_grad(pred: &BBox, container: &BBox) -> (f64, [f64; 4], bool) {
    let ov = loss::overlap_grad(pred, container);
    let (px1, py1, px2, py2) = pred.corners();
    let (pw, ph) = (px2 - px1, py2 - py1);
    let area = pw * ph;
    let darea = [0.0, 0.0, ph, pw];
    let ratio = (ov.area / area).clamp(0.0, 1.0);
    // d[(I/A)] = (dI*A - I*dA) / A^2
    let inv_a2 = 1.0 / (area * area);
    let dratio = [
        (ov.grad[0] * area - ov.area * darea[0]) * inv_a2,
        (ov.grad[1] * area - ov.area * darea[1]) * inv_a2,
        (ov.grad[2] * area - ov.area * darea[2]) * inv_a2,
        (ov.grad[3] * area - ov.area * darea[3]) * inv_a2,
    ];
    (ratio, dratio, ov.kink)
}

/// Central finite differences of the full composed expression, with the
/// CIoU aspect weight frozen at the unperturbed point exactly as in the
/// analytic gradient.
pub fn fd_grad(pred: BBox, gt: BBox, container: BBox, cfg: &IcrConfig, step: f64) -> [f64; 4] {
    let alpha = match cfg.base {
        LossKind::Ciou => {
            let (v, _) = loss::aspect_v(&pred, &gt);
            loss::ciou_alpha(loss::iou(pred, gt), v)
        }
        _ => 0.0,
    };
    let delta = cfg.delta;
    let base = cfg.base;
    loss::central_diff4(pred, step, move |b| {
        let ratio = containment_ratio(b, container);
        factor_raw(ratio, delta) * loss::loss_value_frozen(base, &b, &gt, alpha)
    })
}
