//! The IoU-family regression losses with values and analytic gradients
//! with respect to the predicted box parameters `(cx, cy, w, h)`.
//!
//! Gradient conventions:
//!
//! - The losses are piecewise smooth; the `min`/`max` selectors in the
//!   intersection and enclosing-box terms introduce kinks where box edges
//!   coincide or just touch. At a kink the gradient returned is a one-sided
//!   subgradient (selector ties resolve as under a positive nudge of the
//!   predicted corner coordinate) and the evaluation is flagged.
//! - The CIoU aspect weight `alpha` is treated as a constant during
//!   differentiation. [`fd_grad`] freezes `alpha` the same way so the two
//!   routes are comparable.
//! - Plain IoU loss has an identically zero gradient for strictly disjoint
//!   boxes. That pathology is reported as-is, not patched; the other kinds
//!   and the ICR penalty exist to work around it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{corner_area, corner_dims, BBox};

/// Which base loss is in play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Iou,
    Giou,
    Diou,
    Ciou,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::Iou,
        LossKind::Giou,
        LossKind::Diou,
        LossKind::Ciou,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Iou => "iou",
            LossKind::Giou => "giou",
            LossKind::Diou => "diou",
            LossKind::Ciou => "ciou",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "iou" => Ok(LossKind::Iou),
            "giou" => Ok(LossKind::Giou),
            "diou" => Ok(LossKind::Diou),
            "ciou" => Ok(LossKind::Ciou),
            other => Err(format!(
                "unknown loss kind '{other}' (expected iou|giou|diou|ciou)"
            )),
        }
    }
}

/// A loss value together with its gradient `d loss / d (cx, cy, w, h)` of
/// the predicted box. `kink` is set when the configuration sits on a
/// non-smooth point (coincident or touching edges) and the gradient is a
/// one-sided subgradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossEval {
    pub value: f64,
    pub grad: [f64; 4],
    pub kink: bool,
}

const ZERO4: [f64; 4] = [0.0; 4];

fn add4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn sub4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

fn scale4(a: [f64; 4], s: f64) -> [f64; 4] {
    [a[0] * s, a[1] * s, a[2] * s, a[3] * s]
}

fn neg4(a: [f64; 4]) -> [f64; 4] {
    [-a[0], -a[1], -a[2], -a[3]]
}

/// Overlap area of `pred` with a fixed box, with its gradient in `pred`.
pub(crate) struct OverlapGrad {
    pub area: f64,
    pub grad: [f64; 4],
    pub kink: bool,
}

// Corner derivatives wrt (cx, cy, w, h).
const D_X1: [f64; 4] = [1.0, 0.0, -0.5, 0.0];
const D_X2: [f64; 4] = [1.0, 0.0, 0.5, 0.0];
const D_Y1: [f64; 4] = [0.0, 1.0, 0.0, -0.5];
const D_Y2: [f64; 4] = [0.0, 1.0, 0.0, 0.5];

pub(crate) fn overlap_grad(pred: &BBox, other: &BBox) -> OverlapGrad {
    let (px1, py1, px2, py2) = pred.corners();
    let (qx1, qy1, qx2, qy2) = other.corners();
    let mut kink = px1 == qx1 || px2 == qx2 || py1 == qy1 || py2 == qy2;

    let (xl, dxl) = if px1 >= qx1 {
        (px1, D_X1)
    } else {
        (qx1, ZERO4)
    };
    let (xr, dxr) = if px2 < qx2 { (px2, D_X2) } else { (qx2, ZERO4) };
    let (yl, dyl) = if py1 >= qy1 {
        (py1, D_Y1)
    } else {
        (qy1, ZERO4)
    };
    let (yr, dyr) = if py2 < qy2 { (py2, D_Y2) } else { (qy2, ZERO4) };

    let iw = xr - xl;
    let ih = yr - yl;
    if iw == 0.0 || ih == 0.0 {
        kink = true;
    }
    if iw <= 0.0 || ih <= 0.0 {
        return OverlapGrad {
            area: 0.0,
            grad: ZERO4,
            kink,
        };
    }
    let diw = sub4(dxr, dxl);
    let dih = sub4(dyr, dyl);
    OverlapGrad {
        area: iw * ih,
        grad: add4(scale4(diw, ih), scale4(dih, iw)),
        kink,
    }
}

struct EnclosingGrad {
    w: f64,
    h: f64,
    dw: [f64; 4],
    dh: [f64; 4],
    kink: bool,
}

fn enclosing_grad(pred: &BBox, other: &BBox) -> EnclosingGrad {
    let (px1, py1, px2, py2) = pred.corners();
    let (qx1, qy1, qx2, qy2) = other.corners();
    let kink = px1 == qx1 || px2 == qx2 || py1 == qy1 || py2 == qy2;

    let (ex1, dex1) = if px1 < qx1 { (px1, D_X1) } else { (qx1, ZERO4) };
    let (ex2, dex2) = if px2 >= qx2 {
        (px2, D_X2)
    } else {
        (qx2, ZERO4)
    };
    let (ey1, dey1) = if py1 < qy1 { (py1, D_Y1) } else { (qy1, ZERO4) };
    let (ey2, dey2) = if py2 >= qy2 {
        (py2, D_Y2)
    } else {
        (qy2, ZERO4)
    };

    EnclosingGrad {
        w: ex2 - ex1,
        h: ey2 - ey1,
        dw: sub4(dex2, dex1),
        dh: sub4(dey2, dey1),
        kink,
    }
}

struct IouGrad {
    iou: f64,
    grad: [f64; 4],
    union: f64,
    dunion: [f64; 4],
    kink: bool,
}

fn iou_grad_terms(pred: &BBox, gt: &BBox) -> IouGrad {
    let ov = overlap_grad(pred, gt);
    let (pw, ph) = corner_dims(pred);
    let ap = pw * ph;
    let dap = [0.0, 0.0, ph, pw];
    let union = ap + corner_area(gt) - ov.area;
    let dunion = sub4(dap, ov.grad);
    let iou = ov.area / union;
    let grad = scale4(
        sub4(scale4(ov.grad, union), scale4(dunion, ov.area)),
        1.0 / (union * union),
    );
    IouGrad {
        iou,
        grad,
        union,
        dunion,
        kink: ov.kink,
    }
}

pub(crate) fn aspect_v(pred: &BBox, gt: &BBox) -> (f64, [f64; 4]) {
    let four_over_pi2 = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);
    let t = (gt.width() / gt.height()).atan() - (pred.width() / pred.height()).atan();
    let v = four_over_pi2 * t * t;
    let denom = pred.width() * pred.width() + pred.height() * pred.height();
    let dv = [
        0.0,
        0.0,
        -2.0 * four_over_pi2 * t * pred.height() / denom,
        2.0 * four_over_pi2 * t * pred.width() / denom,
    ];
    (v, dv)
}

pub(crate) fn ciou_alpha(iou: f64, v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v / ((1.0 - iou) + v)
    }
}

/// Intersection over union, in [0, 1]. 1 iff the boxes coincide, 0 iff
/// they are disjoint.
pub fn iou(pred: BBox, gt: BBox) -> f64 {
    let ov = overlap_grad(&pred, &gt);
    if ov.area == 0.0 {
        return 0.0;
    }
    let union = corner_area(&pred) + corner_area(&gt) - ov.area;
    ov.area / union
}

/// Loss value with the CIoU aspect weight pinned to `alpha` instead of
/// recomputed, so callers can differentiate with `alpha` held constant.
pub(crate) fn loss_value_frozen(kind: LossKind, pred: &BBox, gt: &BBox, alpha: f64) -> f64 {
    let ov = overlap_grad(pred, gt);
    let union = corner_area(pred) + corner_area(gt) - ov.area;
    let iou = ov.area / union;
    let base = 1.0 - iou;
    match kind {
        LossKind::Iou => base,
        LossKind::Giou => {
            let enc = enclosing_grad(pred, gt);
            let c = enc.w * enc.h;
            base + (c - union) / c
        }
        LossKind::Diou => base + center_distance_term(pred, gt),
        LossKind::Ciou => {
            let (v, _) = aspect_v(pred, gt);
            base + center_distance_term(pred, gt) + alpha * v
        }
    }
}

fn center_distance_term(pred: &BBox, gt: &BBox) -> f64 {
    let enc = enclosing_grad(pred, gt);
    let c2 = enc.w * enc.w + enc.h * enc.h;
    let dx = pred.cx() - gt.cx();
    let dy = pred.cy() - gt.cy();
    (dx * dx + dy * dy) / c2
}

/// Scalar loss value for one (pred, gt) pair.
pub fn loss_value(kind: LossKind, pred: BBox, gt: BBox) -> f64 {
    let alpha = match kind {
        LossKind::Ciou => {
            let (v, _) = aspect_v(&pred, &gt);
            ciou_alpha(iou(pred, gt), v)
        }
        _ => 0.0,
    };
    loss_value_frozen(kind, &pred, &gt, alpha)
}

/// Loss value and analytic gradient wrt the predicted box.
pub fn loss_grad(kind: LossKind, pred: BBox, gt: BBox) -> LossEval {
    let base = iou_grad_terms(&pred, &gt);
    let mut value = 1.0 - base.iou;
    let mut grad = neg4(base.grad);
    let mut kink = base.kink;

    match kind {
        LossKind::Iou => {}
        LossKind::Giou => {
            let enc = enclosing_grad(&pred, &gt);
            kink |= enc.kink;
            let c = enc.w * enc.h;
            let dc = add4(scale4(enc.dw, enc.h), scale4(enc.dh, enc.w));
            value += (c - base.union) / c;
            // d[(c - u)/c] = (u*dc - du*c) / c^2
            let dpen = scale4(
                sub4(scale4(dc, base.union), scale4(base.dunion, c)),
                1.0 / (c * c),
            );
            grad = add4(grad, dpen);
        }
        LossKind::Diou | LossKind::Ciou => {
            let enc = enclosing_grad(&pred, &gt);
            kink |= enc.kink;
            let c2 = enc.w * enc.w + enc.h * enc.h;
            let dc2 = add4(scale4(enc.dw, 2.0 * enc.w), scale4(enc.dh, 2.0 * enc.h));
            let dx = pred.cx() - gt.cx();
            let dy = pred.cy() - gt.cy();
            let rho2 = dx * dx + dy * dy;
            let drho2 = [2.0 * dx, 2.0 * dy, 0.0, 0.0];
            value += rho2 / c2;
            let ddist = scale4(sub4(scale4(drho2, c2), scale4(dc2, rho2)), 1.0 / (c2 * c2));
            grad = add4(grad, ddist);

            if kind == LossKind::Ciou {
                let (v, dv) = aspect_v(&pred, &gt);
                let alpha = ciou_alpha(base.iou, v);
                value += alpha * v;
                grad = add4(grad, scale4(dv, alpha));
            }
        }
    }

    LossEval { value, grad, kink }
}

/// Central finite differences of the loss per predicted-box coordinate.
///
/// For CIoU the aspect weight is frozen at the unperturbed point, matching
/// the analytic gradient's convention.
pub fn fd_grad(kind: LossKind, pred: BBox, gt: BBox, step: f64) -> [f64; 4] {
    let alpha = match kind {
        LossKind::Ciou => {
            let (v, _) = aspect_v(&pred, &gt);
            ciou_alpha(iou(pred, gt), v)
        }
        _ => 0.0,
    };
    central_diff4(pred, step, |b| loss_value_frozen(kind, &b, &gt, alpha))
}

pub(crate) fn central_diff4<F: Fn(BBox) -> f64>(pred: BBox, step: f64, f: F) -> [f64; 4] {
    let p = pred.params();
    let mut grad = ZERO4;
    for (i, g) in grad.iter_mut().enumerate() {
        let mut hi = p;
        hi[i] += step;
        let mut lo = p;
        lo[i] -= step;
        let fhi = f(BBox::from_params(hi).expect("perturbed box must stay valid"));
        let flo = f(BBox::from_params(lo).expect("perturbed box must stay valid"));
        *g = (fhi - flo) / (2.0 * step);
    }
    grad
}

/// Arithmetic mean of per-pair losses over a batch. Panics on an empty
/// batch.
pub fn mean_loss(kind: LossKind, pairs: &[(BBox, BBox)]) -> f64 {
    assert!(!pairs.is_empty(), "mean_loss needs at least one pair");
    pairs
        .iter()
        .map(|(p, g)| loss_value(kind, *p, *g))
        .sum::<f64>()
        / pairs.len() as f64
}

/// Componentwise closeness check used by the gradient verification suites:
/// `|a - b| <= floor + rel * max(|a|, |b|)` for every component.
pub fn grad_close(a: &[f64; 4], b: &[f64; 4], rel: f64, floor: f64) -> bool {
    a.iter()
        .zip(b.iter())
        .all(|(x, y)| (x - y).abs() <= floor + rel * x.abs().max(y.abs()))
}

/// How close two gradients come to violating the [`grad_close`] tolerance:
/// the largest componentwise `|a - b| / (floor + rel * max(|a|, |b|))`.
/// Values at or above 1 mean failure.
pub fn grad_tolerance_ratio(a: &[f64; 4], b: &[f64; 4], rel: f64, floor: f64) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / (floor + rel * x.abs().max(y.abs())))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bx(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
        BBox::new(cx, cy, w, h).unwrap()
    }

    fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::from_corners(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = from_corners(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(a, a), 1.0);

        let b = from_corners(5.0, 0.0, 15.0, 10.0);
        // 50 shared / 150 union
        assert_eq!(iou(a, b), 50.0 / 150.0);

        let far = from_corners(20.0, 0.0, 30.0, 10.0);
        assert_eq!(iou(a, far), 0.0);
    }

    #[test]
    fn loss_value_identity() {
        let a = bx(3.0, 4.0, 5.0, 2.0);
        for kind in LossKind::ALL {
            assert_eq!(loss_value(kind, a, a), 0.0, "kind {kind}");
        }
    }

    #[test]
    fn giou_nested_equals_iou() {
        let gt = from_corners(0.0, 0.0, 10.0, 10.0);
        let pred = from_corners(2.0, 2.0, 8.0, 8.0);
        let g = loss_value(LossKind::Giou, pred, gt);
        let i = loss_value(LossKind::Iou, pred, gt);
        assert!((g - 0.64).abs() < 1e-15);
        // nested boxes: the enclosing-box penalty vanishes identically
        assert_eq!(g, i);
    }

    #[test]
    fn diou_concentric_equals_iou() {
        let gt = bx(5.0, 5.0, 10.0, 8.0);
        let pred = bx(5.0, 5.0, 6.0, 4.0);
        assert_eq!(
            loss_value(LossKind::Diou, pred, gt),
            loss_value(LossKind::Iou, pred, gt)
        );
    }

    #[test]
    fn zero_overlap_ordering() {
        let a = from_corners(0.0, 0.0, 10.0, 10.0);
        let b = from_corners(20.0, 5.0, 30.0, 12.0);
        assert_eq!(loss_value(LossKind::Iou, a, b), 1.0);
        assert!(loss_value(LossKind::Giou, a, b) > 1.0);
        assert!(loss_value(LossKind::Diou, a, b) > 1.0);
        assert!(loss_value(LossKind::Ciou, a, b) > 1.0);
    }

    #[test]
    fn ciou_alpha_zero_when_aspect_matches() {
        // identical aspect and full overlap would make alpha 0/0 otherwise
        let a = bx(0.0, 0.0, 8.0, 4.0);
        assert_eq!(loss_value(LossKind::Ciou, a, a), 0.0);
        let e = loss_grad(LossKind::Ciou, a, a);
        assert!(e.grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn diou_grad_sign_for_offset_center() {
        // equal boxes, pred shifted right by 0.5: moving further right
        // must increase the loss
        let gt = bx(0.0, 0.0, 10.0, 10.0);
        let pred = bx(0.5, 0.0, 10.0, 10.0);
        let e = loss_grad(LossKind::Diou, pred, gt);
        assert!(e.grad[0] > 0.0);
        let fd = fd_grad(LossKind::Diou, pred, gt, 1e-6);
        assert!(fd[0] > 0.0);
    }

    #[test]
    fn iou_grad_zero_when_disjoint() {
        let a = from_corners(0.0, 0.0, 10.0, 10.0);
        let b = from_corners(30.0, 1.0, 45.0, 12.0);
        let e = loss_grad(LossKind::Iou, a, b);
        assert_eq!(e.value, 1.0);
        assert_eq!(e.grad, [0.0; 4]);
        assert_eq!(fd_grad(LossKind::Iou, a, b, 1e-4), [0.0; 4]);
    }

    #[test]
    fn hand_derived_gradients_nested_concentric() {
        // pred (0,0)-(4,2) contains gt (1,0.5)-(3,1.5); same center, same
        // aspect. All selectors pick the gt side, so dI = 0 and
        //   d iou = -I * dAp / U^2 = -2 * (0,0,2,4) / 64.
        // The enclosing box is pred itself, the center offset is zero, and
        // the aspect term vanishes, so every kind reduces to the IoU grad:
        //   grad = (0, 0, 1/16, 1/8), exact in binary.
        let pred = from_corners(0.0, 0.0, 4.0, 2.0);
        let gt = from_corners(1.0, 0.5, 3.0, 1.5);
        let expect = [0.0, 0.0, 0.0625, 0.125];
        for kind in LossKind::ALL {
            let e = loss_grad(kind, pred, gt);
            assert_eq!(e.grad, expect, "kind {kind}");
        }
        assert_eq!(loss_value(LossKind::Iou, pred, gt), 0.75);
    }

    #[test]
    fn hand_derived_gradients_partial_overlap() {
        // pred (0,0)-(2,2) vs gt (1,1)-(3,3): I = 1, U = 7, iou = 1/7,
        //   dI = (1, 1, 0.5, 0.5),  dU = (-1, -1, 1.5, 1.5),
        //   d iou = (dI*U - I*dU) / U^2 = (8, 8, 2, 2) / 49.
        // Enclosing box (0,0)-(3,3): C = 9, dC = (-3, -3, 1.5, 1.5),
        //   d[(C-U)/C] = (U*dC - dU*C) / C^2 = (-12, -12, -3, -3) / 81.
        // Centers offset (-1, -1): rho^2 = 2, c^2 = 18,
        //   d[rho^2/c^2] = (-24, -24, -6, -6) / 324.
        // Equal aspects make CIoU collapse onto DIoU.
        let pred = from_corners(0.0, 0.0, 2.0, 2.0);
        let gt = from_corners(1.0, 1.0, 3.0, 3.0);

        let iou_grad = loss_grad(LossKind::Iou, pred, gt);
        let expect_iou = [-8.0 / 49.0, -8.0 / 49.0, -2.0 / 49.0, -2.0 / 49.0];
        for (g, e) in iou_grad.grad.iter().zip(expect_iou) {
            assert!((g - e).abs() < 1e-15, "iou: {g} vs {e}");
        }

        let giou_grad = loss_grad(LossKind::Giou, pred, gt);
        let expect_giou = [
            -8.0 / 49.0 - 12.0 / 81.0,
            -8.0 / 49.0 - 12.0 / 81.0,
            -2.0 / 49.0 - 3.0 / 81.0,
            -2.0 / 49.0 - 3.0 / 81.0,
        ];
        for (g, e) in giou_grad.grad.iter().zip(expect_giou) {
            assert!((g - e).abs() < 1e-15, "giou: {g} vs {e}");
        }
        assert!((loss_value(LossKind::Giou, pred, gt) - (6.0 / 7.0 + 2.0 / 9.0)).abs() < 1e-15);

        let diou_grad = loss_grad(LossKind::Diou, pred, gt);
        let expect_diou = [
            -8.0 / 49.0 - 24.0 / 324.0,
            -8.0 / 49.0 - 24.0 / 324.0,
            -2.0 / 49.0 - 6.0 / 324.0,
            -2.0 / 49.0 - 6.0 / 324.0,
        ];
        for (g, e) in diou_grad.grad.iter().zip(expect_diou) {
            assert!((g - e).abs() < 1e-15, "diou: {g} vs {e}");
        }

        let ciou_grad = loss_grad(LossKind::Ciou, pred, gt);
        assert_eq!(ciou_grad.grad, diou_grad.grad);
    }

    #[test]
    fn iou_gradient_does_not_vanish_at_coincidence() {
        // near pred == gt the IoU loss behaves like c*|offset|: the
        // gradient magnitude stays bounded away from zero on both sides of
        // the kink instead of decaying smoothly
        let gt = bx(0.0, 0.0, 10.0, 10.0);
        for delta in [0.1, 1e-2, 1e-3, 1e-4] {
            for sign in [1.0, -1.0] {
                let pred = bx(sign * delta, 0.0, 10.0, 10.0);
                let e = loss_grad(LossKind::Iou, pred, gt);
                // analytic limit of |d loss/d cx| as offset -> 0 is 0.2
                assert!(
                    (e.grad[0].abs() - 0.2).abs() < 0.05,
                    "offset {delta}*{sign}: grad {:?}",
                    e.grad
                );
                assert_eq!(e.grad[0].signum(), sign);
                let fd = fd_grad(LossKind::Iou, pred, gt, delta * 1e-3);
                assert!((fd[0] - e.grad[0]).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn kink_flagged_on_coincident_edges() {
        let gt = from_corners(0.0, 0.0, 10.0, 10.0);
        let pred = from_corners(0.0, 2.0, 6.0, 8.0); // shares gt's left edge
        assert!(loss_grad(LossKind::Ciou, pred, gt).kink);
        let touching = from_corners(10.0, 0.0, 20.0, 10.0);
        assert!(loss_grad(LossKind::Iou, touching, gt).kink);
        let clear = from_corners(1.0, 1.0, 6.0, 8.0);
        assert!(!loss_grad(LossKind::Ciou, clear, gt).kink);
    }

    #[test]
    fn analytic_matches_fd_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..250 {
            let (pred, gt) = sample::general_pair(&mut rng);
            let scale = pred.width().max(pred.height()).max(1.0);
            let step = 1e-6 * scale;
            for kind in LossKind::ALL {
                let analytic = loss_grad(kind, pred, gt);
                assert!(!analytic.kink);
                let fd = fd_grad(kind, pred, gt, step);
                assert!(
                    grad_close(&analytic.grad, &fd, 1e-4, 1e-7),
                    "kind {kind}: analytic {:?} vs fd {:?} at pred {:?} gt {:?}",
                    analytic.grad,
                    fd,
                    pred,
                    gt
                );
            }
        }
    }

    #[test]
    fn fd_error_shrinks_quadratically() {
        // smooth overlapping configuration; central differences should gain
        // roughly two orders per step halving until roundoff bites
        let pred = bx(1.3, -0.7, 9.0, 5.0);
        let gt = bx(3.1, 0.4, 6.0, 8.0);
        let exact = loss_grad(LossKind::Ciou, pred, gt).grad;
        let err = |step: f64| {
            let fd = fd_grad(LossKind::Ciou, pred, gt, step);
            exact
                .iter()
                .zip(fd.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err(1e-2);
        let e2 = err(5e-3);
        assert!(e1 > 1e-12, "step too small to see truncation error");
        assert!(e2 < 0.35 * e1, "e1={e1:.3e} e2={e2:.3e}");
    }

    #[test]
    fn mean_loss_averages_pairs() {
        let a = from_corners(0.0, 0.0, 10.0, 10.0);
        let b = from_corners(5.0, 0.0, 15.0, 10.0);
        let pairs = vec![(a, a), (a, b)];
        let expect = (0.0 + loss_value(LossKind::Iou, a, b)) / 2.0;
        assert_eq!(mean_loss(LossKind::Iou, &pairs), expect);
    }

    #[test]
    fn loss_kind_round_trips_through_str() {
        for kind in LossKind::ALL {
            assert_eq!(kind.name().parse::<LossKind>().unwrap(), kind);
        }
        assert!("mse".parse::<LossKind>().is_err());
    }

    proptest! {
        #[test]
        fn identity_is_global_minimum_and_values_bounded(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (pred, gt) = sample::general_pair(&mut rng);
            for kind in LossKind::ALL {
                prop_assert!(loss_value(kind, pred, gt) >= 0.0);
                prop_assert_eq!(loss_value(kind, gt, gt), 0.0);
            }
            prop_assert!(loss_value(LossKind::Iou, pred, gt) <= 1.0);
            prop_assert!(loss_value(LossKind::Giou, pred, gt) < 2.0);
            prop_assert!(loss_value(LossKind::Diou, pred, gt) < 2.0);
        }

        #[test]
        fn nested_degeneracy(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (inner, outer) = sample::nested_pair(&mut rng);
            let g = loss_value(LossKind::Giou, inner, outer);
            let i = loss_value(LossKind::Iou, inner, outer);
            prop_assert!((g - i).abs() < 1e-12);
        }

        #[test]
        fn disjoint_ordering(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = sample::disjoint_pair(&mut rng);
            prop_assert_eq!(loss_value(LossKind::Iou, a, b), 1.0);
            prop_assert!(loss_value(LossKind::Giou, a, b) > 1.0);
            prop_assert!(loss_value(LossKind::Diou, a, b) > 1.0);
            prop_assert!(loss_value(LossKind::Ciou, a, b) > 1.0);
        }

        #[test]
        fn aspect_collapse(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (pred, gt) = sample::aspect_matched_pair(&mut rng);
            prop_assert_eq!(
                loss_value(LossKind::Ciou, pred, gt),
                loss_value(LossKind::Diou, pred, gt)
            );
        }
    }
}
