//! Axis-aligned boxes in center format and the primitive geometric
//! quantities the loss functions consume.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("box dimensions must be positive and finite, got w={w}, h={h}")]
    InvalidDims { w: f64, h: f64 },
    #[error("box center must be finite, got ({cx}, {cy})")]
    InvalidCenter { cx: f64, cy: f64 },
}

/// Axis-aligned box stored as `(cx, cy, w, h)`: center coordinates plus
/// width and height, all in the same (arbitrary) length unit.
///
/// Zero- or negative-area boxes are rejected at construction, so every
/// `BBox` in circulation has `w > 0` and `h > 0`. Corner form
/// `(x1, y1, x2, y2)` is available as a conversion, not a second type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
}

#[derive(Deserialize)]
struct RawBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
}

impl TryFrom<RawBox> for BBox {
    type Error = GeometryError;

    fn try_from(raw: RawBox) -> Result<Self, Self::Error> {
        BBox::new(raw.cx, raw.cy, raw.w, raw.h)
    }
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        if !cx.is_finite() || !cy.is_finite() {
            return Err(GeometryError::InvalidCenter { cx, cy });
        }
        if w <= 0.0 || h <= 0.0 || !w.is_finite() || !h.is_finite() {
            return Err(GeometryError::InvalidDims { w, h });
        }
        Ok(Self { cx, cy, w, h })
    }

    /// Builds a box from corner form `(x1, y1, x2, y2)`.
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        Self::new((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn width(&self) -> f64 {
        self.w
    }

    pub fn height(&self) -> f64 {
        self.h
    }

    /// Corner form `(x1, y1, x2, y2)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// The box as a `[cx, cy, w, h]` parameter vector, the layout all
    /// gradients in this crate use.
    pub fn params(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub fn from_params(p: [f64; 4]) -> Result<Self, GeometryError> {
        Self::new(p[0], p[1], p[2], p[3])
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Result<Self, GeometryError> {
        Self::new(self.cx + dx, self.cy + dy, self.w, self.h)
    }

    /// True when `other` lies entirely inside `self` (edge contact counts
    /// as inside).
    pub fn contains(&self, other: &BBox) -> bool {
        let (x1, y1, x2, y2) = self.corners();
        let (ox1, oy1, ox2, oy2) = other.corners();
        ox1 >= x1 && oy1 >= y1 && ox2 <= x2 && oy2 <= y2
    }
}

/// Width and height recomputed from the corner form.
///
/// The loss internals use these instead of the stored dimensions so that
/// intersections, unions, and enclosing boxes are all derived from the same
/// corner coordinates; nested boxes then satisfy identities such as
/// `overlap == area` bit-for-bit.
pub(crate) fn corner_dims(b: &BBox) -> (f64, f64) {
    let (x1, y1, x2, y2) = b.corners();
    (x2 - x1, y2 - y1)
}

pub(crate) fn corner_area(b: &BBox) -> f64 {
    let (w, h) = corner_dims(b);
    w * h
}

/// Overlap area of two boxes; zero when they are disjoint. Symmetric in
/// its arguments.
pub fn intersection_area(a: BBox, b: BBox) -> f64 {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let iw = ax2.min(bx2) - ax1.max(bx1);
    let ih = ay2.min(by2) - ay1.max(by1);
    if iw <= 0.0 || ih <= 0.0 {
        0.0
    } else {
        iw * ih
    }
}

pub fn union_area(a: BBox, b: BBox) -> f64 {
    corner_area(&a) + corner_area(&b) - intersection_area(a, b)
}

/// Smallest axis-aligned box containing both inputs.
pub fn enclosing_box(a: BBox, b: BBox) -> BBox {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    BBox::from_corners(ax1.min(bx1), ay1.min(by1), ax2.max(bx2), ay2.max(by2))
        .expect("enclosing box of valid boxes is valid")
}

/// The geometric quantities shared by the IoU-family losses: overlap,
/// center distance, aspect-ratio mismatch, and the enclosing-box terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricFactors {
    /// Overlap area of the two boxes.
    pub overlap_area: f64,
    /// Squared distance between the box centers.
    pub center_dist_sq: f64,
    /// `(4/pi^2) * (atan(gt_w/gt_h) - atan(pred_w/pred_h))^2`.
    pub aspect_term: f64,
    /// Squared diagonal of the smallest enclosing box.
    pub enclosing_diag_sq: f64,
    /// Area of the smallest enclosing box.
    pub enclosing_area: f64,
    /// Union area of the two boxes.
    pub union_area: f64,
}

pub fn factors(pred: BBox, gt: BBox) -> GeometricFactors {
    let overlap = intersection_area(pred, gt);
    let union = corner_area(&pred) + corner_area(&gt) - overlap;
    let enc = enclosing_box(pred, gt);
    let (ew, eh) = corner_dims(&enc);
    let dx = pred.cx() - gt.cx();
    let dy = pred.cy() - gt.cy();
    let t = (gt.width() / gt.height()).atan() - (pred.width() / pred.height()).atan();
    GeometricFactors {
        overlap_area: overlap,
        center_dist_sq: dx * dx + dy * dy,
        aspect_term: 4.0 / (std::f64::consts::PI * std::f64::consts::PI) * t * t,
        enclosing_diag_sq: ew * ew + eh * eh,
        enclosing_area: ew * eh,
        union_area: union,
    }
}
