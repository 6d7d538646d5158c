//! Loss-surface and gradient-magnitude grids over predicted-box center
//! positions, at a fixed predicted shape.
//!
//! A grid makes the qualitative story quantitative: where the base loss
//! plateaus, the composed loss should show denser contours, without moving
//! the global minimum out of the container.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;
use crate::icr::{self, IcrConfig};
use crate::loss::{self, LossKind};
use crate::sim::Scenario;

#[derive(Debug, Error, PartialEq)]
pub enum LandscapeError {
    #[error("axis range needs n >= 2 and finite hi > lo, got [{lo}, {hi}] with n = {n}")]
    InvalidRange { lo: f64, hi: f64, n: usize },
    #[error("pred_shape must be positive and finite, got ({0}, {1})")]
    InvalidShape(f64, f64),
    #[error("icr base loss '{icr_base}' does not match the configured loss '{kind}'")]
    IcrBaseMismatch { icr_base: LossKind, kind: LossKind },
    #[error("compared grids must share every spec field except `icr`")]
    SpecMismatch,
}

/// `n` evenly spaced nodes spanning `[lo, hi]` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl AxisRange {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self, LandscapeError> {
        let r = Self { lo, hi, n };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<(), LandscapeError> {
        if self.n < 2 || !self.lo.is_finite() || !self.hi.is_finite() || self.hi <= self.lo {
            return Err(LandscapeError::InvalidRange {
                lo: self.lo,
                hi: self.hi,
                n: self.n,
            });
        }
        Ok(())
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.node(i))
    }
}

/// What to evaluate: the predicted box sweeps its center over the x/y
/// ranges at a fixed shape, against a fixed target and container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_range: AxisRange,
    pub y_range: AxisRange,
    /// `(w, h)` of the swept predicted box.
    pub pred_shape: (f64, f64),
    pub gt: BBox,
    pub container: BBox,
    pub kind: LossKind,
    pub icr: Option<IcrConfig>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), LandscapeError> {
        self.x_range.validate()?;
        self.y_range.validate()?;
        let (w, h) = self.pred_shape;
        if w <= 0.0 || h <= 0.0 || !w.is_finite() || !h.is_finite() {
            return Err(LandscapeError::InvalidShape(w, h));
        }
        if let Some(ic) = &self.icr {
            if ic.base != self.kind {
                return Err(LandscapeError::IcrBaseMismatch {
                    icr_base: ic.base,
                    kind: self.kind,
                });
            }
        }
        Ok(())
    }

    /// Default grid over a scenario: ranges cover the container's center
    /// plus 1.25x its dimensions each way, and the swept shape is the
    /// target's. For the canonical scenario that is x in [-125, 125],
    /// y in [-75, 75].
    pub fn for_scenario(
        sc: &Scenario,
        n: usize,
        kind: LossKind,
        icr: Option<IcrConfig>,
    ) -> Result<Self, LandscapeError> {
        let spec = Self {
            x_range: AxisRange::new(
                sc.container.cx() - 1.25 * sc.container.width(),
                sc.container.cx() + 1.25 * sc.container.width(),
                n,
            )?,
            y_range: AxisRange::new(
                sc.container.cy() - 1.25 * sc.container.height(),
                sc.container.cy() + 1.25 * sc.container.height(),
                n,
            )?,
            pred_shape: (sc.gt.width(), sc.gt.height()),
            gt: sc.gt,
            container: sc.container,
            kind,
            icr,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn same_geometry(&self, other: &GridSpec) -> bool {
        self.x_range == other.x_range
            && self.y_range == other.y_range
            && self.pred_shape == other.pred_shape
            && self.gt == other.gt
            && self.container == other.container
            && self.kind == other.kind
    }
}

/// Evaluated loss surface: `values[yi][xi]` is the loss with the predicted
/// box centered on node `(x_range.node(xi), y_range.node(yi))`; `grad_mag`
/// is the norm of the loss gradient restricted to `(cx, cy)` there. Layout
/// is row-major by y then x regardless of evaluation schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub values: Vec<Vec<f64>>,
    pub grad_mag: Vec<Vec<f64>>,
    pub spec_echo: GridSpec,
}

impl Grid {
    /// Node indices `(yi, xi)` of the smallest value; ties go to the first
    /// occurrence in row-major order.
    pub fn argmin(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::INFINITY;
        for (yi, row) in self.values.iter().enumerate() {
            for (xi, &v) in row.iter().enumerate() {
                if v < best_v {
                    best_v = v;
                    best = (yi, xi);
                }
            }
        }
        best
    }

    pub fn argmin_coords(&self) -> (f64, f64) {
        let (yi, xi) = self.argmin();
        (
            self.spec_echo.x_range.node(xi),
            self.spec_echo.y_range.node(yi),
        )
    }

    fn spec_header(&self) -> String {
        let s = &self.spec_echo;
        let icr = match &s.icr {
            Some(c) => format!("{}", c.delta),
            None => "none".into(),
        };
        format!(
            "# kind={} icr_delta={} x={}..{} nx={} y={}..{} ny={} pred_shape={}x{} gt=({},{},{},{}) container=({},{},{},{})",
            s.kind, icr,
            s.x_range.lo, s.x_range.hi, s.x_range.n,
            s.y_range.lo, s.y_range.hi, s.y_range.n,
            s.pred_shape.0, s.pred_shape.1,
            s.gt.cx(), s.gt.cy(), s.gt.width(), s.gt.height(),
            s.container.cx(), s.container.cy(), s.container.width(), s.container.height(),
        )
    }

    /// CSV matrix of the loss values, prefixed by a `#` header row echoing
    /// the spec. Rows follow `y_range`, columns `x_range`.
    pub fn values_csv(&self) -> String {
        matrix_csv(&self.spec_header(), &self.values)
    }

    /// Same layout for the gradient magnitudes.
    pub fn grad_mag_csv(&self) -> String {
        matrix_csv(&self.spec_header(), &self.grad_mag)
    }
}

fn matrix_csv(header: &str, m: &[Vec<f64>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in m {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Evaluates the loss and gradient-magnitude surfaces for `spec`. Rows are
/// computed in parallel.
pub fn evaluate(spec: &GridSpec) -> Result<Grid, LandscapeError> {
    spec.validate()?;
    let (w, h) = spec.pred_shape;
    let ys: Vec<f64> = spec.y_range.nodes().collect();
    let xs: Vec<f64> = spec.x_range.nodes().collect();

    let rows: Vec<(Vec<f64>, Vec<f64>)> = ys
        .par_iter()
        .map(|&y| {
            let mut values = Vec::with_capacity(xs.len());
            let mut mags = Vec::with_capacity(xs.len());
            for &x in &xs {
                let pred = BBox::new(x, y, w, h).expect("grid node box is valid");
                let (value, grad) = match &spec.icr {
                    Some(cfg) => {
                        let e = icr::icr_loss(pred, spec.gt, spec.container, cfg);
                        (e.value, e.grad)
                    }
                    None => {
                        let e = loss::loss_grad(spec.kind, pred, spec.gt);
                        (e.value, e.grad)
                    }
                };
                values.push(value);
                mags.push((grad[0] * grad[0] + grad[1] * grad[1]).sqrt());
            }
            (values, mags)
        })
        .collect();

    let mut values = Vec::with_capacity(rows.len());
    let mut grad_mag = Vec::with_capacity(rows.len());
    for (v, g) in rows {
        values.push(v);
        grad_mag.push(g);
    }
    Ok(Grid {
        values,
        grad_mag,
        spec_echo: spec.clone(),
    })
}

/// Aggregate comparison of an ICR arm against its base arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareSummary {
    /// Mean of `icr / base` loss values over eligible nodes outside the
    /// container.
    pub mean_value_ratio: f64,
    pub max_value_ratio: f64,
    /// Mean of `icr / base` gradient magnitudes over outside nodes where
    /// the base gradient is nonzero; `None` when no node qualifies.
    pub mean_grad_mag_ratio: Option<f64>,
    /// True when both grids attain their minimum at the same node.
    pub argmin_agree: bool,
    /// Number of nodes whose center lies outside the container.
    pub nodes_outside: usize,
}

/// Compares two grids evaluated from the same spec up to the `icr` field.
pub fn compare(base: &Grid, icr: &Grid) -> Result<CompareSummary, LandscapeError> {
    if !base.spec_echo.same_geometry(&icr.spec_echo) {
        return Err(LandscapeError::SpecMismatch);
    }
    let spec = &base.spec_echo;
    let (cx1, cy1, cx2, cy2) = spec.container.corners();

    let mut nodes_outside = 0;
    let mut value_ratio_sum = 0.0;
    let mut value_ratio_count = 0usize;
    let mut max_value_ratio = f64::NEG_INFINITY;
    let mut grad_ratio_sum = 0.0;
    let mut grad_ratio_count = 0usize;

    for (yi, y) in spec.y_range.nodes().enumerate() {
        for (xi, x) in spec.x_range.nodes().enumerate() {
            let inside = x >= cx1 && x <= cx2 && y >= cy1 && y <= cy2;
            if inside {
                continue;
            }
            nodes_outside += 1;
            let b = base.values[yi][xi];
            let i = icr.values[yi][xi];
            if b > 0.0 {
                let r = i / b;
                value_ratio_sum += r;
                value_ratio_count += 1;
                max_value_ratio = max_value_ratio.max(r);
            }
            let bg = base.grad_mag[yi][xi];
            if bg > 0.0 {
                grad_ratio_sum += icr.grad_mag[yi][xi] / bg;
                grad_ratio_count += 1;
            }
        }
    }

    Ok(CompareSummary {
        mean_value_ratio: value_ratio_sum / value_ratio_count as f64,
        max_value_ratio,
        mean_grad_mag_ratio: if grad_ratio_count > 0 {
            Some(grad_ratio_sum / grad_ratio_count as f64)
        } else {
            None
        },
        argmin_agree: base.argmin() == icr.argmin(),
        nodes_outside,
    })
}
