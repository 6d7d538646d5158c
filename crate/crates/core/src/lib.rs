//! Bounding-box regression losses with an inter-class relational penalty.
//!
//! The crate bundles four pieces:
//!
//! - the IoU, GIoU, DIoU, and CIoU losses with values and analytic gradients
//!   with respect to the predicted box, verified against a central
//!   finite-difference oracle ([`loss`]);
//! - the inter-class relational (ICR) penalty, which scales any base loss by
//!   how far a predicted small box strays from the ground-truth box of its
//!   containing larger object ([`icr`]);
//! - a fixed-step gradient-descent box-regression simulator and a
//!   loss-landscape grid generator for studying convergence behaviour
//!   ([`sim`], [`landscape`]);
//! - a toolkit for paired small-object/container annotation files in YOLO
//!   layout, e.g. license plates paired with their vehicles ([`dataset`]).
//!
//! All box math is `f64`. Everything here is a pure function of its inputs
//! and safe to evaluate from multiple threads.

pub mod dataset;
pub mod geometry;
pub mod icr;
pub mod landscape;
pub mod loss;
pub mod sample;
pub mod sim;

pub use geometry::{
    enclosing_box, factors, intersection_area, union_area, BBox, GeometricFactors, GeometryError,
};
pub use icr::{containment_ratio, icr_factor, icr_loss, icr_simple, IcrConfig, IcrError, IcrEval};
pub use loss::{fd_grad, iou, loss_grad, loss_value, mean_loss, LossEval, LossKind};
pub use sim::{delta_sweep, randomized_suite, run, Scenario, SimConfig, SimError, Trajectory};
