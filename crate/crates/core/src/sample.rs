//! Seeded samplers for the gradient-verification and property suites.
//!
//! Gradient checks need "general position" inputs: every pair of compared
//! edge coordinates at least [`GENERAL_POSITION_MARGIN`] apart, so that no
//! finite-difference probe crosses a selector kink. The samplers here
//! rejection-sample until that holds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::BBox;

/// Minimum separation between any predicted edge coordinate and any fixed
/// edge coordinate in a "general position" sample.
pub const GENERAL_POSITION_MARGIN: f64 = 1e-3;

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo * (hi / lo).powf(rng.random_range(0.0..1.0))
}

fn random_box<R: Rng>(rng: &mut R, span: f64, dim_lo: f64, dim_hi: f64) -> BBox {
    BBox::new(
        rng.random_range(-span..span),
        rng.random_range(-span..span),
        log_uniform(rng, dim_lo, dim_hi),
        log_uniform(rng, dim_lo, dim_hi),
    )
    .expect("sampled dims are positive")
}

/// True when every x-edge of `a` is at least `margin` away from every
/// x-edge of `b`, and likewise in y. This keeps all intersection and
/// enclosing-box selectors strict.
pub fn margins_ok(a: &BBox, b: &BBox, margin: f64) -> bool {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let far = |p: f64, q: f64| (p - q).abs() > margin;
    far(ax1, bx1)
        && far(ax1, bx2)
        && far(ax2, bx1)
        && far(ax2, bx2)
        && far(ay1, by1)
        && far(ay1, by2)
        && far(ay2, by1)
        && far(ay2, by2)
}

/// A (pred, gt) pair in general position. Covers overlapping, nested, and
/// disjoint arrangements.
pub fn general_pair<R: Rng>(rng: &mut R) -> (BBox, BBox) {
    loop {
        let pred = random_box(rng, 40.0, 2.0, 30.0);
        let gt = random_box(rng, 40.0, 2.0, 30.0);
        if margins_ok(&pred, &gt, GENERAL_POSITION_MARGIN) {
            return (pred, gt);
        }
    }
}

/// A (pred, gt, container) triple in general position relative to `pred`.
///
/// Only the predicted box is differentiated, so only its edges must keep
/// clear of the others'.
pub fn general_triple<R: Rng>(rng: &mut R) -> (BBox, BBox, BBox) {
    loop {
        let pred = random_box(rng, 40.0, 2.0, 30.0);
        let gt = random_box(rng, 40.0, 2.0, 30.0);
        let container = random_box(rng, 40.0, 8.0, 80.0);
        if margins_ok(&pred, &gt, GENERAL_POSITION_MARGIN)
            && margins_ok(&pred, &container, GENERAL_POSITION_MARGIN)
        {
            return (pred, gt, container);
        }
    }
}

/// `n` general-position triples from a fixed seed.
pub fn triples(seed: u64, n: usize) -> Vec<(BBox, BBox, BBox)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| general_triple(&mut rng)).collect()
}

/// An (inner, outer) pair with the inner box strictly inside the outer,
/// all edge gaps above the general-position margin.
pub fn nested_pair<R: Rng>(rng: &mut R) -> (BBox, BBox) {
    loop {
        let outer = random_box(rng, 30.0, 10.0, 50.0);
        let iw = outer.width() * rng.random_range(0.2..0.7);
        let ih = outer.height() * rng.random_range(0.2..0.7);
        let room_x = (outer.width() - iw) / 2.0 - 2.0 * GENERAL_POSITION_MARGIN;
        let room_y = (outer.height() - ih) / 2.0 - 2.0 * GENERAL_POSITION_MARGIN;
        if room_x <= 0.0 || room_y <= 0.0 {
            continue;
        }
        let inner = BBox::new(
            outer.cx() + rng.random_range(-room_x..room_x),
            outer.cy() + rng.random_range(-room_y..room_y),
            iw,
            ih,
        )
        .expect("inner dims are positive");
        if margins_ok(&inner, &outer, GENERAL_POSITION_MARGIN) {
            return (inner, outer);
        }
    }
}

/// Two disjoint boxes separated along x, still margin-clean on all edges.
pub fn disjoint_pair<R: Rng>(rng: &mut R) -> (BBox, BBox) {
    loop {
        let a = random_box(rng, 30.0, 2.0, 25.0);
        let bw = log_uniform(rng, 2.0, 25.0);
        let bh = log_uniform(rng, 2.0, 25.0);
        let gap = rng.random_range(0.5..25.0);
        let b = BBox::new(
            a.cx() + a.width() / 2.0 + gap + bw / 2.0,
            rng.random_range(-30.0..30.0),
            bw,
            bh,
        )
        .expect("sampled dims are positive");
        if margins_ok(&a, &b, GENERAL_POSITION_MARGIN) {
            return (a, b);
        }
    }
}

/// A (pred, gt) pair whose width/height ratios are bit-identical: pred is
/// gt scaled by a power of two and translated.
pub fn aspect_matched_pair<R: Rng>(rng: &mut R) -> (BBox, BBox) {
    loop {
        let gt = random_box(rng, 30.0, 2.0, 25.0);
        let scale = [0.5, 2.0, 4.0][rng.random_range(0..3)];
        let pred = BBox::new(
            rng.random_range(-30.0..30.0),
            rng.random_range(-30.0..30.0),
            gt.width() * scale,
            gt.height() * scale,
        )
        .expect("scaled dims are positive");
        if margins_ok(&pred, &gt, GENERAL_POSITION_MARGIN) {
            return (pred, gt);
        }
    }
}

/// Two boxes sharing an exact center but with different sizes.
pub fn concentric_pair<R: Rng>(rng: &mut R) -> (BBox, BBox) {
    loop {
        let cx = rng.random_range(-30.0..30.0);
        let cy = rng.random_range(-30.0..30.0);
        let a = BBox::new(
            cx,
            cy,
            log_uniform(rng, 2.0, 25.0),
            log_uniform(rng, 2.0, 25.0),
        )
        .expect("sampled dims are positive");
        let b = BBox::new(
            cx,
            cy,
            log_uniform(rng, 2.0, 25.0),
            log_uniform(rng, 2.0, 25.0),
        )
        .expect("sampled dims are positive");
        if margins_ok(&a, &b, GENERAL_POSITION_MARGIN) {
            return (a, b);
        }
    }
}
