//! Box regression offsets: the per-anchor 4-vector a reg layer predicts.
//!
//! A target box is expressed relative to an anchor as center shifts in
//! units of the anchor's sides plus log-scale size changes. Logs make any
//! finite prediction decode to a positive-area box.

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Decoded sizes are capped at this many times the anchor's side (and at
/// the reciprocal shrink), so a random or untrained head cannot emit
/// boxes of astronomical size. ln(1000) ~ 6.9.
pub const MAX_SIZE_RATIO: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDelta {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
}

impl BoxDelta {
    pub fn new(tx: f64, ty: f64, tw: f64, th: f64) -> Result<Self> {
        if [tx, ty, tw, th].iter().all(|v| v.is_finite()) {
            Ok(BoxDelta { tx, ty, tw, th })
        } else {
            Err(Error::validation(format!(
                "box delta must be finite, got ({tx}, {ty}, {tw}, {th})"
            )))
        }
    }
}

/// Offsets that carry `anchor` onto `target`.
pub fn encode(target: &BBox, anchor: &BBox) -> BoxDelta {
    let (cx_t, cy_t) = target.center();
    let (cx_a, cy_a) = anchor.center();
    BoxDelta {
        tx: (cx_t - cx_a) / anchor.width(),
        ty: (cy_t - cy_a) / anchor.height(),
        tw: (target.width() / anchor.width()).ln(),
        th: (target.height() / anchor.height()).ln(),
    }
}

/// Applies `delta` to `anchor`. Inverse of [`encode`] for deltas within
/// the size cap; always yields a valid box.
pub fn decode(delta: &BoxDelta, anchor: &BBox) -> Result<BBox> {
    let delta = BoxDelta::new(delta.tx, delta.ty, delta.tw, delta.th)?;
    let max_log = MAX_SIZE_RATIO.ln();
    let (cx_a, cy_a) = anchor.center();
    let cx = cx_a + delta.tx * anchor.width();
    let cy = cy_a + delta.ty * anchor.height();
    let w = anchor.width() * delta.tw.clamp(-max_log, max_log).exp();
    let h = anchor.height() * delta.th.clamp(-max_log, max_log).exp();
    BBox::from_center(cx, cy, w, h)
}
