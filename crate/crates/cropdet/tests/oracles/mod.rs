//! Reference implementations used by the acceptance suite. Each one is
//! written straight from the defining statement of the quantity it
//! computes, favoring obviousness over speed, so agreement with the
//! library is evidence rather than tautology.

use cropdet::geometry::BBox;
use cropdet::net::{ConvLayer, FeatureMap};
use cropdet::proposals::ScoredBox;
use num_rational::Ratio;

/// IoU of two integer-coordinate boxes by counting unit lattice cells.
/// Cell (u, v) covers [u, u+1) x [v, v+1); it lies in a box when the box
/// contains it entirely, which for integer corners is exact membership.
pub fn iou_lattice(a: &BBox, b: &BBox) -> f64 {
    let inside = |bx: &BBox, u: i64, v: i64| {
        u as f64 >= bx.x1()
            && (u + 1) as f64 <= bx.x2()
            && v as f64 >= bx.y1()
            && (v + 1) as f64 <= bx.y2()
    };
    let lo_x = a.x1().min(b.x1()) as i64;
    let hi_x = a.x2().max(b.x2()) as i64;
    let lo_y = a.y1().min(b.y1()) as i64;
    let hi_y = a.y2().max(b.y2()) as i64;
    let mut inter = 0i64;
    let mut union = 0i64;
    for u in lo_x..hi_x {
        for v in lo_y..hi_y {
            let in_a = inside(a, u, v);
            let in_b = inside(b, u, v);
            if in_a && in_b {
                inter += 1;
            }
            if in_a || in_b {
                union += 1;
            }
        }
    }
    inter as f64 / union as f64
}

/// Plain-formula IoU, independent of the library's geometry code.
fn iou_formula(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2().min(b.x2()) - a.x1().max(b.x1())).max(0.0);
    let ih = (a.y2().min(b.y2()) - a.y1().max(b.y1())).max(0.0);
    let inter = iw * ih;
    let area_a = (a.x2() - a.x1()) * (a.y2() - a.y1());
    let area_b = (b.x2() - b.x1()) * (b.y2() - b.y1());
    inter / (area_a + area_b - inter)
}

/// Greedy suppression by the definition: repeatedly take the unprocessed
/// box with the highest score (earliest on ties), keep it, discard every
/// remaining box overlapping it by strictly more than `threshold`.
pub fn nms_reference(boxes: &[ScoredBox], threshold: f64) -> Vec<ScoredBox> {
    let mut remaining: Vec<usize> = (0..boxes.len()).collect();
    let mut kept = Vec::new();
    while !remaining.is_empty() {
        let mut best = 0;
        for (slot, &idx) in remaining.iter().enumerate() {
            if boxes[idx].score > boxes[remaining[best]].score {
                best = slot;
            }
        }
        let keep = remaining.remove(best);
        kept.push(boxes[keep].clone());
        remaining.retain(|&idx| iou_formula(&boxes[idx].bbox, &boxes[keep].bbox) <= threshold);
    }
    kept
}

/// Convolution as six nested loops over the definition: same-size output,
/// zero padding of (k-1)/2, weights in [out, in, ky, kx] order.
pub fn conv_reference(input: &FeatureMap, layer: &ConvLayer) -> FeatureMap {
    let (h, w) = (input.height(), input.width());
    let (cin, cout, k) = (layer.in_channels(), layer.out_channels(), layer.kernel());
    let pad = (k - 1) / 2;
    let mut data = Vec::with_capacity(cout * h * w);
    for o in 0..cout {
        for i in 0..h {
            for j in 0..w {
                let mut acc = layer.bias()[o];
                for c in 0..cin {
                    for ky in 0..k {
                        for kx in 0..k {
                            let yy = i as isize + ky as isize - pad as isize;
                            let xx = j as isize + kx as isize - pad as isize;
                            if yy < 0 || yy >= h as isize || xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let weight = layer.weights()[((o * cin + c) * k + ky) * k + kx];
                            acc += weight * input.get(c, yy as usize, xx as usize);
                        }
                    }
                }
                data.push(acc);
            }
        }
    }
    FeatureMap::new(cout, h, w, data).expect("reference conv output is well-formed")
}

/// RoI pooling by overlap assignment: each feature cell contributes to
/// every output cell whose real-valued span intersects it; empty covers
/// fall back to the nearest feature cell the floor/ceil rule would pick.
pub fn roi_pool_reference(
    map: &FeatureMap,
    roi: &BBox,
    cells_w: usize,
    cells_h: usize,
) -> Vec<f64> {
    let x1 = roi.x1().max(0.0);
    let y1 = roi.y1().max(0.0);
    let x2 = roi.x2().min(map.width() as f64);
    let y2 = roi.y2().min(map.height() as f64);
    assert!(x2 > x1 && y2 > y1, "reference pooling needs an overlapping roi");
    let (rw, rh) = (x2 - x1, y2 - y1);

    let mut out = vec![f64::NEG_INFINITY; map.channels() * cells_h * cells_w];
    for c in 0..map.channels() {
        for gy in 0..cells_h {
            let y_lo = y1 + gy as f64 * rh / cells_h as f64;
            let y_hi = y1 + (gy + 1) as f64 * rh / cells_h as f64;
            for gx in 0..cells_w {
                let x_lo = x1 + gx as f64 * rw / cells_w as f64;
                let x_hi = x1 + (gx + 1) as f64 * rw / cells_w as f64;
                let slot = (c * cells_h + gy) * cells_w + gx;
                for i in 0..map.height() {
                    if !((i + 1) as f64 > y_lo && (i as f64) < y_hi) {
                        continue;
                    }
                    for j in 0..map.width() {
                        if (j + 1) as f64 > x_lo && (j as f64) < x_hi {
                            out[slot] = out[slot].max(map.get(c, i, j));
                        }
                    }
                }
                if out[slot] == f64::NEG_INFINITY {
                    // Degenerate span (an integer boundary with zero
                    // width): take the cell the quantizer clamps onto.
                    let i = (y_lo.floor().max(0.0) as usize).min(map.height() - 1);
                    let j = (x_lo.floor().max(0.0) as usize).min(map.width() - 1);
                    out[slot] = map.get(c, i, j);
                }
            }
        }
    }
    out
}

/// Average precision in exact rational arithmetic, by the envelope
/// definition: walk the ranked detections, and at every true positive add
/// (recall step) x (highest precision at this rank or later).
pub fn ap_envelope_rational(flags: &[bool], total_gt: usize) -> Ratio<i64> {
    assert!(total_gt > 0, "rational AP needs at least one ground truth");
    let n = flags.len();
    let mut precisions = Vec::with_capacity(n);
    let mut tp = 0i64;
    for (rank, &hit) in flags.iter().enumerate() {
        if hit {
            tp += 1;
        }
        precisions.push(Ratio::new(tp, rank as i64 + 1));
    }
    // Right-to-left running max turns the raw curve into its envelope.
    let mut envelope = precisions.clone();
    for i in (0..n.saturating_sub(1)).rev() {
        if envelope[i + 1] > envelope[i] {
            envelope[i] = envelope[i + 1];
        }
    }
    let step = Ratio::new(1i64, total_gt as i64);
    let mut ap = Ratio::new(0, 1);
    for (rank, &hit) in flags.iter().enumerate() {
        if hit {
            ap += step * envelope[rank];
        }
    }
    ap
}

pub fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Axis-aligned bounding box of the lit pixels (value >= 128) of a
/// 1-channel mask, in continuous coordinates: pixel (x, y) spans
/// [x, x+1) x [y, y+1). Returns None when nothing is lit.
pub fn lit_bbox(mask: &cropdet::augment::Raster) -> Option<BBox> {
    assert_eq!(mask.channels(), 1, "mask oracle expects 1-channel rasters");
    let (mut min_x, mut min_y) = (usize::MAX, usize::MAX);
    let (mut max_x, mut max_y) = (0usize, 0usize);
    let mut any = false;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y, 0) >= 128 {
                any = true;
                min_x = min_x.min(x);
                min_y = min_y.min(y);
                max_x = max_x.max(x);
                max_y = max_y.max(y);
            }
        }
    }
    if !any {
        return None;
    }
    Some(
        BBox::new(
            min_x as f64,
            min_y as f64,
            (max_x + 1) as f64,
            (max_y + 1) as f64,
        )
        .expect("lit region has positive extent"),
    )
}

/// Fills a fresh 1-channel mask with 255 inside `bbox` (by pixel-center
/// membership) and 0 elsewhere.
pub fn rasterize_box(width: usize, height: usize, bbox: &BBox) -> cropdet::augment::Raster {
    let mut mask = cropdet::augment::Raster::filled(width, height, 1, 0)
        .expect("mask dimensions are valid");
    for y in 0..height {
        for x in 0..width {
            let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
            if cx >= bbox.x1() && cx <= bbox.x2() && cy >= bbox.y1() && cy <= bbox.y2() {
                mask.set(x, y, 0, 255);
            }
        }
    }
    mask
}
