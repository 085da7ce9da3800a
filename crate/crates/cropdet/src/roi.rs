//! Region-of-interest pooling: any rectangle of a feature map is squashed
//! onto a fixed output grid by per-cell max pooling.
//!
//! Cell boundaries quantize by floor on the leading edge and ceil on the
//! trailing edge, so neighboring cells may share feature columns. Each
//! cell is clamped to cover at least one feature cell; for a clipped roi
//! with positive area the natural cover is already non-empty, the clamp
//! just keeps the max defined against floating-point corner cases.

use crate::error::{Error, Result};
use crate::geometry::{BBox, ImageSize};

/// Output grid shape. The detection head in this crate expects the 7x7
/// default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoiPoolConfig {
    pub width: usize,
    pub height: usize,
}

impl Default for RoiPoolConfig {
    fn default() -> Self {
        RoiPoolConfig { width: 7, height: 7 }
    }
}

impl RoiPoolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation(format!(
                "roi pool grid must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Maps an image-coordinate box to feature-map coordinates for a given
/// stride, rounding outward (floor the near corner, ceil the far corner)
/// so the feature region never undershoots the image region.
pub fn image_to_feature(roi: &BBox, stride: f64) -> Result<BBox> {
    if !(stride.is_finite() && stride > 0.0) {
        return Err(Error::validation(format!(
            "stride must be a positive finite number, got {stride}"
        )));
    }
    BBox::new(
        (roi.x1() / stride).floor(),
        (roi.y1() / stride).floor(),
        (roi.x2() / stride).ceil(),
        (roi.y2() / stride).ceil(),
    )
}

/// Splits `[lo, lo + len)` into `cells` quantized spans over `0..limit`.
fn cell_spans(lo: f64, len: f64, cells: usize, limit: usize) -> Vec<(usize, usize)> {
    (0..cells)
        .map(|g| {
            let a = lo + g as f64 * len / cells as f64;
            let b = lo + (g + 1) as f64 * len / cells as f64;
            let start = (a.floor().max(0.0) as usize).min(limit - 1);
            let end = (b.ceil() as usize).clamp(start + 1, limit);
            (start, end)
        })
        .collect()
}

/// Max-pools `roi` (feature-map coordinates) into a vector of length
/// `width * height * channels`, channel-major: the value for channel `c`,
/// grid row `gy`, grid column `gx` is at `(c * height + gy) * width + gx`.
///
/// The roi is clipped to the map first; a roi with no positive-area
/// overlap is an error, callers are expected to have filtered those.
pub fn roi_pool(
    features: &crate::net::FeatureMap,
    roi: &BBox,
    cfg: &RoiPoolConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let bounds = ImageSize::new(features.width() as u32, features.height() as u32)?;
    let clipped = roi.clip(bounds).ok_or_else(|| {
        Error::validation(format!(
            "roi [{}, {}, {}, {}] has no overlap with the {}x{} feature map",
            roi.x1(),
            roi.y1(),
            roi.x2(),
            roi.y2(),
            features.width(),
            features.height()
        ))
    })?;

    let cols = cell_spans(clipped.x1(), clipped.width(), cfg.width, features.width());
    let rows = cell_spans(clipped.y1(), clipped.height(), cfg.height, features.height());

    let mut out = Vec::with_capacity(features.channels() * cfg.height * cfg.width);
    for c in 0..features.channels() {
        for &(r0, r1) in &rows {
            for &(c0, c1) in &cols {
                let mut best = f64::NEG_INFINITY;
                for i in r0..r1 {
                    for j in c0..c1 {
                        best = best.max(features.get(c, i, j));
                    }
                }
                out.push(best);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::FeatureMap;
    use proptest::prelude::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn indexed_map(c: usize, h: usize, w: usize) -> FeatureMap {
        FeatureMap::from_fn(c, h, w, |ch, i, j| ((ch * h + i) * w + j) as f64).unwrap()
    }

    #[test]
    fn aligned_roi_is_verbatim_copy() {
        let map = indexed_map(1, 10, 10);
        let cfg = RoiPoolConfig::default();
        let out = roi_pool(&map, &b(2.0, 1.0, 9.0, 8.0), &cfg).unwrap();
        for gy in 0..7 {
            for gx in 0..7 {
                assert_eq!(out[gy * 7 + gx], map.get(0, 1 + gy, 2 + gx));
            }
        }
    }

    #[test]
    fn constant_map_pools_to_constant() {
        let map = FeatureMap::from_fn(3, 9, 9, |_, _, _| 4.25).unwrap();
        let cfg = RoiPoolConfig::default();
        for roi in [b(0.0, 0.0, 9.0, 9.0), b(2.3, 1.1, 3.0, 8.7), b(-4.0, -4.0, 1.5, 1.5)] {
            let out = roi_pool(&map, &roi, &cfg).unwrap();
            assert_eq!(out.len(), 3 * 49);
            assert!(out.iter().all(|&v| v == 4.25));
        }
    }

    #[test]
    fn output_length_counts_channels() {
        let map = indexed_map(4, 12, 9);
        let out = roi_pool(&map, &b(1.0, 1.0, 8.0, 11.0), &RoiPoolConfig { width: 3, height: 5 })
            .unwrap();
        assert_eq!(out.len(), 4 * 5 * 3);
    }

    #[test]
    fn tiny_roi_keeps_every_cell_populated() {
        let map = indexed_map(1, 16, 16);
        // Sub-cell roi: every output cell must clamp onto a real feature
        // cell instead of maxing over nothing.
        let out = roi_pool(&map, &b(3.2, 4.1, 4.0, 4.9), &RoiPoolConfig::default()).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
        assert!(out.iter().all(|&v| v == map.get(0, 4, 3)));
    }

    #[test]
    fn one_by_one_grid_is_global_max_per_channel() {
        let map = indexed_map(3, 8, 6);
        let whole = b(0.0, 0.0, 6.0, 8.0);
        let out = roi_pool(&map, &whole, &RoiPoolConfig { width: 1, height: 1 }).unwrap();
        for c in 0..3 {
            let mut best = f64::NEG_INFINITY;
            for i in 0..8 {
                for j in 0..6 {
                    best = best.max(map.get(c, i, j));
                }
            }
            assert_eq!(out[c], best);
        }
    }

    #[test]
    fn roi_outside_map_is_an_error() {
        let map = indexed_map(1, 8, 8);
        assert!(roi_pool(&map, &b(20.0, 20.0, 25.0, 25.0), &RoiPoolConfig::default()).is_err());
        assert!(roi_pool(&map, &b(-5.0, -5.0, 0.0, 0.0), &RoiPoolConfig::default()).is_err());
    }

    #[test]
    fn image_to_feature_rounds_outward() {
        let roi = b(17.0, 3.0, 47.0, 100.0);
        let f = image_to_feature(&roi, 16.0).unwrap();
        assert_eq!(f.coords(), [1.0, 0.0, 3.0, 7.0]);
        // Sub-stride boxes still land on a positive-width region.
        let small = image_to_feature(&b(33.0, 33.0, 34.0, 34.0), 16.0).unwrap();
        assert_eq!(small.coords(), [2.0, 2.0, 3.0, 3.0]);
        assert!(image_to_feature(&roi, 0.0).is_err());
    }

    /// Assigns each feature cell to the output cells whose real-valued
    /// span overlaps it, then maxes. Independent of the floor/ceil code
    /// path above.
    fn pool_by_assignment(map: &FeatureMap, roi: &BBox, cfg: &RoiPoolConfig) -> Vec<f64> {
        let clipped = roi
            .clip(ImageSize::new(map.width() as u32, map.height() as u32).unwrap())
            .unwrap();
        let mut out = vec![f64::NEG_INFINITY; map.channels() * cfg.height * cfg.width];
        for c in 0..map.channels() {
            for gy in 0..cfg.height {
                let y_lo = clipped.y1() + gy as f64 * clipped.height() / cfg.height as f64;
                let y_hi = clipped.y1() + (gy + 1) as f64 * clipped.height() / cfg.height as f64;
                for gx in 0..cfg.width {
                    let x_lo = clipped.x1() + gx as f64 * clipped.width() / cfg.width as f64;
                    let x_hi = clipped.x1() + (gx + 1) as f64 * clipped.width() / cfg.width as f64;
                    let slot = (c * cfg.height + gy) * cfg.width + gx;
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
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn matches_assignment_oracle(
            x in -2.0f64..14.0,
            y in -2.0f64..14.0,
            w in 0.5f64..16.0,
            h in 0.5f64..16.0,
            seed in 0u64..1000,
        ) {
            let map = FeatureMap::from_fn(1, 16, 16, |_, i, j| {
                let mix = seed
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add((i * 16 + j) as u64)
                    .wrapping_mul(1442695040888963407);
                (mix >> 11) as f64 / (1u64 << 53) as f64
            })
            .unwrap();
            let roi = b(x, y, x + w, y + h);
            let cfg = RoiPoolConfig::default();
            prop_assume!(roi.clip(ImageSize::new(16, 16).unwrap()).is_some());
            let got = roi_pool(&map, &roi, &cfg).unwrap();
            let want = pool_by_assignment(&map, &roi, &cfg);
            prop_assert_eq!(got, want);
        }

        #[test]
        fn monotone_in_the_feature_map(
            x in 0.0f64..10.0,
            y in 0.0f64..10.0,
            w in 1.0f64..6.0,
            h in 1.0f64..6.0,
            bump in 0.0f64..3.0,
        ) {
            let base = indexed_map(2, 16, 16);
            let raised = FeatureMap::from_fn(2, 16, 16, |c, i, j| base.get(c, i, j) + bump).unwrap();
            let roi = b(x, y, x + w, y + h);
            let cfg = RoiPoolConfig::default();
            let lo = roi_pool(&base, &roi, &cfg).unwrap();
            let hi = roi_pool(&raised, &roi, &cfg).unwrap();
            for (l, r) in lo.iter().zip(&hi) {
                prop_assert!(r >= l);
            }
        }
    }
}
