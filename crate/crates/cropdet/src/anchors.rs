//! Anchor shapes and their translation-invariant tiling over a feature grid.
//!
//! Every feature-map position carries the same k = scales x ratios boxes,
//! shifted by whole strides. Tiled boxes are produced by translating the
//! base set, so "anchor at (i, j) equals anchor at (0, 0) plus
//! (j*stride, i*stride)" holds bit for bit, not just within epsilon.

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Anchor generator settings.
///
/// `ratios` are height/width. A (scale, ratio) pair yields a box of area
/// `(base_size * scale)^2` with sides `w = base_size * scale / sqrt(ratio)`
/// and `h = base_size * scale * sqrt(ratio)`, so area depends on the scale
/// alone and the ratio only reshapes it.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorConfig {
    pub base_size: f64,
    pub scales: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Image pixels between adjacent feature-map positions.
    pub stride: f64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig {
            base_size: 16.0,
            scales: vec![8.0, 16.0, 32.0],
            ratios: vec![0.5, 1.0, 2.0],
            stride: 16.0,
        }
    }
}

impl AnchorConfig {
    /// Anchors per position.
    pub fn k(&self) -> usize {
        self.scales.len() * self.ratios.len()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(format!(
                    "anchor config: {name} must be a positive finite number, got {v}"
                )))
            }
        };
        positive("base_size", self.base_size)?;
        positive("stride", self.stride)?;
        if self.scales.is_empty() {
            return Err(Error::validation("anchor config: scales must be non-empty"));
        }
        if self.ratios.is_empty() {
            return Err(Error::validation("anchor config: ratios must be non-empty"));
        }
        for &s in &self.scales {
            positive("scale", s)?;
        }
        for &r in &self.ratios {
            positive("ratio", r)?;
        }
        Ok(())
    }
}

/// The k base boxes, centered at (stride/2, stride/2).
///
/// Order is ratio-major, scale-minor: all scales of the first ratio, then
/// all scales of the second, and so on.
pub fn base_anchors(cfg: &AnchorConfig) -> Result<Vec<BBox>> {
    cfg.validate()?;
    let c = cfg.stride / 2.0;
    let mut out = Vec::with_capacity(cfg.k());
    for &ratio in &cfg.ratios {
        let rt = ratio.sqrt();
        for &scale in &cfg.scales {
            let side = cfg.base_size * scale;
            out.push(BBox::from_center(c, c, side / rt, side * rt)?);
        }
    }
    Ok(out)
}

/// All anchors for one feature-map geometry, row-major over positions.
///
/// Index layout: anchor `a` at grid row `i`, column `j` lives at
/// `(i * wf + j) * k + a`. Boxes may extend past any image border;
/// clipping is the proposal stage's business.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    hf: usize,
    wf: usize,
    k: usize,
    stride: f64,
    anchors: Vec<BBox>,
}

impl AnchorSet {
    pub fn hf(&self) -> usize {
        self.hf
    }

    pub fn wf(&self) -> usize {
        self.wf
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn anchors(&self) -> &[BBox] {
        &self.anchors
    }

    pub fn get(&self, i: usize, j: usize, a: usize) -> BBox {
        self.anchors[(i * self.wf + j) * self.k + a]
    }
}

/// Tiles the base anchors across an `hf` x `wf` grid.
pub fn tile(cfg: &AnchorConfig, hf: usize, wf: usize) -> Result<AnchorSet> {
    if hf == 0 || wf == 0 {
        return Err(Error::validation(format!(
            "anchor grid must be at least 1x1, got {hf}x{wf}"
        )));
    }
    let base = base_anchors(cfg)?;
    let total = base
        .len()
        .checked_mul(hf)
        .and_then(|n| n.checked_mul(wf))
        .ok_or_else(|| {
            Error::validation(format!(
                "anchor count {}*{hf}*{wf} overflows the index range",
                base.len()
            ))
        })?;
    let mut anchors = Vec::with_capacity(total);
    for i in 0..hf {
        let dy = i as f64 * cfg.stride;
        for j in 0..wf {
            let dx = j as f64 * cfg.stride;
            for b in &base {
                anchors.push(b.translate(dx, dy));
            }
        }
    }
    Ok(AnchorSet {
        hf,
        wf,
        k: base.len(),
        stride: cfg.stride,
        anchors,
    })
}
