//! Axis-aligned box geometry: the currency every other module trades in.
//!
//! Coordinates are continuous pixels, x right, y down. A box covers the
//! half-open region `[x1, x2) x [y1, y2)` in spirit: its area is the plain
//! product of side lengths with no "+1" pixel correction, so a box with
//! integer corners covers exactly `(x2-x1)*(y2-y1)` unit pixel cells. That
//! convention keeps overlap arithmetic exact on lattice-aligned boxes and
//! composes cleanly with the affine maps used by augmentation.

use crate::error::{Error, Result};

/// Axis-aligned rectangle with strictly positive area.
///
/// Degenerate boxes (zero or negative side lengths, non-finite
/// coordinates) are rejected at construction so downstream code never
/// divides by a zero area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if !(x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite()) {
            return Err(Error::validation(format!(
                "invalid box: non-finite coordinate in [{x1}, {y1}, {x2}, {y2}]"
            )));
        }
        if x2 <= x1 {
            return Err(Error::validation(format!(
                "invalid box: x2 <= x1 ({x2} <= {x1})"
            )));
        }
        if y2 <= y1 {
            return Err(Error::validation(format!(
                "invalid box: y2 <= y1 ({y2} <= {y1})"
            )));
        }
        Ok(BBox { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x1 + self.width() / 2.0,
            self.y1 + self.height() / 2.0,
        )
    }

    /// `[x1, y1, x2, y2]`, the order used by every file format.
    pub fn coords(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Box with the given center and side lengths (must be positive).
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    /// Overlap area with `other`; 0 when disjoint or merely touching.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = self.x2.min(other.x2) - self.x1.max(other.x1);
        let ih = self.y2.min(other.y2) - self.y1.max(other.y1);
        if iw > 0.0 && ih > 0.0 {
            iw * ih
        } else {
            0.0
        }
    }

    /// Intersection over union: overlap area divided by the area covered
    /// by either box. Symmetric, in `[0, 1]`, exactly 1 for `iou(a, a)`.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter == 0.0 {
            return 0.0;
        }
        inter / (self.area() + other.area() - inter)
    }

    /// Intersection with the image rectangle `[0, w] x [0, h]`.
    ///
    /// `None` when the clipped region has zero area (box entirely outside
    /// or only touching the border).
    pub fn clip(&self, size: ImageSize) -> Option<BBox> {
        let x1 = self.x1.max(0.0);
        let y1 = self.y1.max(0.0);
        let x2 = self.x2.min(size.width() as f64);
        let y2 = self.y2.min(size.height() as f64);
        if x2 > x1 && y2 > y1 {
            Some(BBox { x1, y1, x2, y2 })
        } else {
            None
        }
    }

    /// Same box shifted by `(dx, dy)`.
    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
        }
    }

    /// Coordinates scaled per axis; factors must be positive.
    pub fn scale(&self, sx: f64, sy: f64) -> Result<BBox> {
        BBox::new(self.x1 * sx, self.y1 * sy, self.x2 * sx, self.y2 * sy)
    }
}

/// Image dimensions in whole pixels, both at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageSize {
    width: u32,
    height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation(format!(
                "invalid image size: {width}x{height} (both dimensions must be >= 1)"
            )));
        }
        Ok(ImageSize { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }
}

impl std::fmt::Display for ImageSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}
