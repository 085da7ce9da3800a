//! Geometric augmentation applied jointly to a raster and its box
//! annotations, plus the bounding-size resize rule.
//!
//! Every operation returns a new raster and the surviving boxes, mapped
//! by the same geometry that moved the pixels. Rotations are exact pixel
//! permutations; everything non-integral resamples bilinearly. Output
//! boxes are always clipped to the output raster, so annotations never
//! point outside the image they describe.

mod elastic;
mod raster;

pub use raster::Raster;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::eval::GroundTruthObject;
use crate::geometry::BBox;

use elastic::DisplacementField;

/// Pixel-aligned crop window, fully inside the image it is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropRegion {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// One augmentation step.
#[derive(Debug, Clone, PartialEq)]
pub enum AugmentOp {
    /// Quarter turn counterclockwise; lossless.
    RotateLeft,
    /// Quarter turn clockwise; lossless.
    RotateRight,
    /// Uniform rescale by `factor` (> 1 zooms in, < 1 out).
    Zoom { factor: f64 },
    /// Independent horizontal/vertical rescale.
    Stretch { sx: f64, sy: f64 },
    /// Cut to a fixed window. A box survives when its visible area is at
    /// least `min_visibility` of its original area.
    Crop {
        region: CropRegion,
        min_visibility: f64,
    },
    /// Crop to a window spanning `fraction` of each side, at a position
    /// drawn from the pipeline's seeded generator. Only valid inside
    /// [`pipeline`]; [`apply`] rejects it because it has no position of
    /// its own.
    RandomCrop {
        fraction: f64,
        min_visibility: f64,
    },
    /// Smooth random warp: displacement = alpha * blur(noise, sigma),
    /// noise drawn per pixel from a generator seeded with `seed`.
    Elastic { alpha: f64, sigma: f64, seed: u64 },
}

impl AugmentOp {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(format!(
                    "{name} must be a positive finite number, got {v}"
                )))
            }
        };
        let visibility = |v: f64| -> Result<()> {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::validation(format!(
                    "crop min_visibility must lie in [0, 1], got {v}"
                )))
            }
        };
        match self {
            AugmentOp::RotateLeft | AugmentOp::RotateRight => Ok(()),
            AugmentOp::Zoom { factor } => positive("zoom factor", *factor),
            AugmentOp::Stretch { sx, sy } => {
                positive("stretch sx", *sx)?;
                positive("stretch sy", *sy)
            }
            AugmentOp::Crop {
                region,
                min_visibility,
            } => {
                if region.width == 0 || region.height == 0 {
                    return Err(Error::validation("crop region must be at least 1x1"));
                }
                visibility(*min_visibility)
            }
            AugmentOp::RandomCrop {
                fraction,
                min_visibility,
            } => {
                if !(fraction.is_finite() && *fraction > 0.0 && *fraction <= 1.0) {
                    return Err(Error::validation(format!(
                        "random crop fraction must lie in (0, 1], got {fraction}"
                    )));
                }
                visibility(*min_visibility)
            }
            AugmentOp::Elastic { alpha, sigma, .. } => {
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return Err(Error::validation(format!(
                        "elastic alpha must be non-negative, got {alpha}"
                    )));
                }
                positive("elastic sigma", *sigma)
            }
        }
    }
}

fn rotate_raster(img: &Raster, right: bool) -> Raster {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = Raster::filled(h, w, ch, 0).expect("swapped dimensions stay valid");
    for y in 0..h {
        for x in 0..w {
            let (nx, ny) = if right { (h - 1 - y, x) } else { (y, w - 1 - x) };
            for c in 0..ch {
                out.set(nx, ny, c, img.get(x, y, c));
            }
        }
    }
    out
}

fn scale_raster(img: &Raster, sx: f64, sy: f64) -> Result<Raster> {
    let ow = ((img.width() as f64 * sx).round() as usize).max(1);
    let oh = ((img.height() as f64 * sy).round() as usize).max(1);
    let mut out = Raster::filled(ow, oh, img.channels(), 0)?;
    for y in 0..oh {
        let src_y = (y as f64 + 0.5) / sy;
        for x in 0..ow {
            let src_x = (x as f64 + 0.5) / sx;
            for c in 0..img.channels() {
                let v = img.sample_bilinear(src_x, src_y, c);
                out.set(x, y, c, v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(out)
}

fn crop_raster(img: &Raster, region: &CropRegion) -> Result<Raster> {
    let fits = region
        .x
        .checked_add(region.width)
        .is_some_and(|x2| x2 <= img.width())
        && region
            .y
            .checked_add(region.height)
            .is_some_and(|y2| y2 <= img.height());
    if !fits {
        return Err(Error::validation(format!(
            "crop region {}x{}+{}+{} extends outside the {}x{} image",
            region.width,
            region.height,
            region.x,
            region.y,
            img.width(),
            img.height()
        )));
    }
    let ch = img.channels();
    let mut samples = Vec::with_capacity(region.width * region.height * ch);
    for y in region.y..region.y + region.height {
        for x in region.x..region.x + region.width {
            for c in 0..ch {
                samples.push(img.get(x, y, c));
            }
        }
    }
    Raster::new(region.width, region.height, ch, samples)
}

fn elastic_raster(img: &Raster, field: &DisplacementField) -> Raster {
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            // Backward warp: the output pixel pulls from the input at
            // its own position minus the displacement there.
            let (dx, dy) = field.at_pixel(x, y);
            let sx = (x as f64 + 0.5) - dx;
            let sy = (y as f64 + 0.5) - dy;
            for c in 0..img.channels() {
                let v = img.sample_bilinear(sx, sy, c).round().clamp(0.0, 255.0);
                out.set(x, y, c, v as u8);
            }
        }
    }
    out
}

/// 8 evenly spaced samples along each edge of the box (corners included,
/// shared points duplicated; 32 points total).
fn boundary_points(b: &BBox) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(32);
    for i in 0..8 {
        let t = i as f64 / 7.0;
        let x = b.x1() + t * b.width();
        let y = b.y1() + t * b.height();
        pts.push((x, b.y1()));
        pts.push((x, b.y2()));
        pts.push((b.x1(), y));
        pts.push((b.x2(), y));
    }
    pts
}

fn retain_clipped(
    objects: &[GroundTruthObject],
    map: impl Fn(&BBox) -> Option<BBox>,
    bounds: crate::geometry::ImageSize,
) -> Vec<GroundTruthObject> {
    objects
        .iter()
        .filter_map(|o| {
            let mapped = map(&o.bbox)?;
            let clipped = mapped.clip(bounds)?;
            Some(GroundTruthObject {
                bbox: clipped,
                label: o.label.clone(),
            })
        })
        .collect()
}

/// Applies one concrete operation to a raster and its annotations.
pub fn apply(
    img: &Raster,
    objects: &[GroundTruthObject],
    op: &AugmentOp,
) -> Result<(Raster, Vec<GroundTruthObject>)> {
    op.validate()?;
    match op {
        AugmentOp::RotateRight => {
            let out = rotate_raster(img, true);
            let h = img.height() as f64;
            let bounds = out.size();
            let boxes = retain_clipped(
                objects,
                |b| BBox::new(h - b.y2(), b.x1(), h - b.y1(), b.x2()).ok(),
                bounds,
            );
            Ok((out, boxes))
        }
        AugmentOp::RotateLeft => {
            let out = rotate_raster(img, false);
            let w = img.width() as f64;
            let bounds = out.size();
            let boxes = retain_clipped(
                objects,
                |b| BBox::new(b.y1(), w - b.x2(), b.y2(), w - b.x1()).ok(),
                bounds,
            );
            Ok((out, boxes))
        }
        AugmentOp::Zoom { factor } => {
            let out = scale_raster(img, *factor, *factor)?;
            let bounds = out.size();
            let boxes = retain_clipped(objects, |b| b.scale(*factor, *factor).ok(), bounds);
            Ok((out, boxes))
        }
        AugmentOp::Stretch { sx, sy } => {
            let out = scale_raster(img, *sx, *sy)?;
            let bounds = out.size();
            let boxes = retain_clipped(objects, |b| b.scale(*sx, *sy).ok(), bounds);
            Ok((out, boxes))
        }
        AugmentOp::Crop {
            region,
            min_visibility,
        } => {
            let out = crop_raster(img, region)?;
            let bounds = out.size();
            let boxes = objects
                .iter()
                .filter_map(|o| {
                    let moved = o.bbox.translate(-(region.x as f64), -(region.y as f64));
                    let clipped = moved.clip(bounds)?;
                    if clipped.area() < min_visibility * o.bbox.area() {
                        return None;
                    }
                    Some(GroundTruthObject {
                        bbox: clipped,
                        label: o.label.clone(),
                    })
                })
                .collect();
            Ok((out, boxes))
        }
        AugmentOp::RandomCrop { .. } => Err(Error::validation(
            "random crop has no position of its own; run it inside a seeded pipeline",
        )),
        AugmentOp::Elastic { alpha, sigma, seed } => {
            let field =
                DisplacementField::generate(img.width(), img.height(), *alpha, *sigma, *seed);
            let out = elastic_raster(img, &field);
            let bounds = out.size();
            // The warp is not affine, so a box's exact image is not a
            // rectangle. Displace boundary samples forward and take their
            // axis-aligned hull.
            let boxes = retain_clipped(
                objects,
                |b| {
                    let (mut x1, mut y1) = (f64::INFINITY, f64::INFINITY);
                    let (mut x2, mut y2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                    for (px, py) in boundary_points(b) {
                        let (dx, dy) = field.at(px, py);
                        x1 = x1.min(px + dx);
                        x2 = x2.max(px + dx);
                        y1 = y1.min(py + dy);
                        y2 = y2.max(py + dy);
                    }
                    BBox::new(x1, y1, x2, y2).ok()
                },
                bounds,
            );
            Ok((out, boxes))
        }
    }
}

/// Folds [`apply`] left to right. Operations that need randomness (the
/// random crop's position) draw it from a generator seeded with `seed`,
/// one op at a time in order, so a rerun with the same inputs reproduces
/// the output bit for bit.
pub fn pipeline(
    img: &Raster,
    objects: &[GroundTruthObject],
    ops: &[AugmentOp],
    seed: u64,
) -> Result<(Raster, Vec<GroundTruthObject>)> {
    for op in ops {
        op.validate()?;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut cur = img.clone();
    let mut objs = objects.to_vec();
    for op in ops {
        let concrete = match op {
            AugmentOp::RandomCrop {
                fraction,
                min_visibility,
            } => {
                let cw = ((cur.width() as f64 * fraction).round() as usize).clamp(1, cur.width());
                let ch =
                    ((cur.height() as f64 * fraction).round() as usize).clamp(1, cur.height());
                let x = rng.random_range(0..=cur.width() - cw);
                let y = rng.random_range(0..=cur.height() - ch);
                AugmentOp::Crop {
                    region: CropRegion {
                        x,
                        y,
                        width: cw,
                        height: ch,
                    },
                    min_visibility: *min_visibility,
                }
            }
            other => other.clone(),
        };
        let (next_img, next_objs) = apply(&cur, &objs, &concrete)?;
        cur = next_img;
        objs = next_objs;
    }
    Ok((cur, objs))
}

/// Downscales images that exceed `max_w` x `max_h`, preserving aspect
/// ratio: scale = min(max_w/w, max_h/h), boxes multiplied by the same
/// scale. Images already within the limits pass through untouched.
///
/// Scaled boxes are clipped to the output raster; a box can only vanish
/// in the pathological case where it sits entirely inside a sub-pixel
/// sliver lost to dimension rounding.
pub fn resize_to_limit(
    img: &Raster,
    boxes: &[BBox],
    max_w: u32,
    max_h: u32,
) -> Result<(Raster, Vec<BBox>)> {
    if max_w == 0 || max_h == 0 {
        return Err(Error::validation(format!(
            "resize limit must be at least 1x1, got {max_w}x{max_h}"
        )));
    }
    if img.width() <= max_w as usize && img.height() <= max_h as usize {
        return Ok((img.clone(), boxes.to_vec()));
    }
    let s = (max_w as f64 / img.width() as f64).min(max_h as f64 / img.height() as f64);
    let out = scale_raster(img, s, s)?;
    let bounds = out.size();
    let scaled = boxes
        .iter()
        .filter_map(|b| b.scale(s, s).ok()?.clip(bounds))
        .collect();
    Ok((out, scaled))
}
