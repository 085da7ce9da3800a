//! 8-bit raster storage plus the sampling primitive every geometric
//! transform builds on.

use crate::error::{Error, Result};
use crate::geometry::ImageSize;

/// Grayscale (1 channel) or RGB (3 channel) image, 8 bits per sample,
/// row-major with interleaved channels: sample `(x, y, c)` lives at
/// `(y * width + x) * channels + c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation(format!(
                "raster dimensions must be >= 1, got {width}x{height}"
            )));
        }
        if width > u32::MAX as usize || height > u32::MAX as usize {
            return Err(Error::validation(format!(
                "raster dimensions {width}x{height} exceed the supported range"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::validation(format!(
                "raster must have 1 or 3 channels, got {channels}"
            )));
        }
        let expect = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::validation("raster size overflows index range"))?;
        if samples.len() != expect {
            return Err(Error::validation(format!(
                "raster {width}x{height}x{channels} needs {expect} samples, got {}",
                samples.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        let n = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::validation("raster size overflows index range"))?;
        Raster::new(width, height, channels, vec![value; n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn size(&self) -> ImageSize {
        ImageSize::new(self.width as u32, self.height as u32)
            .expect("raster dimensions are validated at construction")
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.samples[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, value: u8) {
        self.samples[(y * self.width + x) * self.channels + c] = value;
    }

    /// Bilinear sample at a continuous image point, where pixel `(ix, iy)`
    /// covers `[ix, ix+1) x [iy, iy+1)` with its value at the center.
    /// Coordinates beyond the border clamp to the edge pixels. Sampling
    /// exactly at a pixel center returns that sample with no rounding.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> f64 {
        let u = x - 0.5;
        let v = y - 0.5;
        let x0f = u.floor();
        let y0f = v.floor();
        let fx = u - x0f;
        let fy = v - y0f;
        let clamp = |t: f64, hi: usize| -> usize {
            if t < 0.0 {
                0
            } else if t as usize >= hi {
                hi - 1
            } else {
                t as usize
            }
        };
        let x0 = clamp(x0f, self.width);
        let x1 = clamp(x0f + 1.0, self.width);
        let y0 = clamp(y0f, self.height);
        let y1 = clamp(y0f + 1.0, self.height);
        let g = |xx: usize, yy: usize| self.get(xx, yy, c) as f64;
        (1.0 - fx) * (1.0 - fy) * g(x0, y0)
            + fx * (1.0 - fy) * g(x1, y0)
            + (1.0 - fx) * fy * g(x0, y1)
            + fx * fy * g(x1, y1)
    }
}
