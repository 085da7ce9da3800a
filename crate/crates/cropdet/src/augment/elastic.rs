//! Seeded displacement fields for elastic deformation: per-pixel uniform
//! noise in [-1, 1], Gaussian-smoothed, scaled by alpha.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Per-pixel displacement vectors for one image geometry. `dx`/`dy` are
/// row-major `width * height` planes in pixels.
pub(crate) struct DisplacementField {
    width: usize,
    height: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl DisplacementField {
    /// Draws the horizontal plane first, then the vertical one, each as
    /// `width * height` row-major uniform samples from a generator seeded
    /// with `seed`; the draw order is part of the determinism contract.
    pub(crate) fn generate(width: usize, height: usize, alpha: f64, sigma: f64, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n = width * height;
        let mut dx: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let mut dy: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        gaussian_blur(&mut dx, width, height, sigma);
        gaussian_blur(&mut dy, width, height, sigma);
        for v in dx.iter_mut().chain(dy.iter_mut()) {
            *v *= alpha;
        }
        DisplacementField {
            width,
            height,
            dx,
            dy,
        }
    }

    /// Displacement at a continuous image point, bilinearly interpolated
    /// between pixel centers with edge clamping.
    pub(crate) fn at(&self, x: f64, y: f64) -> (f64, f64) {
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
        let lerp2 = |plane: &[f64]| -> f64 {
            let g = |xx: usize, yy: usize| plane[yy * self.width + xx];
            (1.0 - fx) * (1.0 - fy) * g(x0, y0)
                + fx * (1.0 - fy) * g(x1, y0)
                + (1.0 - fx) * fy * g(x0, y1)
                + fx * fy * g(x1, y1)
        };
        (lerp2(&self.dx), lerp2(&self.dy))
    }

    /// Displacement at the center of pixel `(x, y)`.
    pub(crate) fn at_pixel(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }
}

/// Separable Gaussian blur with edge replication. Kernel radius is
/// 3 sigma, which carries > 99.7% of the mass.
fn gaussian_blur(plane: &mut [f64], width: usize, height: usize, sigma: f64) {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for i in -radius..=radius {
        kernel.push((-((i * i) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }

    let tap = |data: &[f64], idx: isize, len: usize| -> f64 {
        data[idx.clamp(0, len as isize - 1) as usize]
    };

    // Horizontal pass.
    let mut tmp = vec![0.0; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                acc += k * tap(row, x as isize + ki as isize - radius, width);
            }
            tmp[y * width + x] = acc;
        }
    }
    // Vertical pass, reading columns out of the horizontal result.
    for x in 0..width {
        let col: Vec<f64> = (0..height).map(|y| tmp[y * width + x]).collect();
        for y in 0..height {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                acc += k * tap(&col, y as isize + ki as isize - radius, height);
            }
            plane[y * width + x] = acc;
        }
    }
}
