//! Seeded synthetic sharp images for demos and tests when no photo corpus
//! is at hand: smooth shading, hard-edged shapes and a few striped patches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::Grid2D;
use crate::image_io::{ColorSpace, Image};

enum Shape {
    Rect { top: f64, left: f64, h: f64, w: f64 },
    Disk { r0: f64, c0: f64, radius: f64 },
    Stripes { r0: f64, c0: f64, radius: f64, freq: f64, angle: f64 },
}

impl Shape {
    fn random(rng: &mut ChaCha8Rng, rows: f64, cols: f64) -> Self {
        let scale = rows.min(cols);
        match rng.random_range(0..3) {
            0 => Shape::Rect {
                top: rng.random_range(0.0..rows),
                left: rng.random_range(0.0..cols),
                h: rng.random_range(0.05..0.4) * scale,
                w: rng.random_range(0.05..0.4) * scale,
            },
            1 => Shape::Disk {
                r0: rng.random_range(0.0..rows),
                c0: rng.random_range(0.0..cols),
                radius: rng.random_range(0.03..0.2) * scale,
            },
            _ => Shape::Stripes {
                r0: rng.random_range(0.0..rows),
                c0: rng.random_range(0.0..cols),
                radius: rng.random_range(0.08..0.25) * scale,
                freq: rng.random_range(0.15..0.9),
                angle: rng.random_range(0.0..std::f64::consts::PI),
            },
        }
    }

    /// Coverage weight in `[0, 1]` at a pixel.
    fn cover(&self, r: f64, c: f64) -> f64 {
        match *self {
            Shape::Rect { top, left, h, w } => {
                let inside = r >= top && r < top + h && c >= left && c < left + w;
                f64::from(u8::from(inside))
            }
            Shape::Disk { r0, c0, radius } => {
                f64::from(u8::from((r - r0).hypot(c - c0) <= radius))
            }
            Shape::Stripes { r0, c0, radius, freq, angle } => {
                if (r - r0).hypot(c - c0) > radius {
                    return 0.0;
                }
                let t = (r - r0) * angle.cos() + (c - c0) * angle.sin();
                0.5 + 0.5 * (freq * t).sin()
            }
        }
    }
}

/// Deterministic synthetic scene with values in `[0.05, 0.95]`.
pub fn procedural_scene(seed: u64, rows: usize, cols: usize, color: ColorSpace) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = match color {
        ColorSpace::Gray => 1,
        ColorSpace::Rgb => 3,
    };
    let (fr, fc) = (rows as f64, cols as f64);
    let base: Vec<f64> = (0..channels).map(|_| rng.random_range(0.2..0.8)).collect();
    let (gr, gc) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let shapes: Vec<(Shape, Vec<f64>)> = (0..24)
        .map(|_| {
            let s = Shape::random(&mut rng, fr, fc);
            let tone = (0..channels).map(|_| rng.random_range(0.0..1.0)).collect();
            (s, tone)
        })
        .collect();

    let planes = (0..channels)
        .map(|ch| {
            Grid2D::from_fn(rows, cols, |r, c| {
                let (y, x) = (r as f64, c as f64);
                let mut v = base[ch] + gr * (y / fr - 0.5) + gc * (x / fc - 0.5);
                for (shape, tone) in &shapes {
                    let w = shape.cover(y, x);
                    v = (1.0 - w) * v + w * tone[ch];
                }
                0.05 + 0.9 * v.clamp(0.0, 1.0)
            })
        })
        .collect();
    Image::new(planes, color).expect("planes built with matching dims")
}
