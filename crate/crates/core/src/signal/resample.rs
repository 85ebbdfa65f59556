use crate::error::{Error, Result};
use crate::grid::Grid2D;

/// Free parameter of the Keys cubic kernel (Catmull-Rom).
pub const BICUBIC_A: f64 = -0.5;

pub fn cubic_weight(x: f64) -> f64 {
    let a = BICUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Four source indices (edge-clamped) and weights for every output sample.
fn taps_1d(src: usize, dst: usize) -> Vec<([usize; 4], [f64; 4])> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = (d as f64 + 0.5) * ratio - 0.5;
            let base = s.floor();
            let t = s - base;
            let base = base as isize;
            let mut idx = [0usize; 4];
            let mut w = [0.0; 4];
            for k in 0..4 {
                let i = base - 1 + k as isize;
                idx[k] = i.clamp(0, src as isize - 1) as usize;
                w[k] = cubic_weight(t - (k as f64 - 1.0));
            }
            (idx, w)
        })
        .collect()
}

/// Separable bicubic resampling to `round(scale * dims)`, pixel-center aligned.
///
/// No anti-alias prefilter is applied when shrinking.
pub fn bicubic_resize(img: &Grid2D, scale: f64) -> Result<Grid2D> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::contract(format!("scale must be positive, got {scale}")));
    }
    let out_rows = (scale * img.rows() as f64).round() as usize;
    let out_cols = (scale * img.cols() as f64).round() as usize;
    if out_rows == 0 || out_cols == 0 {
        return Err(Error::contract(format!(
            "scale {scale} collapses {}x{} to zero",
            img.rows(),
            img.cols()
        )));
    }
    let col_taps = taps_1d(img.cols(), out_cols);
    let row_taps = taps_1d(img.rows(), out_rows);

    let horizontal = Grid2D::from_fn(img.rows(), out_cols, |r, c| {
        let (idx, w) = &col_taps[c];
        (0..4).map(|k| w[k] * img[(r, idx[k])]).sum()
    });
    Ok(Grid2D::from_fn(out_rows, out_cols, |r, c| {
        let (idx, w) = &row_taps[r];
        (0..4).map(|k| w[k] * horizontal[(idx[k], c)]).sum()
    }))
}
