use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::image_io::Image;

/// Returned for identical inputs instead of infinity.
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_pair(a: &Image, b: &Image) -> Result<()> {
    if a.dims() != b.dims() || a.color() != b.color() {
        return Err(Error::contract(format!(
            "metric inputs differ: {:?} {:?} vs {:?} {:?}",
            a.dims(),
            a.color(),
            b.dims(),
            b.color()
        )));
    }
    Ok(())
}

/// Mean squared error over every sample of every plane.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, q) in a.planes().iter().zip(b.planes()) {
        for (x, y) in p.data().iter().zip(q.data()) {
            sum += (x - y) * (x - y);
        }
        n += p.data().len();
    }
    Ok(sum / n as f64)
}

pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    let err = mse(a, b)?;
    if err == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / err).log10()).min(PSNR_CAP_DB))
}

fn gaussian_taps() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable weighted average over every window that fits inside `g`.
fn window_means(g: &Grid2D, taps: &[f64]) -> Grid2D {
    let n = taps.len();
    let (rows, cols) = g.dims();
    let oc = cols + 1 - n;
    let or = rows + 1 - n;
    let horiz = Grid2D::from_fn(rows, oc, |r, c| {
        taps.iter().enumerate().map(|(k, w)| w * g[(r, c + k)]).sum()
    });
    Grid2D::from_fn(or, oc, |r, c| {
        taps.iter().enumerate().map(|(k, w)| w * horiz[(r + k, c)]).sum()
    })
}

/// Structural similarity of the luminance planes, peak 1.
///
/// Gaussian-weighted statistics over every fully contained 11x11 window,
/// averaged without further weighting.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    if a.rows() < SSIM_WINDOW || a.cols() < SSIM_WINDOW {
        return Err(Error::contract(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {:?}",
            a.dims()
        )));
    }
    let x = a.luminance();
    let y = b.luminance();
    let taps = gaussian_taps();
    let mx = window_means(&x, &taps);
    let my = window_means(&y, &taps);
    let mxx = window_means(&x.map(|v| v * v), &taps);
    let myy = window_means(&y.map(|v| v * v), &taps);
    let xy = Grid2D::from_fn(x.rows(), x.cols(), |r, c| x[(r, c)] * y[(r, c)]);
    let mxy = window_means(&xy, &taps);

    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let n = mx.data().len();
    let mut total = 0.0;
    for i in 0..n {
        let (ux, uy) = (mx.data()[i], my.data()[i]);
        let vx = mxx.data()[i] - ux * ux;
        let vy = myy.data()[i] - uy * uy;
        let cov = mxy.data()[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cov + c2))
            / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    Ok(total / n as f64)
}
