//! Applying a trained inverse to images, plus a Wiener baseline.
//!
//! The network and its extracted kernel give identical results for the same
//! boundary mode, since both extend the input once by the kernel radius.
//! Outputs are clipped to `[0, 1]` because the restoration kernel boosts high
//! frequencies and overshoots near edges.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gallery::Kernel;
use crate::grid::Grid2D;
use crate::image_io::Image;
use crate::lcnn::{forward_padded, Drk, LcnnModel};
use crate::signal::{bicubic_resize, conv2d_same, fft2_in_place, PadMode};

/// Either form of the learned inverse.
#[derive(Debug, Clone, Copy)]
pub enum Restorer<'a> {
    Model(&'a LcnnModel),
    Kernel(&'a Drk),
}

impl Restorer<'_> {
    fn support(&self) -> usize {
        match self {
            Restorer::Model(m) => m.drk_size(),
            Restorer::Kernel(d) => d.size(),
        }
    }

    /// Unclipped restoration of one plane.
    pub fn apply_plane(&self, plane: &Grid2D, pad_mode: PadMode) -> Result<Grid2D> {
        match self {
            Restorer::Model(m) => Ok(forward_padded(m, plane, pad_mode)),
            Restorer::Kernel(d) => conv2d_same(plane, d.grid(), pad_mode),
        }
    }
}

fn par_map_planes(img: &Image, f: impl Fn(&Grid2D) -> Result<Grid2D> + Sync + Send) -> Result<Image> {
    let planes = img
        .planes()
        .par_iter()
        .map(f)
        .collect::<Result<Vec<_>>>()?;
    Image::new(planes, img.color())
}

/// Restoration without the final clip, for equivalence checks.
pub fn restore_unclipped(img: &Image, restorer: Restorer<'_>, pad_mode: PadMode) -> Result<Image> {
    let s = restorer.support();
    if img.rows() < s || img.cols() < s {
        return Err(Error::contract(format!(
            "image {}x{} is smaller than the {s}x{s} restoration kernel",
            img.rows(),
            img.cols()
        )));
    }
    par_map_planes(img, |p| restorer.apply_plane(p, pad_mode))
}

pub fn deblur_with_drk(img: &Image, drk: &Drk, pad_mode: PadMode) -> Result<Image> {
    Ok(restore_unclipped(img, Restorer::Kernel(drk), pad_mode)?.clamped())
}

pub fn deblur_with_model(img: &Image, model: &LcnnModel, pad_mode: PadMode) -> Result<Image> {
    Ok(restore_unclipped(img, Restorer::Model(model), pad_mode)?.clamped())
}

pub fn bicubic_upsample(img: &Image, scale: f64) -> Result<Image> {
    par_map_planes(img, |p| bicubic_resize(p, scale))
}

/// Bicubic upsampling followed by deblurring.
pub fn super_resolve(
    img: &Image,
    scale: f64,
    restorer: Restorer<'_>,
    pad_mode: PadMode,
) -> Result<Image> {
    let up = bicubic_upsample(img, scale)?;
    Ok(restore_unclipped(&up, restorer, pad_mode)?.clamped())
}

/// Frequency-domain Wiener deconvolution with a known kernel.
///
/// Each plane is zero-padded to `image + kernel - 1`, multiplied by
/// `conj(K) / (|K|^2 + nsr)` with the kernel centered on the origin, and
/// cropped back.
pub fn wiener_deconvolve(img: &Image, k: &Kernel, nsr: f64) -> Result<Image> {
    if !(nsr >= 0.0) || !nsr.is_finite() {
        return Err(Error::contract(format!("nsr must be finite and >= 0, got {nsr}")));
    }
    let (rows, cols) = img.dims();
    let (kr, kc) = k.grid().dims();
    let (pr, pc) = (rows + kr - 1, cols + kc - 1);

    let mut kh = vec![Complex64::new(0.0, 0.0); pr * pc];
    let (cr, cc) = (kr / 2, kc / 2);
    for i in 0..kr {
        for j in 0..kc {
            let r = (i + pr - cr) % pr;
            let c = (j + pc - cc) % pc;
            kh[r * pc + c] = Complex64::new(k.grid()[(i, j)], 0.0);
        }
    }
    fft2_in_place(&mut kh, pr, pc, false);
    if nsr == 0.0 {
        let smallest = kh.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if smallest < 1e-12 {
            return Err(Error::SingularSpectrum { magnitude: smallest });
        }
    }
    let filter: Vec<Complex64> = kh
        .iter()
        .map(|z| z.conj() / (z.norm_sqr() + nsr))
        .collect();

    let restored = par_map_planes(img, |plane| {
        let mut buf = vec![Complex64::new(0.0, 0.0); pr * pc];
        for r in 0..rows {
            for c in 0..cols {
                buf[r * pc + c] = Complex64::new(plane[(r, c)], 0.0);
            }
        }
        fft2_in_place(&mut buf, pr, pc, false);
        for (z, f) in buf.iter_mut().zip(&filter) {
            *z *= f;
        }
        fft2_in_place(&mut buf, pr, pc, true);
        Ok(Grid2D::from_fn(rows, cols, |r, c| buf[r * pc + c].re))
    })?;
    Ok(restored.clamped())
}
