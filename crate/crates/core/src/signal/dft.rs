//! Discrete Fourier transforms with the negative-exponent convention
//! `X(p, q) = sum g(m, n) exp(-j 2 pi (p m / P + q n / Q))`.
//!
//! Kernels are at most a few dozen samples per side, so [`dft2d`] evaluates the
//! sum directly (separably). Image-sized transforms go through `rustfft`, which
//! uses the same sign.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid2D, Grid2D};

/// `exp(-j 2 pi k / n)` for `k` in `0..n`.
pub(crate) fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
        .collect()
}

/// Zero-pads `g` to `out_rows x out_cols` (samples stay at their indices) and
/// takes the 2-D DFT.
pub fn dft2d(g: &Grid2D, out_rows: usize, out_cols: usize) -> Result<ComplexGrid2D> {
    if out_rows < g.rows() || out_cols < g.cols() {
        return Err(Error::contract(format!(
            "DFT size {out_rows}x{out_cols} smaller than input {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    let wr = twiddles(out_rows);
    let wc = twiddles(out_cols);
    let (rows, cols) = g.dims();

    // Along columns first: partial[m][q] = sum_n g[m, n] w_Q^{q n}.
    let mut partial = vec![Complex64::new(0.0, 0.0); rows * out_cols];
    for m in 0..rows {
        for q in 0..out_cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..cols {
                acc += wc[(q * n) % out_cols] * g[(m, n)];
            }
            partial[m * out_cols + q] = acc;
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); out_rows * out_cols];
    for p in 0..out_rows {
        for m in 0..rows {
            let w = wr[(p * m) % out_rows];
            let src = &partial[m * out_cols..(m + 1) * out_cols];
            let dst = &mut out[p * out_cols..(p + 1) * out_cols];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    Ok(ComplexGrid2D::from_raw(out_rows, out_cols, out))
}

pub fn magnitude(c: &ComplexGrid2D) -> Grid2D {
    Grid2D::from_fn(c.rows(), c.cols(), |r, k| c[(r, k)].norm())
}

/// Principal-value angle in `(-pi, pi]`.
pub fn principal_angle(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= -PI {
        PI
    } else {
        a
    }
}

pub fn phase(c: &ComplexGrid2D) -> Grid2D {
    Grid2D::from_fn(c.rows(), c.cols(), |r, k| principal_angle(c[(r, k)]))
}

/// Circularly shifts an odd-sized grid so its geometric center lands on (0, 0).
pub fn center_shift_to_origin(g: &Grid2D) -> Result<Grid2D> {
    let (rows, cols) = g.dims();
    if rows % 2 == 0 || cols % 2 == 0 {
        return Err(Error::contract(format!(
            "center shift needs odd dims, got {rows}x{cols}"
        )));
    }
    let (cr, cc) = ((rows - 1) / 2, (cols - 1) / 2);
    Ok(Grid2D::from_fn(rows, cols, |r, c| {
        g[((r + cr) % rows, (c + cc) % cols)]
    }))
}

/// Inverse of [`center_shift_to_origin`].
pub fn origin_shift_to_center(g: &Grid2D) -> Result<Grid2D> {
    let (rows, cols) = g.dims();
    if rows % 2 == 0 || cols % 2 == 0 {
        return Err(Error::contract(format!(
            "center shift needs odd dims, got {rows}x{cols}"
        )));
    }
    let (cr, cc) = ((rows - 1) / 2, (cols - 1) / 2);
    Ok(Grid2D::from_fn(rows, cols, |r, c| {
        g[((r + rows - cr) % rows, (c + cols - cc) % cols)]
    }))
}

/// Spectrum of a centered kernel with its center moved to the origin.
///
/// The kernel is first embedded at the center of a `rows x cols` zero grid and
/// then circularly shifted, so the wrap-around happens on the padded grid. A
/// point-symmetric kernel therefore has a real spectrum.
pub fn zero_phase_spectrum(g: &Grid2D, rows: usize, cols: usize) -> Result<ComplexGrid2D> {
    let embedded = g.embed_centered(rows, cols)?;
    dft2d(&center_shift_to_origin(&embedded)?, rows, cols)
}

/// In-place 2-D FFT of a row-major complex buffer. The inverse is normalized
/// by `1 / (rows * cols)`.
pub fn fft2_in_place(data: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    assert_eq!(data.len(), rows * cols);
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(cols), planner.plan_fft_inverse(rows))
    } else {
        (planner.plan_fft_forward(cols), planner.plan_fft_forward(rows))
    };
    for row in data.chunks_exact_mut(cols) {
        row_fft.process(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
    if inverse {
        let norm = 1.0 / (rows * cols) as f64;
        for z in data.iter_mut() {
            *z *= norm;
        }
    }
}
