//! Dense row-major grids of real and complex samples.
//!
//! [`Grid2D`] carries kernels, image planes and loss maps; [`ComplexGrid2D`]
//! carries spectra. Both refuse non-finite samples on construction.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::{Index, IndexMut};
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

const GRD_MAGIC: &[u8; 4] = b"GRD1";

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid2D {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::contract(format!(
                "grid dimensions must be positive, got {rows}x{cols}"
            )));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Size(format!("{rows}x{cols}")))?;
        if data.len() != len {
            return Err(Error::contract(format!(
                "grid {rows}x{cols} needs {len} samples, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "non-finite sample {} at ({}, {})",
                data[i],
                i / cols,
                i % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// All-zero grid. Panics on zero dimensions.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "grid dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        let mut g = Self::zeros(rows, cols);
        g.data.fill(value);
        g
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut g = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                g.data[r * cols + c] = f(r, c);
            }
        }
        g
    }

    /// Builds a grid from nested rows; handy in tests.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != m) {
            return Err(Error::contract("ragged rows"));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(n, m, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    /// `alpha * self + beta * other`, dims must match.
    pub fn lin_comb(&self, alpha: f64, other: &Grid2D, beta: f64) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Grid2D) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn check_same_dims(&self, other: &Grid2D) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::contract(format!(
                "dimension mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// Sub-grid starting at (`top`, `left`).
    pub fn crop(&self, top: usize, left: usize, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || top + rows > self.rows || left + cols > self.cols {
            return Err(Error::contract(format!(
                "crop {rows}x{cols} at ({top}, {left}) exceeds {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(Self::from_fn(rows, cols, |r, c| self[(top + r, left + c)]))
    }

    /// Removes `margin` samples from every side.
    pub fn crop_border(&self, margin: usize) -> Result<Self> {
        if 2 * margin >= self.rows || 2 * margin >= self.cols {
            return Err(Error::contract(format!(
                "border {margin} leaves nothing of {}x{}",
                self.rows, self.cols
            )));
        }
        self.crop(margin, margin, self.rows - 2 * margin, self.cols - 2 * margin)
    }

    /// Places `self` at the center of a larger zero grid.
    ///
    /// The size difference must be even on both axes so the center sample stays
    /// the center sample.
    pub fn embed_centered(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows < self.rows
            || cols < self.cols
            || (rows - self.rows) % 2 != 0
            || (cols - self.cols) % 2 != 0
        {
            return Err(Error::contract(format!(
                "cannot center {}x{} inside {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        let top = (rows - self.rows) / 2;
        let left = (cols - self.cols) / 2;
        let mut out = Self::zeros(rows, cols);
        for r in 0..self.rows {
            let src = &self.data[r * self.cols..(r + 1) * self.cols];
            let start = (top + r) * cols + left;
            out.data[start..start + self.cols].copy_from_slice(src);
        }
        Ok(out)
    }

    /// Element-wise 180 degree rotation.
    pub fn flipped(&self) -> Self {
        let mut data = self.data.clone();
        data.reverse();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn write_grd<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(GRD_MAGIC)?;
        w.write_all(&(self.rows as u32).to_le_bytes())?;
        w.write_all(&(self.cols as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_grd<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "GRD1 magic")?;
        if &magic != GRD_MAGIC {
            return Err(Error::format("bad GRD1 magic"));
        }
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Size(format!("{rows}x{cols}")))?;
        let mut data = Vec::with_capacity(len.min(1 << 24));
        for _ in 0..len {
            data.push(read_f64(&mut r)?);
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra).map_err(|e| Error::format(e.to_string()))? != 0 {
            return Err(Error::format("trailing bytes after GRD1 payload"));
        }
        Self::new(rows, cols, data).map_err(|e| Error::format(format!("GRD1 payload: {e}")))
    }

    pub fn save_grd(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_grd(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load_grd(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_grd(BufReader::new(f))
    }
}

impl Index<(usize, usize)> for Grid2D {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Grid2D {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid2D {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid2D {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::contract(format!(
                "complex grid {rows}x{cols} with {} samples",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::contract("non-finite complex sample"));
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn real(&self) -> Grid2D {
        Grid2D::from_fn(self.rows, self.cols, |r, c| self[(r, c)].re)
    }

    pub fn imag(&self) -> Grid2D {
        Grid2D::from_fn(self.rows, self.cols, |r, c| self[(r, c)].im)
    }
}

impl Index<(usize, usize)> for ComplexGrid2D {
    type Output = Complex64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

pub(crate) fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::format(format!("truncated while reading {what}: {e}")))
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, "u32")?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, "u64")?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, "f64")?;
    Ok(f64::from_le_bytes(b))
}
