//! Multi-plane images in `[0, 1]` and 8-bit file I/O (PNG, PGM/PPM).

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageReader, RgbImage};

use crate::error::{Error, Result};
use crate::grid::Grid2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorSpace {
    Gray,
    Rgb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    planes: Vec<Grid2D>,
    color: ColorSpace,
}

impl Image {
    pub fn new(planes: Vec<Grid2D>, color: ColorSpace) -> Result<Self> {
        let want = match color {
            ColorSpace::Gray => 1,
            ColorSpace::Rgb => 3,
        };
        if planes.len() != want {
            return Err(Error::contract(format!(
                "{color:?} image needs {want} planes, got {}",
                planes.len()
            )));
        }
        if planes.iter().any(|p| p.dims() != planes[0].dims()) {
            return Err(Error::contract("image planes differ in size"));
        }
        Ok(Self { planes, color })
    }

    pub fn gray(plane: Grid2D) -> Self {
        Self {
            planes: vec![plane],
            color: ColorSpace::Gray,
        }
    }

    pub fn rgb(r: Grid2D, g: Grid2D, b: Grid2D) -> Result<Self> {
        Self::new(vec![r, g, b], ColorSpace::Rgb)
    }

    pub fn planes(&self) -> &[Grid2D] {
        &self.planes
    }

    pub fn color(&self) -> ColorSpace {
        self.color
    }

    pub fn rows(&self) -> usize {
        self.planes[0].rows()
    }

    pub fn cols(&self) -> usize {
        self.planes[0].cols()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.planes[0].dims()
    }

    /// Applies `f` to every plane.
    pub fn map_planes(&self, f: impl Fn(&Grid2D) -> Result<Grid2D>) -> Result<Image> {
        let planes = self.planes.iter().map(f).collect::<Result<Vec<_>>>()?;
        Image::new(planes, self.color)
    }

    pub fn clamped(&self) -> Image {
        Image {
            planes: self.planes.iter().map(|p| p.map(|v| v.clamp(0.0, 1.0))).collect(),
            color: self.color,
        }
    }

    pub fn crop_border(&self, margin: usize) -> Result<Image> {
        self.map_planes(|p| p.crop_border(margin))
    }

    pub fn crop(&self, top: usize, left: usize, rows: usize, cols: usize) -> Result<Image> {
        self.map_planes(|p| p.crop(top, left, rows, cols))
    }

    /// ITU-R BT.601 luma for RGB; the plane itself for gray.
    pub fn luminance(&self) -> Grid2D {
        match self.color {
            ColorSpace::Gray => self.planes[0].clone(),
            ColorSpace::Rgb => {
                let [r, g, b] = [&self.planes[0], &self.planes[1], &self.planes[2]];
                Grid2D::from_fn(self.rows(), self.cols(), |i, j| {
                    0.299 * r[(i, j)] + 0.587 * g[(i, j)] + 0.114 * b[(i, j)]
                })
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Image) -> Result<f64> {
        if self.planes.len() != other.planes.len() {
            return Err(Error::contract("plane count mismatch"));
        }
        let mut worst = 0.0f64;
        for (a, b) in self.planes.iter().zip(&other.planes) {
            worst = worst.max(a.max_abs_diff(b)?);
        }
        Ok(worst)
    }
}

fn byte(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

fn plane_from_bytes(rows: usize, cols: usize, bytes: impl Iterator<Item = u8>) -> Grid2D {
    let data: Vec<f64> = bytes.map(|b| b as f64 / 255.0).collect();
    Grid2D::new(rows, cols, data).expect("byte values are finite")
}

/// Reads an 8-bit grayscale or RGB image. Other layouts and bit depths are
/// rejected.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader
        .decode()
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    let (cols, rows) = (decoded.width() as usize, decoded.height() as usize);
    if rows == 0 || cols == 0 {
        return Err(Error::format(format!("{}: empty image", path.display())));
    }
    match decoded {
        DynamicImage::ImageLuma8(buf) => Ok(Image::gray(plane_from_bytes(
            rows,
            cols,
            buf.into_raw().into_iter(),
        ))),
        DynamicImage::ImageRgb8(buf) => {
            let raw = buf.into_raw();
            let planes = (0..3)
                .map(|c| plane_from_bytes(rows, cols, raw.iter().skip(c).step_by(3).copied()))
                .collect();
            Image::new(planes, ColorSpace::Rgb)
        }
        other => Err(Error::format(format!(
            "{}: unsupported pixel layout {:?}; only 8-bit gray and RGB are accepted",
            path.display(),
            other.color()
        ))),
    }
}

/// Writes with `round(255 v)` quantization; the extension picks the format.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (rows, cols) = img.dims();
    let result = match img.color {
        ColorSpace::Gray => {
            let raw: Vec<u8> = img.planes[0].data().iter().map(|&v| byte(v)).collect();
            GrayImage::from_raw(cols as u32, rows as u32, raw)
                .expect("buffer size matches")
                .save(path)
        }
        ColorSpace::Rgb => {
            let mut raw = Vec::with_capacity(rows * cols * 3);
            for i in 0..rows * cols {
                for p in &img.planes {
                    raw.push(byte(p.data()[i]));
                }
            }
            RgbImage::from_raw(cols as u32, rows as u32, raw)
                .expect("buffer size matches")
                .save(path)
        }
    };
    result.map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(format!("{}: {other}", path.display())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_bytes_decode_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.pgm");
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 51, 255, 128]);
        std::fs::write(&path, bytes).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.color(), ColorSpace::Gray);
        assert_eq!(img.planes()[0].data(), &[0.0, 0.2, 1.0, 128.0 / 255.0]);

        let path = dir.path().join("tiny.ppm");
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 0, 255]);
        std::fs::write(&path, bytes).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.color(), ColorSpace::Rgb);
        assert_eq!(img.planes()[0].data(), &[1.0, 0.0]);
        assert_eq!(img.planes()[2].data(), &[0.0, 1.0]);
    }

    #[test]
    fn sixteen_bit_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.pgm");
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0, 1, 255, 255]);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_image(&path), Err(Error::Format(_))));
    }

    #[test]
    fn round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let plane = |s: f64| Grid2D::from_fn(9, 7, |r, c| ((r * 7 + c) as f64 * s).sin() * 0.5 + 0.5);
        let img = Image::rgb(plane(0.3), plane(0.7), plane(1.1)).unwrap();
        for name in ["a.png", "a.ppm"] {
            let path = dir.path().join(name);
            save_image(&img, &path).unwrap();
            let back = load_image(&path).unwrap();
            assert!(back.max_abs_diff(&img).unwrap() <= 1.0 / 255.0);
            save_image(&back, &path).unwrap();
            assert_eq!(load_image(&path).unwrap(), back);
        }
    }
}
