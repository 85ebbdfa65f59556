use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::psnr;
use super::METRIC_BORDER;
use crate::error::{Error, Result};
use crate::gallery::{draw_kernel, Kernel, DEFAULT_NOISE, DEFAULT_SIGMA_RANGE};
use crate::image_io::{load_image, Image};
use crate::signal::{conv2d_same, PadMode};

pub const EVAL_KERNEL_SIZES: [usize; 5] = [11, 15, 19, 23, 27];

/// Blurred PSNR outside this band is logged as suspicious.
pub const BLUR_SANITY_BAND_DB: (f64, f64) = (10.0, 45.0);

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub sizes: Vec<usize>,
    pub sigma_range: (f64, f64),
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            sizes: EVAL_KERNEL_SIZES.to_vec(),
            sigma_range: DEFAULT_SIGMA_RANGE,
            noise_amplitude: DEFAULT_NOISE,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlurPair {
    pub source: PathBuf,
    pub sharp: Image,
    pub blurred: Image,
    pub kernel: Kernel,
    pub kernel_size: usize,
    /// Seed that regenerates `kernel` through [`pair_kernel`].
    pub seed: u64,
}

/// Kernel for one pair, reproducible from its manifest seed.
pub fn pair_kernel(seed: u64, size: usize, cfg: &SimulationConfig) -> Result<Kernel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_kernel(&mut rng, size, cfg.sigma_range, cfg.noise_amplitude)
}

pub fn blur_image(sharp: &Image, kernel: &Kernel) -> Result<Image> {
    sharp.map_planes(|p| conv2d_same(p, kernel.grid(), PadMode::Reflect))
}

/// Readable raster files directly inside `dir`, sorted by name.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn load_sharp_dir(dir: impl AsRef<Path>) -> Result<Vec<(PathBuf, Image)>> {
    let dir = dir.as_ref();
    let paths = list_images(dir)?;
    if paths.is_empty() {
        return Err(Error::Input(format!("no images found in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| load_image(&p).map(|img| (p, img)))
        .collect()
}

/// One seeded kernel per (size, image), grouped by size in the order of
/// `cfg.sizes`.
pub fn simulate_pairs(images: &[(PathBuf, Image)], cfg: &SimulationConfig) -> Result<Vec<BlurPair>> {
    if images.is_empty() {
        return Err(Error::Input("no sharp images".into()));
    }
    let largest = cfg.sizes.iter().copied().max().unwrap_or(0);
    let min_side = (2 * METRIC_BORDER + super::metrics::SSIM_WINDOW).max(largest);
    for (path, img) in images {
        if img.rows() < min_side || img.cols() < min_side {
            return Err(Error::Input(format!(
                "{}: {}x{} is below the {min_side}px minimum",
                path.display(),
                img.rows(),
                img.cols()
            )));
        }
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pairs = Vec::with_capacity(images.len() * cfg.sizes.len());
    for &size in &cfg.sizes {
        for (path, sharp) in images {
            let seed = seeds.next_u64();
            let kernel = pair_kernel(seed, size, cfg)?;
            let blurred = blur_image(sharp, &kernel)?;
            let db = psnr(&blurred, sharp, 1.0)?;
            if db <= BLUR_SANITY_BAND_DB.0 || db >= BLUR_SANITY_BAND_DB.1 {
                log::warn!(
                    "{} size {size}: blurred psnr {db:.2} dB outside {BLUR_SANITY_BAND_DB:?}",
                    path.display()
                );
            }
            pairs.push(BlurPair {
                source: path.clone(),
                sharp: sharp.clone(),
                blurred,
                kernel,
                kernel_size: size,
                seed,
            });
        }
    }
    Ok(pairs)
}

pub fn simulate_blur_dataset(sharp_dir: impl AsRef<Path>, cfg: &SimulationConfig) -> Result<Vec<BlurPair>> {
    simulate_pairs(&load_sharp_dir(sharp_dir)?, cfg)
}

pub const MANIFEST_HEADER: &str = "# path\tsize\tsigma1\tsigma2\ttheta\tseed";

/// Tab-separated, one line per pair.
pub fn write_manifest<W: Write>(pairs: &[BlurPair], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{MANIFEST_HEADER}")?;
    for p in pairs {
        let (s1, s2, th) = p
            .kernel
            .spec()
            .map(|s| (s.sigma1, s.sigma2, s.theta))
            .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        writeln!(
            w,
            "{}\t{}\t{s1}\t{s2}\t{th}\t{}",
            p.source.display(),
            p.kernel_size,
            p.seed
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub size: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub theta: f64,
    pub seed: u64,
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let bad = |n: usize| Error::format(format!("manifest line {n} is malformed"));
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(bad(i + 1));
            }
            Ok(ManifestEntry {
                path: PathBuf::from(f[0]),
                size: f[1].parse().map_err(|_| bad(i + 1))?,
                sigma1: f[2].parse().map_err(|_| bad(i + 1))?,
                sigma2: f[3].parse().map_err(|_| bad(i + 1))?,
                theta: f[4].parse().map_err(|_| bad(i + 1))?,
                seed: f[5].parse().map_err(|_| bad(i + 1))?,
            })
        })
        .collect()
}
