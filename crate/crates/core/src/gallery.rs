//! Random gallery of anisotropic Gaussian degradation kernels.
//!
//! Kernels are sampled on the integer lattice at pixel centers (no
//! supersampling), rotated by `theta` and normalized to unit sum. An optional
//! multiplicative perturbation pushes them slightly off the Gaussian family.
//! Randomness comes from `ChaCha8Rng`, so a seed fixes the gallery exactly.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{read_exact, read_f64, read_u32, read_u64, Grid2D};

pub const DEFAULT_COUNT: usize = 2400;
pub const DEFAULT_SIZE: usize = 11;
pub const DEFAULT_SIGMA_RANGE: (f64, f64) = (0.175, 3.0);
pub const DEFAULT_NOISE: f64 = 0.25;

const SUM_TOLERANCE: f64 = 1e-9;
const RKG_MAGIC: &[u8; 4] = b"RKG1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernelSpec {
    pub sigma1: f64,
    pub sigma2: f64,
    /// Rotation in radians.
    pub theta: f64,
    pub size: usize,
}

/// A non-negative, unit-sum point-spread function.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    grid: Grid2D,
    spec: Option<GaussianKernelSpec>,
}

impl Kernel {
    pub fn new(grid: Grid2D, spec: Option<GaussianKernelSpec>) -> Result<Self> {
        if let Some(v) = grid.data().iter().find(|v| **v < 0.0) {
            return Err(Error::Invariant(format!("negative kernel entry {v}")));
        }
        let sum = grid.sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Invariant(format!("kernel sums to {sum}, not 1")));
        }
        Ok(Self { grid, spec })
    }

    /// Rescales a non-negative grid to unit sum.
    pub fn normalized(grid: Grid2D, spec: Option<GaussianKernelSpec>) -> Result<Self> {
        let sum = grid.sum();
        if !(sum > 0.0) {
            return Err(Error::contract("kernel mass must be positive"));
        }
        Self::new(grid.scaled(1.0 / sum), spec)
    }

    /// Centered unit impulse of odd `size`.
    pub fn delta(size: usize) -> Result<Self> {
        let grid = crate::signal::make_impulse(size, size, crate::signal::Placement::Center)?;
        Self::new(grid, None)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn spec(&self) -> Option<&GaussianKernelSpec> {
        self.spec.as_ref()
    }

    pub fn size(&self) -> usize {
        self.grid.rows()
    }
}

pub fn sample_spec<R: Rng + ?Sized>(
    rng: &mut R,
    size: usize,
    lo: f64,
    hi: f64,
) -> Result<GaussianKernelSpec> {
    if !(lo > 0.0) || !(lo <= hi) || !hi.is_finite() {
        return Err(Error::contract(format!(
            "sigma range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
        )));
    }
    if size % 2 == 0 {
        return Err(Error::contract(format!("kernel size must be odd, got {size}")));
    }
    let sigma1 = rng.random_range(lo..=hi);
    let sigma2 = rng.random_range(lo..=hi);
    let theta = rng.random_range(0.0..=PI);
    Ok(GaussianKernelSpec {
        sigma1,
        sigma2,
        theta,
        size,
    })
}

/// Evaluates `exp(-v' S^-1 v / 2)` with `S = R(theta) diag(s1^2, s2^2) R(theta)'`
/// on the lattice and normalizes.
pub fn render_gaussian_kernel(spec: &GaussianKernelSpec) -> Result<Kernel> {
    let GaussianKernelSpec {
        sigma1,
        sigma2,
        theta,
        size,
    } = *spec;
    if size == 0 || size % 2 == 0 {
        return Err(Error::contract(format!("kernel size must be odd, got {size}")));
    }
    let (inv1, inv2) = (1.0 / (sigma1 * sigma1), 1.0 / (sigma2 * sigma2));
    if !(sigma1 > 0.0 && sigma2 > 0.0) || !inv1.is_finite() || !inv2.is_finite() {
        return Err(Error::contract(format!(
            "singular covariance for sigmas ({sigma1}, {sigma2})"
        )));
    }
    let (s, c) = theta.sin_cos();
    // Precision matrix R diag(inv1, inv2) R'.
    let a = c * c * inv1 + s * s * inv2;
    let b = c * s * (inv1 - inv2);
    let d = s * s * inv1 + c * c * inv2;
    let center = ((size - 1) / 2) as f64;
    let grid = Grid2D::from_fn(size, size, |i, j| {
        let (x, y) = (i as f64 - center, j as f64 - center);
        (-0.5 * (a * x * x + 2.0 * b * x * y + d * y * y)).exp()
    });
    Kernel::normalized(grid, Some(*spec))
}

/// Multiplies every entry by `1 + u`, `u ~ U[-amplitude, amplitude]`, clips at
/// zero and renormalizes.
pub fn perturb_multiplicative<R: Rng + ?Sized>(
    k: &Kernel,
    rng: &mut R,
    amplitude: f64,
) -> Result<Kernel> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::contract(format!(
            "noise amplitude must be in [0, 1), got {amplitude}"
        )));
    }
    if amplitude == 0.0 {
        return Ok(k.clone());
    }
    let mut grid = k.grid.clone();
    for v in grid.data_mut() {
        let u: f64 = rng.random_range(-amplitude..=amplitude);
        *v = (*v * (1.0 + u)).max(0.0);
    }
    Kernel::normalized(grid, k.spec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RkgDataset {
    pub kernels: Vec<Kernel>,
    pub seed: u64,
    pub noise_amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GalleryConfig {
    pub count: usize,
    pub size: usize,
    pub sigma_range: (f64, f64),
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl GalleryConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            count: DEFAULT_COUNT,
            size: DEFAULT_SIZE,
            sigma_range: DEFAULT_SIGMA_RANGE,
            noise_amplitude: DEFAULT_NOISE,
            seed,
        }
    }
}

/// Draws one kernel: sample, render, perturb.
pub fn draw_kernel<R: Rng + ?Sized>(
    rng: &mut R,
    size: usize,
    sigma_range: (f64, f64),
    noise_amplitude: f64,
) -> Result<Kernel> {
    let spec = sample_spec(rng, size, sigma_range.0, sigma_range.1)?;
    let k = render_gaussian_kernel(&spec)?;
    perturb_multiplicative(&k, rng, noise_amplitude)
}

pub fn generate_rkg(cfg: &GalleryConfig) -> Result<RkgDataset> {
    if cfg.count == 0 {
        return Err(Error::contract("gallery count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let kernels = (0..cfg.count)
        .map(|_| draw_kernel(&mut rng, cfg.size, cfg.sigma_range, cfg.noise_amplitude))
        .collect::<Result<Vec<_>>>()?;
    Ok(RkgDataset {
        kernels,
        seed: cfg.seed,
        noise_amplitude: cfg.noise_amplitude,
    })
}

impl RkgDataset {
    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels.first().map(Kernel::size).unwrap_or(0)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let size = self.kernel_size();
        w.write_all(RKG_MAGIC)?;
        w.write_all(&(self.kernels.len() as u32).to_le_bytes())?;
        w.write_all(&(size as u32).to_le_bytes())?;
        w.write_all(&self.noise_amplitude.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for k in &self.kernels {
            for v in k.grid.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        // Fixed-width spec records: flag byte, then sigma1, sigma2, theta
        // (zeros when absent).
        for k in &self.kernels {
            let (flag, vals) = match k.spec {
                Some(s) => (1u8, [s.sigma1, s.sigma2, s.theta]),
                None => (0u8, [0.0; 3]),
            };
            w.write_all(&[flag])?;
            for v in vals {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "RKG1 magic")?;
        if &magic != RKG_MAGIC {
            return Err(Error::format("bad RKG1 magic"));
        }
        let count = read_u32(&mut r)? as usize;
        let size = read_u32(&mut r)? as usize;
        let noise_amplitude = read_f64(&mut r)?;
        let seed = read_u64(&mut r)?;
        if count == 0 || size == 0 || size % 2 == 0 {
            return Err(Error::format(format!(
                "RKG1 header: count {count}, size {size}"
            )));
        }
        let mut grids = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let mut data = Vec::with_capacity(size * size);
            for _ in 0..size * size {
                data.push(read_f64(&mut r)?);
            }
            grids.push(Grid2D::new(size, size, data).map_err(|e| Error::format(e.to_string()))?);
        }
        let mut kernels = Vec::with_capacity(count);
        for grid in grids {
            let mut flag = [0u8; 1];
            read_exact(&mut r, &mut flag, "spec flag")?;
            let vals = [read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?];
            let spec = match flag[0] {
                0 => None,
                1 => Some(GaussianKernelSpec {
                    sigma1: vals[0],
                    sigma2: vals[1],
                    theta: vals[2],
                    size,
                }),
                f => return Err(Error::format(format!("bad spec flag {f}"))),
            };
            kernels.push(Kernel::new(grid, spec)?);
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra).map_err(|e| Error::format(e.to_string()))? != 0 {
            return Err(Error::format("trailing bytes after RKG1 payload"));
        }
        Ok(Self {
            kernels,
            seed,
            noise_amplitude,
        })
    }
}

pub fn save_rkg(ds: &RkgDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    ds.write_to(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_rkg(path: impl AsRef<Path>) -> Result<RkgDataset> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    RkgDataset::read_from(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{phase, zero_phase_spectrum};

    fn spec(s1: f64, s2: f64, theta: f64) -> GaussianKernelSpec {
        GaussianKernelSpec {
            sigma1: s1,
            sigma2: s2,
            theta,
            size: 11,
        }
    }

    #[test]
    fn degenerate_range_pins_sigmas() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let s = sample_spec(&mut rng, 11, 1.0, 1.0).unwrap();
            assert_eq!((s.sigma1, s.sigma2), (1.0, 1.0));
            assert!((0.0..=PI).contains(&s.theta));
        }
        assert!(sample_spec(&mut rng, 11, 0.0, 1.0).is_err());
        assert!(sample_spec(&mut rng, 11, 2.0, 1.0).is_err());
    }

    #[test]
    fn default_range_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (lo, hi) = DEFAULT_SIGMA_RANGE;
        let (mut min, mut max) = (f64::INFINITY, 0.0f64);
        for _ in 0..10_000 {
            let s = sample_spec(&mut rng, 11, lo, hi).unwrap();
            min = min.min(s.sigma1).min(s.sigma2);
            max = max.max(s.sigma1).max(s.sigma2);
        }
        assert!(min >= 0.175 && max <= 3.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| sample_spec(&mut rng, 11, 0.175, 3.0).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn isotropic_kernel_ignores_theta() {
        let k0 = render_gaussian_kernel(&spec(1.3, 1.3, 0.0)).unwrap();
        for theta in [PI / 4.0, PI / 2.0] {
            let k = render_gaussian_kernel(&spec(1.3, 1.3, theta)).unwrap();
            assert!(k.grid().max_abs_diff(k0.grid()).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn rendered_kernel_is_unit_sum_and_point_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let s = sample_spec(&mut rng, 11, 0.175, 3.0).unwrap();
            let k = render_gaussian_kernel(&s).unwrap();
            let g = k.grid();
            assert!((g.sum() - 1.0).abs() <= 1e-12);
            assert!(g.data().iter().all(|&v| v >= 0.0));
            assert!(g.max_abs_diff(&g.flipped()).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn narrowest_kernel_is_near_delta() {
        let k = render_gaussian_kernel(&spec(0.175, 0.175, 0.3)).unwrap();
        // Neighbors carry exp(-1 / (2 * 0.175^2)) ~ 8e-8 each before normalization.
        let neighbor = (-0.5f64 / (0.175 * 0.175)).exp();
        assert!(k.grid()[(5, 5)] >= 0.99);
        assert!((k.grid()[(5, 6)] - neighbor / (1.0 + 4.0 * neighbor)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_kernel_shifted_to_origin_is_zero_phase() {
        // Narrow enough that the 11x11 window truncates nothing visible, so the
        // spectrum stays positive.
        let k = render_gaussian_kernel(&spec(1.0, 0.7, 1.1)).unwrap();
        let ph = phase(&zero_phase_spectrum(k.grid(), 21, 21).unwrap());
        let worst = ph.data().iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-8, "max |phase| = {worst}");

        // Wide kernels get truncated: the spectrum is still real, but its
        // sidelobes go negative.
        let k = render_gaussian_kernel(&spec(2.1, 0.7, 1.1)).unwrap();
        let f = zero_phase_spectrum(k.grid(), 21, 21).unwrap();
        assert!(f.data().iter().all(|z| z.im.abs() <= 1e-12));
        assert!(f.data().iter().any(|z| z.re < 0.0));
    }

    #[test]
    fn perturbation_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = render_gaussian_kernel(&spec(1.0, 2.0, 0.5)).unwrap();
        assert_eq!(perturb_multiplicative(&k, &mut rng, 0.0).unwrap(), k);
        assert!(perturb_multiplicative(&k, &mut rng, 1.0).is_err());

        let mut replay = rng.clone();
        let p = perturb_multiplicative(&k, &mut rng, 0.25).unwrap();
        assert!((p.grid().sum() - 1.0).abs() <= 1e-9);
        // Replaying the draws gives the raw factors; the result must be the
        // original scaled entrywise by (1 + u) / s with |u| <= 0.25.
        let factors: Vec<f64> = (0..121).map(|_| 1.0 + replay.random_range(-0.25..=0.25)).collect();
        let s: f64 = k.grid().data().iter().zip(&factors).map(|(v, f)| v * f).sum();
        for ((pv, kv), f) in p.grid().data().iter().zip(k.grid().data()).zip(&factors) {
            assert!((0.75..=1.25).contains(f));
            assert!((pv - kv * f / s).abs() <= 1e-15);
            let rel = pv * s / kv;
            assert!((0.75 - 1e-12..=1.25 + 1e-12).contains(&rel));
        }
    }

    #[test]
    fn default_gallery_shape() {
        let ds = generate_rkg(&GalleryConfig::with_seed(11)).unwrap();
        assert_eq!(ds.len(), 2400);
        for k in &ds.kernels {
            assert_eq!(k.grid().dims(), (11, 11));
            assert!((k.grid().sum() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn single_noiseless_kernel_is_exact_gaussian() {
        let cfg = GalleryConfig {
            count: 1,
            noise_amplitude: 0.0,
            ..GalleryConfig::with_seed(4)
        };
        let ds = generate_rkg(&cfg).unwrap();
        let k = &ds.kernels[0];
        let again = render_gaussian_kernel(k.spec().unwrap()).unwrap();
        assert_eq!(k, &again);
    }

    #[test]
    fn serialization_round_trip_and_determinism() {
        let cfg = GalleryConfig {
            count: 7,
            ..GalleryConfig::with_seed(9)
        };
        let mut a = Vec::new();
        generate_rkg(&cfg).unwrap().write_to(&mut a).unwrap();
        let mut b = Vec::new();
        generate_rkg(&cfg).unwrap().write_to(&mut b).unwrap();
        assert_eq!(a, b);
        let back = RkgDataset::read_from(a.as_slice()).unwrap();
        assert_eq!(back, generate_rkg(&cfg).unwrap());
    }

    #[test]
    fn load_rejects_bad_files() {
        let cfg = GalleryConfig {
            count: 2,
            ..GalleryConfig::with_seed(1)
        };
        let mut buf = Vec::new();
        generate_rkg(&cfg).unwrap().write_to(&mut buf).unwrap();

        let mut bad = buf.clone();
        bad[1] = b'X';
        assert!(matches!(RkgDataset::read_from(bad.as_slice()), Err(Error::Format(_))));

        assert!(matches!(
            RkgDataset::read_from(&buf[..buf.len() - 5]),
            Err(Error::Format(_))
        ));

        // Inflate the first kernel's center so it no longer sums to one.
        let mut bad = buf.clone();
        let header = 4 + 4 + 4 + 8 + 8;
        let off = header + 60 * 8;
        let v = f64::from_le_bytes(bad[off..off + 8].try_into().unwrap()) + 0.5;
        bad[off..off + 8].copy_from_slice(&v.to_le_bytes());
        assert!(matches!(
            RkgDataset::read_from(bad.as_slice()),
            Err(Error::Invariant(_))
        ));
    }
}
