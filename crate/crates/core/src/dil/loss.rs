//! Kernel-space identity loss and its spectral regularizers, with analytic
//! gradients with respect to the restoration kernel.

use rustfft::num_complex::Complex64;

use super::{IdentityMode, LossBreakdown, TrainConfig};
use crate::error::{Error, Result};
use crate::gallery::Kernel;
use crate::grid::{ComplexGrid2D, Grid2D};
use crate::lcnn::{Drk, LcnnModel};
use crate::signal::{conv2d_full, make_impulse, principal_angle, twiddles, zero_phase_spectrum, Placement};

fn check_spectrum_dims(k: &Grid2D, drk: &Grid2D, cfg: &TrainConfig) -> Result<()> {
    let (p, q) = cfg.spectrum_dims;
    let need_r = k.rows() + drk.rows() - 1;
    let need_c = k.cols() + drk.cols() - 1;
    if p < need_r || q < need_c || p % 2 == 0 || q % 2 == 0 {
        return Err(Error::contract(format!(
            "spectrum dims {p}x{q} must be odd and at least {need_r}x{need_c}"
        )));
    }
    Ok(())
}

fn check_odd(g: &Grid2D, what: &str) -> Result<()> {
    if g.rows() % 2 == 0 || g.cols() % 2 == 0 {
        return Err(Error::contract(format!(
            "{what} must have odd dims, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    Ok(())
}

/// Residual `K * D - delta` for the chosen identity reading.
fn identity_residual(k: &Grid2D, drk: &Grid2D, mode: IdentityMode) -> Result<Grid2D> {
    check_odd(k, "kernel")?;
    check_odd(drk, "restoration kernel")?;
    let full = conv2d_full(k, drk)?;
    let mut res = match mode {
        IdentityMode::Full => full,
        IdentityMode::Same => {
            let (hr, hc) = (drk.rows() / 2, drk.cols() / 2);
            full.crop(hr, hc, k.rows(), k.cols())?
        }
    };
    let (r, c) = res.dims();
    res[(r / 2, c / 2)] -= 1.0;
    Ok(res)
}

/// `|| K * D - delta ||^2` with a centered delta of the full-convolution size.
pub fn identity_loss(k: &Kernel, drk: &Drk, cfg: &TrainConfig) -> Result<f64> {
    Ok(identity_residual(k.grid(), drk.grid(), cfg.identity_mode)?.sum_of_squares())
}

/// `|1 - sum D|`.
pub fn r1_conv_area(drk: &Drk) -> f64 {
    (1.0 - drk.grid().sum()).abs()
}

fn spectral_product(k: &Grid2D, drk: &Grid2D, cfg: &TrainConfig) -> Result<Vec<Complex64>> {
    check_spectrum_dims(k, drk, cfg)?;
    let (p, q) = cfg.spectrum_dims;
    let kh = zero_phase_spectrum(k, p, q)?;
    let dh = zero_phase_spectrum(drk, p, q)?;
    Ok(kh.data().iter().zip(dh.data()).map(|(a, b)| a * b).collect())
}

/// Mean absolute phase of `F(K) F(D)` over entries whose modulus clears the floor.
pub fn r2_zero_phase(k: &Kernel, drk: &Drk, cfg: &TrainConfig) -> Result<f64> {
    let z = spectral_product(k.grid(), drk.grid(), cfg)?;
    r2_from_product(&z, cfg.epsilon_spec)
}

fn r2_from_product(z: &[Complex64], floor: f64) -> Result<f64> {
    let (sum, n) = z
        .iter()
        .filter(|z| z.norm() >= floor)
        .fold((0.0, 0usize), |(s, n), z| (s + principal_angle(*z).abs(), n + 1));
    if n == 0 {
        return Err(Error::DegenerateSpectrum { floor });
    }
    Ok(sum / n as f64)
}

/// Mean of `|1 - |F(K)| |F(D)||` over the spectrum grid.
pub fn r3_unit_mag(k: &Kernel, drk: &Drk, cfg: &TrainConfig) -> Result<f64> {
    let z = spectral_product(k.grid(), drk.grid(), cfg)?;
    Ok(z.iter().map(|z| (1.0 - z.norm()).abs()).sum::<f64>() / z.len() as f64)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A kernel with its spectrum cached for repeated loss evaluations.
#[derive(Debug, Clone)]
pub struct PreparedKernel {
    grid: Grid2D,
    spectrum: ComplexGrid2D,
}

impl PreparedKernel {
    pub fn new(k: &Kernel, cfg: &TrainConfig) -> Result<Self> {
        check_odd(k.grid(), "kernel")?;
        let (p, q) = cfg.spectrum_dims;
        Ok(Self {
            grid: k.grid().clone(),
            spectrum: zero_phase_spectrum(k.grid(), p, q)?,
        })
    }

    /// Loss components and the gradient of the weighted total with respect to
    /// every entry of `drk`.
    pub fn loss_and_grad(&self, drk: &Grid2D, cfg: &TrainConfig) -> Result<(LossBreakdown, Grid2D)> {
        check_spectrum_dims(&self.grid, drk, cfg)?;
        let (p, q) = cfg.spectrum_dims;
        let (dr, dc) = drk.dims();

        // Identity term: d/dD[u, v] = 2 sum_mn E[m + u', n + v'] K[m, n].
        let res = identity_residual(&self.grid, drk, cfg.identity_mode)?;
        let identity = res.sum_of_squares();
        let (off_r, off_c) = match cfg.identity_mode {
            IdentityMode::Full => (0isize, 0isize),
            IdentityMode::Same => ((dr / 2) as isize, (dc / 2) as isize),
        };
        let k = &self.grid;
        let mut grad = Grid2D::from_fn(dr, dc, |u, v| {
            let mut s = 0.0;
            for m in 0..k.rows() {
                let i = (m + u) as isize - off_r;
                if i < 0 || i as usize >= res.rows() {
                    continue;
                }
                for n in 0..k.cols() {
                    let j = (n + v) as isize - off_c;
                    if j < 0 || j as usize >= res.cols() {
                        continue;
                    }
                    s += res[(i as usize, j as usize)] * k[(m, n)];
                }
            }
            2.0 * s
        });

        let total_d = drk.sum();
        let r1 = (1.0 - total_d).abs();
        let g1 = -cfg.lambda1 * sign(1.0 - total_d);

        let dh = zero_phase_spectrum(drk, p, q)?;
        let z: Vec<Complex64> = self
            .spectrum
            .data()
            .iter()
            .zip(dh.data())
            .map(|(a, b)| a * b)
            .collect();
        let eps = cfg.epsilon_spec;
        let r2 = r2_from_product(&z, eps)?;
        let included = z.iter().filter(|z| z.norm() >= eps).count() as f64;
        let r3 = z.iter().map(|z| (1.0 - z.norm()).abs()).sum::<f64>() / z.len() as f64;

        // Gradient with respect to (re z, im z), packed as a complex number.
        let n_all = z.len() as f64;
        let gz: Vec<Complex64> = z
            .iter()
            .map(|&z| {
                let modulus = z.norm();
                let mut g = Complex64::new(0.0, 0.0);
                if cfg.lambda2 != 0.0 && modulus >= eps {
                    let w = cfg.lambda2 * sign(principal_angle(z)) / (included * modulus * modulus);
                    g += Complex64::new(-z.im, z.re) * w;
                }
                if cfg.lambda3 != 0.0 {
                    let w = -cfg.lambda3 * sign(1.0 - modulus) / (n_all * modulus.max(eps));
                    g += z * w;
                }
                g
            })
            .collect();
        // z = Khat * Dhat(D) with Dhat linear in D, so dL/dD = Re(sum conj(gz) Khat B).
        let h: Vec<Complex64> = gz
            .iter()
            .zip(self.spectrum.data())
            .map(|(g, kh)| g.conj() * kh)
            .collect();
        let spectral = spectral_adjoint(&h, p, q, dr, dc);
        for (g, s) in grad.data_mut().iter_mut().zip(spectral.data()) {
            *g += s + g1;
        }

        Ok((LossBreakdown::new(identity, r1, r2, r3, cfg), grad))
    }
}

/// `Re sum_pq H(p, q) exp(-j 2 pi (p s_u / P + q s_v / Q))` for the shifted
/// positions `s_u = (u - c) mod P` of a centered `rows x cols` kernel.
fn spectral_adjoint(h: &[Complex64], p: usize, q: usize, rows: usize, cols: usize) -> Grid2D {
    let wp = twiddles(p);
    let wq = twiddles(q);
    let pos_r: Vec<usize> = (0..rows).map(|u| (u + p - rows / 2) % p).collect();
    let pos_c: Vec<usize> = (0..cols).map(|v| (v + q - cols / 2) % q).collect();
    let mut partial = vec![Complex64::new(0.0, 0.0); p * cols];
    for pp in 0..p {
        for (v, &sv) in pos_c.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for qq in 0..q {
                acc += h[pp * q + qq] * wq[(qq * sv) % q];
            }
            partial[pp * cols + v] = acc;
        }
    }
    Grid2D::from_fn(rows, cols, |u, v| {
        let su = pos_r[u];
        let mut acc = Complex64::new(0.0, 0.0);
        for pp in 0..p {
            acc += partial[pp * cols + v] * wp[(pp * su) % p];
        }
        acc.re
    })
}

/// Loss of a model on one kernel, through its collapsed kernel.
pub fn total_loss(model: &LcnnModel, k: &Kernel, cfg: &TrainConfig) -> Result<LossBreakdown> {
    let drk = crate::lcnn::compose_drk(model);
    loss_for_drk(k, &drk, cfg)
}

pub fn loss_for_drk(k: &Kernel, drk: &Drk, cfg: &TrainConfig) -> Result<LossBreakdown> {
    let identity = identity_loss(k, drk, cfg)?;
    let r1 = r1_conv_area(drk);
    let r2 = r2_zero_phase(k, drk, cfg)?;
    let r3 = r3_unit_mag(k, drk, cfg)?;
    Ok(LossBreakdown::new(identity, r1, r2, r3, cfg))
}

/// Centered impulse of the full-convolution size, the identity target.
pub fn identity_target(k: &Kernel, drk: &Drk) -> Grid2D {
    let r = k.grid().rows() + drk.grid().rows() - 1;
    let c = k.grid().cols() + drk.grid().cols() - 1;
    make_impulse(r, c, Placement::Center).expect("odd + odd - 1 is odd")
}
