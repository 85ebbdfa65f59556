//! Independent loss and gradient oracle: naive tap composition, direct
//! convolution and a direct DFT.

use std::f64::consts::PI;

use nsd::dil::{gradients, TrainConfig};
use nsd::gallery::Kernel;
use nsd::lcnn::LcnnModel;
use nsd::Grid2D;

pub type Plane = Vec<Vec<f64>>;

pub fn full_conv(a: &Plane, b: &Plane) -> Plane {
    let (ar, ac, br, bc) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; ac + bc - 1]; ar + br - 1];
    for i in 0..ar {
        for j in 0..ac {
            for m in 0..br {
                for n in 0..bc {
                    out[i + m][j + n] += a[i][j] * b[m][n];
                }
            }
        }
    }
    out
}

/// Collapsed kernel of `taps`, composed channel by channel.
pub fn oracle_drk(channels: &[usize], taps: &[Vec<f64>]) -> Plane {
    let mut responses: Vec<Plane> = vec![vec![vec![1.0]]];
    for (l, w) in taps.iter().enumerate() {
        let (cin, cout) = (channels[l], channels[l + 1]);
        let mut next = Vec::with_capacity(cout);
        for o in 0..cout {
            let mut acc: Option<Plane> = None;
            for (i, h) in responses.iter().enumerate().take(cin) {
                let base = (o * cin + i) * 9;
                let f: Plane = (0..3).map(|r| w[base + 3 * r..base + 3 * r + 3].to_vec()).collect();
                let term = full_conv(h, &f);
                acc = Some(match acc {
                    None => term,
                    Some(mut a) => {
                        for (ra, rt) in a.iter_mut().zip(&term) {
                            for (x, y) in ra.iter_mut().zip(rt) {
                                *x += y;
                            }
                        }
                        a
                    }
                });
            }
            next.push(acc.unwrap());
        }
        responses = next;
    }
    responses.pop().unwrap()
}

/// Spectrum of `g` with its center tap placed at the origin of a `p x q` grid.
pub fn centered_dft(g: &Plane, p: usize, q: usize) -> Vec<(f64, f64)> {
    let (cr, cc) = ((g.len() / 2) as f64, (g[0].len() / 2) as f64);
    let mut out = Vec::with_capacity(p * q);
    for u in 0..p {
        for v in 0..q {
            let (mut re, mut im) = (0.0, 0.0);
            for (m, row) in g.iter().enumerate() {
                for (n, &x) in row.iter().enumerate() {
                    let a = -2.0 * PI * (u as f64 * (m as f64 - cr) / p as f64 + v as f64 * (n as f64 - cc) / q as f64);
                    re += x * a.cos();
                    im += x * a.sin();
                }
            }
            out.push((re, im));
        }
    }
    out
}

pub fn plane(g: &Grid2D) -> Plane {
    (0..g.rows()).map(|r| g.data()[r * g.cols()..(r + 1) * g.cols()].to_vec()).collect()
}

pub struct OracleKernel {
    grid: Plane,
    spectrum: Vec<(f64, f64)>,
}

impl OracleKernel {
    pub fn new(k: &Kernel, cfg: &TrainConfig) -> Self {
        let grid = plane(k.grid());
        let spectrum = centered_dft(&grid, cfg.spectrum_dims.0, cfg.spectrum_dims.1);
        Self { grid, spectrum }
    }

    pub fn loss(&self, d: &Plane, cfg: &TrainConfig) -> f64 {
        let mut e = full_conv(&self.grid, d);
        let (r, c) = (e.len(), e[0].len());
        e[r / 2][c / 2] -= 1.0;
        let identity: f64 = e.iter().flatten().map(|x| x * x).sum();
        let r1 = (1.0 - d.iter().flatten().sum::<f64>()).abs();
        let ds = centered_dft(d, cfg.spectrum_dims.0, cfg.spectrum_dims.1);
        let (mut phase, mut kept, mut mag) = (0.0, 0usize, 0.0);
        for (&(ka, kb), &(da, db)) in self.spectrum.iter().zip(&ds) {
            let (zr, zi) = (ka * da - kb * db, ka * db + kb * da);
            let norm = zr.hypot(zi);
            if norm >= cfg.epsilon_spec {
                phase += zi.atan2(zr).abs();
                kept += 1;
            }
            mag += (1.0 - norm).abs();
        }
        let r2 = phase / kept as f64;
        let r3 = mag / ds.len() as f64;
        identity + cfg.lambda1 * r1 + cfg.lambda2 * r2 + cfg.lambda3 * r3
    }
}

pub fn model_taps(m: &LcnnModel) -> Vec<Vec<f64>> {
    m.layers().iter().map(|l| l.taps().to_vec()).collect()
}

pub fn oracle_batch_loss(channels: &[usize], taps: &[Vec<f64>], ks: &[OracleKernel], cfg: &TrainConfig) -> f64 {
    let d = oracle_drk(channels, taps);
    ks.iter().map(|k| k.loss(&d, cfg)).sum::<f64>() / ks.len() as f64
}

/// Worst relative error between analytic and central-difference gradients.
pub fn worst_gradient_error(model: &LcnnModel, ks: &[Kernel], cfg: &TrainConfig, floor: f64) -> f64 {
    let analytic = gradients(model, ks, cfg).unwrap();
    let oracle: Vec<OracleKernel> = ks.iter().map(|k| OracleKernel::new(k, cfg)).collect();
    let channels = model.topology().channels().to_vec();
    let base = model_taps(model);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for l in 0..base.len() {
        for t in 0..base[l].len() {
            let mut plus = base.clone();
            plus[l][t] += h;
            let mut minus = base.clone();
            minus[l][t] -= h;
            let fd = (oracle_batch_loss(&channels, &plus, &oracle, cfg)
                - oracle_batch_loss(&channels, &minus, &oracle, cfg))
                / (2.0 * h);
            let a = analytic[l][t];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    worst
}
