//! Quantitative harness: simulated blur pairs, PSNR/SSIM, per-kernel-size
//! report tables, the regularizer ablation and the blur-level sweep.
//!
//! Metrics are computed on the interior after cropping [`METRIC_BORDER`]
//! pixels from every side. Every table is reduced in a fixed order, so CSV
//! output is byte-identical across thread counts. Wall-clock runtime is kept
//! in the report but never written to CSV.

mod dataset;
mod metrics;
mod scenes;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

pub use dataset::{
    blur_image, list_images, load_sharp_dir, pair_kernel, parse_manifest, simulate_blur_dataset,
    simulate_pairs, write_manifest, BlurPair, ManifestEntry, SimulationConfig,
    BLUR_SANITY_BAND_DB, EVAL_KERNEL_SIZES, MANIFEST_HEADER,
};
pub use metrics::{mse, psnr, ssim, PSNR_CAP_DB, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
pub use scenes::procedural_scene;

use crate::dil::{evaluate_loss, train, TrainConfig};
use crate::error::{Error, Result};
use crate::gallery::RkgDataset;
use crate::image_io::Image;
use crate::lcnn::{extract_drk, Drk, LcnnModel};
use crate::restore::{deblur_with_drk, deblur_with_model, wiener_deconvolve};
use crate::signal::PadMode;

/// Half the largest evaluation kernel, rounded up.
pub const METRIC_BORDER: usize = 13;

pub const DEFAULT_WIENER_NSR: f64 = 1e-3;

/// Restoration method under evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Method<'a> {
    /// Output is the blurred input; gives the baseline row.
    Identity,
    Lcnn(&'a LcnnModel),
    Drk(&'a Drk),
    /// Oracle mode: each pair's true kernel is used.
    Wiener { nsr: f64 },
}

impl Method<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Identity => "identity",
            Method::Lcnn(_) => "lcnn",
            Method::Drk(_) => "drk",
            Method::Wiener { .. } => "wiener",
        }
    }

    pub fn restore(&self, pair: &BlurPair) -> Result<Image> {
        match *self {
            Method::Identity => Ok(pair.blurred.clone()),
            Method::Lcnn(m) => deblur_with_model(&pair.blurred, m, PadMode::Reflect),
            Method::Drk(d) => deblur_with_drk(&pair.blurred, d, PadMode::Reflect),
            Method::Wiener { nsr } => wiener_deconvolve(&pair.blurred, &pair.kernel, nsr),
        }
    }
}

/// PSNR and SSIM on the border-cropped interior.
pub fn interior_scores(restored: &Image, sharp: &Image) -> Result<(f64, f64)> {
    let a = restored.crop_border(METRIC_BORDER)?;
    let b = sharp.crop_border(METRIC_BORDER)?;
    Ok((psnr(&a, &b, 1.0)?, ssim(&a, &b)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScore {
    pub kernel_size: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeRow {
    pub kernel_size: usize,
    pub count: usize,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub psnr_mean: f64,
    /// Spread of the per-size means.
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub pairs: Vec<PairScore>,
    pub rows: Vec<SizeRow>,
    pub aggregate: AggregateRow,
    pub seconds_per_image: f64,
}

/// Population mean and standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub const REPORT_CSV_HEADER: &str = "method,kernel_size,count,psnr_mean,psnr_std,ssim_mean,ssim_std";

impl EvalReport {
    fn from_scores(method: &str, pairs: Vec<PairScore>, seconds_per_image: f64) -> Self {
        let mut sizes: Vec<usize> = pairs.iter().map(|p| p.kernel_size).collect();
        sizes.sort_unstable();
        sizes.dedup();
        let rows: Vec<SizeRow> = sizes
            .iter()
            .map(|&s| {
                let group: Vec<&PairScore> = pairs.iter().filter(|p| p.kernel_size == s).collect();
                let (pm, ps) = mean_std(&group.iter().map(|p| p.psnr).collect::<Vec<_>>());
                let (sm, ss) = mean_std(&group.iter().map(|p| p.ssim).collect::<Vec<_>>());
                SizeRow {
                    kernel_size: s,
                    count: group.len(),
                    psnr_mean: pm,
                    psnr_std: ps,
                    ssim_mean: sm,
                    ssim_std: ss,
                }
            })
            .collect();
        let (pm, ps) = mean_std(&rows.iter().map(|r| r.psnr_mean).collect::<Vec<_>>());
        let (sm, ss) = mean_std(&rows.iter().map(|r| r.ssim_mean).collect::<Vec<_>>());
        Self {
            method: method.to_string(),
            pairs,
            rows,
            aggregate: AggregateRow {
                psnr_mean: pm,
                psnr_std: ps,
                ssim_mean: sm,
                ssim_std: ss,
            },
            seconds_per_image,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(w, "{REPORT_CSV_HEADER}")?;
        }
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{:.6},{:.6},{:.6},{:.6}",
                self.method, r.kernel_size, r.count, r.psnr_mean, r.psnr_std, r.ssim_mean, r.ssim_std
            )?;
        }
        let a = &self.aggregate;
        writeln!(
            w,
            "{},all,{},{:.6},{:.6},{:.6},{:.6}",
            self.method,
            self.pairs.len(),
            a.psnr_mean,
            a.psnr_std,
            a.ssim_mean,
            a.ssim_std
        )
    }
}

pub fn evaluate(method: Method<'_>, pairs: &[BlurPair]) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::Input("nothing to evaluate".into()));
    }
    if let Method::Wiener { nsr } = method {
        if !(nsr >= 0.0) {
            return Err(Error::contract(format!("nsr must be >= 0, got {nsr}")));
        }
    }
    let start = Instant::now();
    let scores = pairs
        .par_iter()
        .map(|p| {
            let restored = method.restore(p)?;
            let (db, s) = interior_scores(&restored, &p.sharp)?;
            Ok(PairScore {
                kernel_size: p.kernel_size,
                psnr: db,
                ssim: s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let per_image = start.elapsed().as_secs_f64() / pairs.len() as f64;
    Ok(EvalReport::from_scores(method.label(), scores, per_image))
}

/// One trained configuration and its DRK scores.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub label: String,
    pub config: TrainConfig,
    pub final_loss: f64,
    pub psnr: f64,
    pub ssim: f64,
}

pub const STUDY_CSV_HEADER: &str =
    "config,lambda1,lambda2,lambda3,learning_rate,identity_mode,final_total_loss,psnr,ssim";

/// Trains every configuration from the same initial model and scores the
/// extracted kernel on `pairs`. Rows keep the input order.
pub fn run_study(
    rkg: &RkgDataset,
    init: &LcnnModel,
    pairs: &[BlurPair],
    configs: &[(String, TrainConfig)],
) -> Result<Vec<StudyRow>> {
    configs
        .par_iter()
        .map(|(label, cfg)| {
            log::info!("study: training `{label}`");
            let out = train(init.clone(), rkg, cfg)?;
            let final_loss = evaluate_loss(&out.model, &rkg.kernels, cfg)?.total;
            let drk = extract_drk(&out.model);
            let report = evaluate(Method::Drk(&drk), pairs)?;
            Ok(StudyRow {
                label: label.clone(),
                config: cfg.clone(),
                final_loss,
                psnr: report.aggregate.psnr_mean,
                ssim: report.aggregate.ssim_mean,
            })
        })
        .collect()
}

/// Regularizer subsets in table order; the full set comes last.
pub const ABLATION_CONFIGS: [(&str, [bool; 3]); 7] = [
    ("identity", [false, false, false]),
    ("+R1", [true, false, false]),
    ("+R2", [false, true, false]),
    ("+R3", [false, false, true]),
    ("+R2+R3", [false, true, true]),
    ("+R1+R2", [true, true, false]),
    ("+R1+R2+R3", [true, true, true]),
];

pub fn ablation_configs(base: &TrainConfig) -> Vec<(String, TrainConfig)> {
    ABLATION_CONFIGS
        .iter()
        .map(|(label, [r1, r2, r3])| {
            let on = |flag: bool, v: f64| if flag { v } else { 0.0 };
            let cfg = TrainConfig {
                lambda1: on(*r1, base.lambda1),
                lambda2: on(*r2, base.lambda2),
                lambda3: on(*r3, base.lambda3),
                ..base.clone()
            };
            (label.to_string(), cfg)
        })
        .collect()
}

pub fn ablation_grid(
    rkg: &RkgDataset,
    base: &TrainConfig,
    init: &LcnnModel,
    pairs: &[BlurPair],
) -> Result<Vec<StudyRow>> {
    run_study(rkg, init, pairs, &ablation_configs(base))
}

/// Full-regularizer runs at each learning rate.
pub fn learning_rate_configs(base: &TrainConfig, rates: &[f64]) -> Vec<(String, TrainConfig)> {
    rates
        .iter()
        .map(|&lr| {
            let cfg = TrainConfig {
                learning_rate: lr,
                ..base.clone()
            };
            (format!("lr={lr:e}"), cfg)
        })
        .collect()
}

/// Index of the row with the highest PSNR; ties keep the earlier row.
pub fn best_row(rows: &[StudyRow]) -> Option<usize> {
    (0..rows.len()).reduce(|best, i| if rows[i].psnr > rows[best].psnr { i } else { best })
}

pub fn write_study_csv<W: Write>(rows: &[StudyRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{STUDY_CSV_HEADER}")?;
    for r in rows {
        let c = &r.config;
        writeln!(
            w,
            "{},{},{},{},{:e},{},{:.10e},{:.6},{:.6}",
            r.label,
            c.lambda1,
            c.lambda2,
            c.lambda3,
            c.learning_rate,
            c.identity_mode,
            r.final_loss,
            r.psnr,
            r.ssim
        )?;
    }
    Ok(())
}

pub const SWEEP_BANDS: [(f64, f64); 3] = [(0.175, 3.0), (3.0, 6.0), (6.0, 9.0)];

/// Approximate PSNR loss expected for the widest band, printed as a footer.
pub const REFERENCE_WIDE_BAND_DROP_PCT: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub band: (f64, f64),
    pub psnr: f64,
    pub ssim: f64,
    /// Relative drop against the first band, in percent.
    pub psnr_drop_pct: f64,
    pub ssim_drop_pct: f64,
}

/// Re-blurs the same images with the same seed for every band; only the
/// sigma range changes.
pub fn robustness_sweep(
    method: Method<'_>,
    images: &[(PathBuf, Image)],
    bands: &[(f64, f64)],
    base: &SimulationConfig,
) -> Result<Vec<SweepRow>> {
    if bands.is_empty() {
        return Err(Error::contract("sweep needs at least one band"));
    }
    let mut rows: Vec<SweepRow> = Vec::with_capacity(bands.len());
    for &band in bands {
        let cfg = SimulationConfig {
            sigma_range: band,
            ..base.clone()
        };
        let pairs = simulate_pairs(images, &cfg)?;
        let report = evaluate(method, &pairs)?;
        let (psnr, ssim) = (report.aggregate.psnr_mean, report.aggregate.ssim_mean);
        let (p0, s0) = rows.first().map_or((psnr, ssim), |r| (r.psnr, r.ssim));
        rows.push(SweepRow {
            band,
            psnr,
            ssim,
            psnr_drop_pct: 100.0 * (p0 - psnr) / p0,
            ssim_drop_pct: 100.0 * (s0 - ssim) / s0,
        });
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "sigma_lo,sigma_hi,psnr,ssim,psnr_drop_pct,ssim_drop_pct";

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.4},{:.4}",
            r.band.0, r.band.1, r.psnr, r.ssim, r.psnr_drop_pct, r.ssim_drop_pct
        )?;
    }
    writeln!(
        w,
        "# reference: about {REFERENCE_WIDE_BAND_DROP_PCT}% psnr drop for sigma in [6, 9]"
    )
}
