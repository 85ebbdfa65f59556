//! End-to-end training runs: determinism, loss reduction and restoration with
//! the trained kernel.

mod common;

use std::sync::OnceLock;

use nsd::dil::{train, TrainConfig, TrainOutcome};
use nsd::eval::{blur_image, procedural_scene, psnr, ssim};
use nsd::gallery::{generate_rkg, render_gaussian_kernel, GalleryConfig, GaussianKernelSpec};
use nsd::image_io::{ColorSpace, Image};
use nsd::lcnn::{extract_drk, init_model, save_model, InitScheme, Topology};
use nsd::restore::{bicubic_upsample, deblur_with_drk, super_resolve, Restorer};
use nsd::signal::PadMode;
use nsd::Grid2D;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn default_run() -> &'static TrainOutcome {
    static RUN: OnceLock<TrainOutcome> = OnceLock::new();
    RUN.get_or_init(|| {
        let rkg = generate_rkg(&GalleryConfig::with_seed(2024)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let init = init_model(&mut rng, &Topology::default(), InitScheme::default()).unwrap();
        train(init, &rkg, &TrainConfig::default()).unwrap()
    })
}

#[test]
fn equal_seeds_give_bit_equal_checkpoints() {
    let rkg = generate_rkg(&GalleryConfig {
        count: 64,
        ..GalleryConfig::with_seed(3)
    })
    .unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 16,
        seed: 9,
        ..TrainConfig::default()
    };
    let topo = Topology::uniform(3, 4).unwrap();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let init = init_model(&mut rng, &topo, InitScheme::default()).unwrap();
        train(init, &rkg, &cfg).unwrap()
    };
    let a = run();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(run);
    assert_eq!(a.history, b.history);

    let dir = tempfile::tempdir().unwrap();
    save_model(&a.model, dir.path().join("a.lcnn")).unwrap();
    save_model(&b.model, dir.path().join("b.lcnn")).unwrap();
    let bytes = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(bytes("a.lcnn"), bytes("b.lcnn"));
}

#[test]
fn default_training_reduces_total_loss_tenfold() {
    let h = &default_run().history;
    let (first, last) = (h.first().unwrap().total, h.last().unwrap().total);
    assert!(
        last * 10.0 <= first,
        "first epoch {first:.4}, final epoch {last:.4}, ratio {:.3}",
        first / last
    );
}

#[test]
fn trained_kernel_deblurs_mid_range_blur() {
    let drk = extract_drk(&default_run().model);
    let sharp = procedural_scene(77, 96, 96, ColorSpace::Rgb);
    let k = render_gaussian_kernel(&GaussianKernelSpec {
        sigma1: 1.4,
        sigma2: 0.9,
        theta: 0.6,
        size: 11,
    })
    .unwrap();
    let blurred = blur_image(&sharp, &k).unwrap();
    let restored = deblur_with_drk(&blurred, &drk, PadMode::Reflect).unwrap();
    let before = psnr(&blurred, &sharp, 1.0).unwrap();
    let after = psnr(&restored, &sharp, 1.0).unwrap();
    assert!(after > before, "blurred {before:.3} dB, restored {after:.3} dB");
}

/// Gaussian anti-aliasing (sigma = scale / 2) followed by decimation.
fn downsample(img: &Image, scale: usize) -> Image {
    let s = scale as f64 / 2.0;
    let k = render_gaussian_kernel(&GaussianKernelSpec {
        sigma1: s,
        sigma2: s,
        theta: 0.0,
        size: 4 * scale + 1,
    })
    .unwrap();
    blur_image(img, &k)
        .unwrap()
        .map_planes(|p| Ok(Grid2D::from_fn(p.rows() / scale, p.cols() / scale, |r, c| p[(scale * r, scale * c)])))
        .unwrap()
}

#[test]
fn trained_kernel_super_resolution_beats_bicubic_ssim() {
    let drk = extract_drk(&default_run().model);
    let sharp = procedural_scene(78, 128, 128, ColorSpace::Rgb);
    for scale in [2, 4] {
        let low = downsample(&sharp, scale);
        let plain = bicubic_upsample(&low, scale as f64).unwrap();
        let restored = super_resolve(&low, scale as f64, Restorer::Kernel(&drk), PadMode::Reflect).unwrap();
        assert_eq!(restored.dims(), sharp.dims());
        let crop = |i: &Image| i.crop_border(8).unwrap();
        let s_plain = ssim(&crop(&plain), &crop(&sharp)).unwrap();
        let s_sr = ssim(&crop(&restored), &crop(&sharp)).unwrap();
        assert!(s_sr >= s_plain, "x{scale}: bicubic {s_plain:.4}, restored {s_sr:.4}");
    }
}
