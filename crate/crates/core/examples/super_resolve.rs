//! Bicubic upsampling versus upsampling followed by the restoration kernel,
//! at x2 and x4, on an anti-aliased and decimated copy of a sharp image.
//!
//! `cargo run --release --example super_resolve -- [image]`

use nsd::dil::{train, TrainConfig};
use nsd::eval::{blur_image, procedural_scene, psnr, ssim};
use nsd::gallery::{generate_rkg, render_gaussian_kernel, GalleryConfig, GaussianKernelSpec};
use nsd::image_io::{load_image, ColorSpace, Image};
use nsd::lcnn::{extract_drk, init_model, InitScheme, Topology};
use nsd::restore::{bicubic_upsample, super_resolve, Restorer};
use nsd::signal::PadMode;
use nsd::Grid2D;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn downsample(img: &Image, scale: usize) -> nsd::Result<Image> {
    let s = scale as f64 / 2.0;
    let k = render_gaussian_kernel(&GaussianKernelSpec {
        sigma1: s,
        sigma2: s,
        theta: 0.0,
        size: 4 * scale + 1,
    })?;
    blur_image(img, &k)?.map_planes(|p| {
        Ok(Grid2D::from_fn(p.rows() / scale, p.cols() / scale, |r, c| p[(scale * r, scale * c)]))
    })
}

fn main() -> nsd::Result<()> {
    let sharp = match std::env::args().nth(1) {
        Some(path) => load_image(path)?,
        None => procedural_scene(5, 128, 128, ColorSpace::Rgb),
    };
    let (r, c) = sharp.dims();
    let sharp = sharp.crop(0, 0, r / 4 * 4, c / 4 * 4)?;

    let rkg = generate_rkg(&GalleryConfig {
        count: 400,
        ..GalleryConfig::with_seed(1)
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let init = init_model(&mut rng, &Topology::default(), InitScheme::default())?;
    let cfg = TrainConfig {
        epochs: 8,
        ..TrainConfig::default()
    };
    let drk = extract_drk(&train(init, &rkg, &cfg)?.model);

    for scale in [2, 4] {
        let low = downsample(&sharp, scale)?;
        let plain = bicubic_upsample(&low, scale as f64)?;
        let sr = super_resolve(&low, scale as f64, Restorer::Kernel(&drk), PadMode::Reflect)?;
        let crop = |i: &Image| i.crop_border(8);
        let (s, p, q) = (crop(&sharp)?, crop(&plain)?, crop(&sr)?);
        println!(
            "x{scale}: bicubic {:.3} dB / {:.4}   restored {:.3} dB / {:.4}",
            psnr(&p, &s, 1.0)?,
            ssim(&p, &s)?,
            psnr(&q, &s, 1.0)?,
            ssim(&q, &s)?
        );
    }
    Ok(())
}
