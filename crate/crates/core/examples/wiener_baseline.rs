//! Oracle Wiener deconvolution: exact inverse on a gentle blur, and how it
//! degrades when the assumed kernel is wrong.
//!
//! `cargo run --release --example wiener_baseline -- [image]`

use nsd::eval::{blur_image, interior_scores, procedural_scene};
use nsd::gallery::{render_gaussian_kernel, GaussianKernelSpec, Kernel};
use nsd::image_io::{load_image, ColorSpace};
use nsd::restore::wiener_deconvolve;

fn gaussian(sigma: f64) -> nsd::Result<Kernel> {
    render_gaussian_kernel(&GaussianKernelSpec {
        sigma1: sigma,
        sigma2: sigma,
        theta: 0.0,
        size: 11,
    })
}

fn main() -> nsd::Result<()> {
    let sharp = match std::env::args().nth(1) {
        Some(path) => load_image(path)?,
        None => procedural_scene(9, 128, 128, ColorSpace::Gray),
    };
    for sigma in [0.5, 1.0, 2.0] {
        let k = gaussian(sigma)?;
        let blurred = blur_image(&sharp, &k)?;
        let (b, _) = interior_scores(&blurred, &sharp)?;
        print!("sigma {sigma}: blurred {b:.2} dB");
        for nsr in [0.0, 1e-3, 1e-2] {
            match wiener_deconvolve(&blurred, &k, nsr) {
                Ok(img) => print!("  nsr {nsr:e}: {:.2} dB", interior_scores(&img, &sharp)?.0),
                Err(e) => print!("  nsr {nsr:e}: {}", e.code()),
            }
        }
        let wrong = wiener_deconvolve(&blurred, &gaussian(2.0 * sigma)?, 1e-3)?;
        println!("  sigma doubled: {:.2} dB", interior_scores(&wrong, &sharp)?.0);
    }
    Ok(())
}
