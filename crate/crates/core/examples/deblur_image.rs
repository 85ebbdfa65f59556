//! Blurs an image with a random kernel and restores it with a freshly trained
//! restoration kernel. Uses a synthetic scene when no image is given.
//!
//! `cargo run --release --example deblur_image -- [image] [out.png]`

use nsd::dil::{train, TrainConfig};
use nsd::eval::{blur_image, interior_scores, pair_kernel, procedural_scene, SimulationConfig};
use nsd::gallery::{generate_rkg, GalleryConfig};
use nsd::image_io::{load_image, save_image, ColorSpace};
use nsd::lcnn::{extract_drk, init_model, InitScheme, Topology};
use nsd::restore::{deblur_with_drk, deblur_with_model};
use nsd::signal::PadMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> nsd::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let sharp = match args.first() {
        Some(path) => load_image(path)?,
        None => procedural_scene(3, 128, 128, ColorSpace::Rgb),
    };

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
    let model = train(init, &rkg, &cfg)?.model;
    let drk = extract_drk(&model);

    let kernel = pair_kernel(11, 15, &SimulationConfig::with_seed(0))?;
    let blurred = blur_image(&sharp, &kernel)?;
    let by_kernel = deblur_with_drk(&blurred, &drk, PadMode::Reflect)?;
    let by_model = deblur_with_model(&blurred, &model, PadMode::Reflect)?;

    for (label, img) in [("blurred", &blurred), ("drk", &by_kernel), ("lcnn", &by_model)] {
        let (p, s) = interior_scores(img, &sharp)?;
        println!("{label:>8}: psnr {p:.3} dB  ssim {s:.4}");
    }
    if let Some(path) = args.get(1) {
        save_image(&by_kernel, path)?;
        println!("wrote {path}");
    }
    Ok(())
}
