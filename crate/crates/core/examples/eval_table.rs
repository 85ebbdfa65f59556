//! Per-kernel-size PSNR/SSIM table for the blurred baseline, the oracle
//! Wiener filter and a quickly trained restoration kernel.
//!
//! `cargo run --release --example eval_table -- [sharp_dir]`

use std::path::PathBuf;

use nsd::dil::{train, TrainConfig};
use nsd::eval::{evaluate, load_sharp_dir, procedural_scene, simulate_pairs, Method, SimulationConfig};
use nsd::gallery::{generate_rkg, GalleryConfig};
use nsd::image_io::ColorSpace;
use nsd::lcnn::{extract_drk, init_model, InitScheme, Topology};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> nsd::Result<()> {
    let images = match std::env::args().nth(1) {
        Some(dir) => load_sharp_dir(dir)?,
        None => (0..4)
            .map(|i| (PathBuf::from(format!("scene{i}")), procedural_scene(i, 96, 96, ColorSpace::Rgb)))
            .collect(),
    };
    let pairs = simulate_pairs(&images, &SimulationConfig::with_seed(7))?;

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

    let mut out = std::io::stdout().lock();
    let methods = [Method::Identity, Method::Wiener { nsr: 1e-3 }, Method::Drk(&drk)];
    for (i, m) in methods.into_iter().enumerate() {
        let report = evaluate(m, &pairs)?;
        report.write_csv(&mut out, i == 0).expect("stdout");
    }
    Ok(())
}
