//! Scores one restoration kernel as the blur widens, reusing the same images
//! and seed for every band.
//!
//! `cargo run --release --example robustness_sweep -- [sharp_dir]`

use std::path::PathBuf;

use nsd::dil::{train, TrainConfig};
use nsd::eval::{
    load_sharp_dir, procedural_scene, robustness_sweep, write_sweep_csv, Method, SimulationConfig, SWEEP_BANDS,
};
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

    let rows = robustness_sweep(Method::Drk(&drk), &images, &SWEEP_BANDS, &SimulationConfig::with_seed(7))?;
    write_sweep_csv(&rows, std::io::stdout().lock()).expect("stdout");
    Ok(())
}
