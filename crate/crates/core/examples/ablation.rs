//! Trains the seven regularizer subsets from one shared initialization and
//! scores each restoration kernel.
//!
//! `cargo run --release --example ablation -- [sharp_dir] [count] [epochs]`

use std::path::PathBuf;

use nsd::dil::TrainConfig;
use nsd::eval::{
    ablation_grid, best_row, load_sharp_dir, procedural_scene, simulate_pairs, write_study_csv, SimulationConfig,
};
use nsd::gallery::{generate_rkg, GalleryConfig};
use nsd::image_io::ColorSpace;
use nsd::lcnn::{init_model, InitScheme, Topology};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> nsd::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let images = match args.first().filter(|a| a.as_str() != "-") {
        Some(dir) => load_sharp_dir(dir)?,
        None => (0..3)
            .map(|i| (PathBuf::from(format!("scene{i}")), procedural_scene(i, 96, 96, ColorSpace::Rgb)))
            .collect(),
    };
    let count = args.get(1).map_or(200, |s| s.parse().expect("count"));
    let epochs = args.get(2).map_or(5, |s| s.parse().expect("epochs"));

    let pairs = simulate_pairs(&images, &SimulationConfig::with_seed(7))?;
    let rkg = generate_rkg(&GalleryConfig {
        count,
        ..GalleryConfig::with_seed(1)
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let init = init_model(&mut rng, &Topology::default(), InitScheme::default())?;
    let base = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let rows = ablation_grid(&rkg, &base, &init, &pairs)?;
    write_study_csv(&rows, std::io::stdout().lock()).expect("stdout");
    if let Some(i) = best_row(&rows) {
        println!("# best psnr: {}", rows[i].label);
    }
    Ok(())
}
