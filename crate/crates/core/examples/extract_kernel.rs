//! Collapses a model into its restoration kernel and shows its shape and
//! spectrum. Trains a small model when no checkpoint is given.
//!
//! `cargo run --release --example extract_kernel -- [model.lcnn]`

use nsd::dil::{train, TrainConfig};
use nsd::gallery::{generate_rkg, GalleryConfig};
use nsd::lcnn::{extract_drk, init_model, load_model, InitScheme, LcnnModel, Topology};
use nsd::signal::{magnitude, zero_phase_spectrum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quick_model() -> nsd::Result<LcnnModel> {
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
    Ok(train(init, &rkg, &cfg)?.model)
}

fn main() -> nsd::Result<()> {
    let model = match std::env::args().nth(1) {
        Some(path) => load_model(path)?,
        None => quick_model()?,
    };
    let drk = extract_drk(&model);
    let g = drk.grid();
    println!("kernel {}x{}  sum {:.6}  center {:.4}", g.rows(), g.cols(), g.sum(), drk.center());
    let c = g.rows() / 2;
    for r in c - 3..=c + 3 {
        let row: Vec<String> = (c - 3..=c + 3).map(|col| format!("{:+.4}", g[(r, col)])).collect();
        println!("  {}", row.join(" "));
    }

    let mag = magnitude(&zero_phase_spectrum(g, 21, 21)?);
    println!("|spectrum| along the first row (dc first):");
    let row: Vec<String> = (0..=10).map(|v| format!("{:.3}", mag[(0, v)])).collect();
    println!("  {}", row.join(" "));
    Ok(())
}
