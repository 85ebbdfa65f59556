//! Trains a linear CNN on a small gallery and prints the loss per epoch.
//!
//! `cargo run --release --example train_model -- [count] [epochs] [out.lcnn]`

use nsd::dil::{train, TrainConfig};
use nsd::gallery::{generate_rkg, GalleryConfig};
use nsd::lcnn::{init_model, save_model, InitScheme, Topology};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> nsd::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let count = args.first().map_or(400, |s| s.parse().expect("count"));
    let epochs = args.get(1).map_or(8, |s| s.parse().expect("epochs"));

    let rkg = generate_rkg(&GalleryConfig {
        count,
        ..GalleryConfig::with_seed(1)
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let model = init_model(&mut rng, &Topology::default(), InitScheme::default())?;
    println!("{} parameters, restoration kernel {}x{1}", model.param_count(), model.drk_size());

    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let out = train(model, &rkg, &cfg)?;
    println!("epoch  identity       r1       r2       r3    total");
    for (e, b) in out.history.iter().enumerate() {
        println!(
            "{:>5} {:>9.5} {:>8.5} {:>8.5} {:>8.5} {:>8.5}",
            e + 1,
            b.identity,
            b.r1,
            b.r2,
            b.r3,
            b.total
        );
    }
    if let Some(path) = args.get(2) {
        save_model(&out.model, path)?;
        println!("wrote {path}");
    }
    Ok(())
}
