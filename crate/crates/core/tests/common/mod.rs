#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use nsd::eval::procedural_scene;
use nsd::image_io::{save_image, ColorSpace, Image};
use nsd::lcnn::{init_model, InitScheme, LcnnModel, Topology};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// In-memory corpus of seeded synthetic scenes.
pub fn scenes(n: usize, side: usize) -> Vec<(PathBuf, Image)> {
    (0..n)
        .map(|i| {
            let color = if i % 3 == 2 { ColorSpace::Gray } else { ColorSpace::Rgb };
            (
                PathBuf::from(format!("scene{i:02}.png")),
                procedural_scene(1000 + i as u64, side, side, color),
            )
        })
        .collect()
}

/// Same corpus written as PNG files.
pub fn scene_dir(n: usize, side: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, img) in scenes(n, side) {
        save_image(&img, dir.path().join(name)).unwrap();
    }
    dir
}

pub fn tiny_model(seed: u64) -> LcnnModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_model(&mut rng, &Topology::uniform(3, 2).unwrap(), InitScheme::ScaledNormal).unwrap()
}
