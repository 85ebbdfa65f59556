//! Draws a random kernel gallery and summarizes it.
//!
//! `cargo run --example gen_gallery -- [count] [seed] [out.rkg]`

use nsd::gallery::{generate_rkg, save_rkg, GalleryConfig};

fn main() -> nsd::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let count = args.first().map_or(16, |s| s.parse().expect("count"));
    let seed = args.get(1).map_or(7, |s| s.parse().expect("seed"));
    let rkg = generate_rkg(&GalleryConfig {
        count,
        ..GalleryConfig::with_seed(seed)
    })?;

    println!("{} kernels of {}x{1}", rkg.len(), rkg.kernel_size());
    for (i, k) in rkg.kernels.iter().take(8).enumerate() {
        let s = k.spec().expect("gallery kernels keep their spec");
        let g = k.grid();
        println!(
            "{i:>3}: sigma1 {:.3} sigma2 {:.3} theta {:+.3}  sum {:.6} peak {:.4}",
            s.sigma1,
            s.sigma2,
            s.theta,
            g.sum(),
            g.max()
        );
    }
    if let Some(path) = args.get(2) {
        save_rkg(&rkg, path)?;
        println!("wrote {path}");
    }
    Ok(())
}
