//! Samples approximate boundary-to-boundary excursions in (L, R) coordinates
//! and writes them as `t,L,R` blocks.

use mating_trees::excursion::{sample_excursions, Conditioning, ExcursionConfig};
use mating_trees::{GammaParams, RngStream};

fn main() -> mating_trees::Result<()> {
    let p = GammaParams::sqrt2();
    for (conditioning, delta) in [(Conditioning::HTransform, 0.05), (Conditioning::Rejection, 0.25)] {
        let cfg = ExcursionConfig { conditioning, ..ExcursionConfig::new(delta, 1.0, 1e-4) };
        let batch = sample_excursions(&p, &cfg, 200, &RngStream::new(5, 0))?;
        let d = batch.durations();
        println!(
            "{conditioning:?} delta {delta}: acceptance {:.3}, mean duration {:.4}",
            batch.acceptance_rate(),
            d.iter().sum::<f64>() / d.len() as f64
        );
    }
    let cfg = ExcursionConfig::new(0.05, 1.0, 1e-4);
    let batch = sample_excursions(&p, &cfg, 3, &RngStream::new(6, 0))?;
    let out = std::env::temp_dir().join("excursions.csv");
    let text: Vec<String> = batch.samples.iter().filter_map(|s| s.lr_path.as_ref()).map(|p| p.to_csv()).collect();
    std::fs::write(&out, text.join("\n"))?;
    for s in &batch.samples {
        let path = s.lr_path.as_ref().unwrap();
        println!("duration {:.4}: start {:?}, end {:?}", s.duration, path.first(), path.last());
    }
    println!("wrote {}", out.display());
    Ok(())
}
