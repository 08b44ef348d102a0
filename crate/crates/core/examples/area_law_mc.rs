//! Compares approximate-excursion durations with the quantum-disk area law.
//!
//! ```text
//! cargo run --release --example area_law_mc -- 20000
//! ```

use mating_trees::area::{mc_area_comparison, sample_disk_areas, AreaLaw};
use mating_trees::stats::{ks_statistic, mean};
use mating_trees::{GammaParams, RngStream};

fn main() -> mating_trees::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(Ok(5000), |s| s.parse()).expect("sample count");
    let p = GammaParams::sqrt2();
    let law = AreaLaw::new(&p);

    let exact = sample_disk_areas(&law, n, &RngStream::new(7, 0));
    println!("exact sampler: mean {:.4}, ks {:.4}", mean(&exact), ks_statistic(&exact, |t| law.cdf(t).unwrap()));

    let report = mc_area_comparison(&p, 0.01, 1.0, 1e-4, n, &RngStream::new(7, 1))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
