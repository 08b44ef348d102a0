//! Builds the mated-CRT map of a sampled excursion with the monotone-stack
//! builder, checks it against the quadratic oracle and prints degree data.

use std::time::Instant;

use mating_trees::excursion::{sample_approx_excursion_with, ExcursionConfig};
use mating_trees::matedcrt::{build_brute_cells, build_fast_cells, mark_boundary_cells, CellPath, GraphFormat};
use mating_trees::{GammaParams, RngStream};

fn main() -> mating_trees::Result<()> {
    let p = GammaParams::sqrt2();
    let cfg = ExcursionConfig::new(0.1, 1.0, 1e-6);
    let sample = sample_approx_excursion_with(&p, &cfg, &mut RngStream::new(9, 0).rng())?;
    let path = sample.lr_path.unwrap();
    println!("excursion of duration {:.4} with {} grid points", sample.duration, path.len());

    for cells_wanted in [1_000.0, 10_000.0] {
        let cells = CellPath::from_path(&path, (path.duration() / cells_wanted).max(10.0 * path.dt))?;
        let started = Instant::now();
        let g = mark_boundary_cells(&cells, &build_fast_cells(&cells))?;
        println!(
            "{} cells: {} edges, mean degree {:.3}, {} boundary cells, connected {}, built in {:.2?}",
            g.n,
            g.edges.len(),
            g.mean_degree(),
            g.boundary_count(),
            g.is_connected(),
            started.elapsed()
        );
        if g.n <= 1000 {
            assert_eq!(build_brute_cells(&cells).edges, g.edges);
            println!("  matches the brute-force builder");
        }
    }

    let cells = CellPath::from_path(&path, path.duration() / 50.0)?;
    let g = mark_boundary_cells(&cells, &build_fast_cells(&cells))?;
    println!("\n50-cell map, degree histogram:\n{}", g.degree_histogram_csv());
    println!("first edges:\n{}", g.export(GraphFormat::Csv).lines().take(8).collect::<Vec<_>>().join("\n"));
    Ok(())
}
