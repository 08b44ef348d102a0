//! Field-average processes of thick wedges, conditioned disks and beads.

use mating_trees::processes::{
    bead_dimension, sample_bead_average, sample_disk_average, sample_disk_conditioned_average, sample_thick_wedge_average,
};
use mating_trees::{GammaParams, RngStream};

fn main() -> mating_trees::Result<()> {
    let mut rng = RngStream::new(8, 0).rng();
    let p = GammaParams::sqrt2();
    let dt = 1e-3;

    let wedge = sample_thick_wedge_average(&p, p.gamma, dt, 5000, 5000, &mut rng)?;
    let k0 = wedge.zero_index().unwrap();
    println!(
        "thick wedge: X(-5) = {:.3}, X(0) = {}, X(5) = {:.3}, qv rate {:.3}",
        wedge.values[0],
        wedge.values[k0],
        wedge.values[wedge.len() - 1],
        wedge.quadratic_variation_rate()
    );

    let disk = sample_disk_conditioned_average(&p, 0.5, dt, 5000, &mut rng)?;
    let left_max = disk.values[..disk.zero_index().unwrap()].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("conditioned disk: max over s < 0 is {left_max:.4} < -0.5, qv rate {:.3}", disk.quadratic_variation_rate());

    let thin = GammaParams::new(1.5, 1.0)?;
    let alpha = 1.5 * thin.gamma;
    let bead = sample_bead_average(&thin, alpha, dt, &mut rng)?;
    println!(
        "bead (Bessel dimension {:.4}): duration {:.2}, qv rate {:.3}",
        bead_dimension(&thin, alpha),
        bead.duration(),
        bead.quadratic_variation_rate()
    );

    let unit = sample_disk_average(&thin, dt, &mut rng)?;
    println!("disk as log-Bessel excursion: duration {:.2}, qv rate {:.3}", unit.duration(), unit.quadratic_variation_rate());
    match sample_disk_average(&GammaParams::new(1.0, 1.0)?, dt, &mut rng) {
        Ok(_) => unreachable!(),
        Err(e) => println!("gamma = 1: {e}"),
    }
    Ok(())
}
