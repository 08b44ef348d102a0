//! Samples the correlated boundary-length Brownian motion and checks its
//! increment correlation against `-cos(pi gamma^2 / 4)`.

use mating_trees::bm::{sample_correlated_bm, shear_path, ShearDirection};
use mating_trees::stats::covariance2;
use mating_trees::{GammaParams, RngStream};

fn main() -> mating_trees::Result<()> {
    for gamma in [0.7, 1.0, std::f64::consts::SQRT_2, 1.9] {
        let p = GammaParams::new(gamma, 1.0)?;
        let path = sample_correlated_bm(&p, 1e-3, 100_000, (0.0, 0.0), &mut RngStream::new(1, 0).rng())?;
        let inc: Vec<(f64, f64)> = path.increments().collect();
        let [vl, c, vr] = covariance2(&inc);
        let cone = shear_path(&p, &path, ShearDirection::Forward);
        let [vx, cxy, vy] = covariance2(&cone.increments().collect::<Vec<_>>());
        println!(
            "gamma {gamma:.4}: corr {:+.4} (target {:+.4}); cone increments per unit time: var ({:.3}, {:.3}), cov {:+.3}",
            c / (vl * vr).sqrt(),
            p.correlation(),
            vx / path.dt,
            vy / path.dt,
            cxy / path.dt
        );
    }
    Ok(())
}
