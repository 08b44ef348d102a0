//! Runs Brownian motion in the cone until it exits and compares the walked
//! exit law with the exact Cauchy-method sampler and the closed-form CDF.

use mating_trees::cone::{exit_point_cdf_given_z, ConePoint};
use mating_trees::excursion::{exit_point_by_walk, run_until_exit, sample_exit_point, ExitMonitor};
use mating_trees::stats::ks_statistic;
use mating_trees::{GammaParams, RngStream};

fn main() -> mating_trees::Result<()> {
    let p = GammaParams::sqrt2();
    let z = ConePoint::new(1.0, p.theta / 2.0);

    let exit = run_until_exit(&p, z, 1e-3, &mut RngStream::new(1, 0).rng(), 10_000_000)?;
    println!("one path: {} steps, tau {:.4}, exit {:?}", exit.path.len(), exit.tau, exit.exit_point);

    let n = 5000;
    let mut rng = RngStream::new(2, 0).rng();
    let mut walked = Vec::with_capacity(n);
    for _ in 0..n {
        match exit_point_by_walk(&p, z, 1e-3, &mut rng, 1_000_000, ExitMonitor::BridgeCorrected)? {
            Ok((u, _)) => walked.push(u.signed()),
            Err(_) => walked.push(f64::INFINITY),
        }
    }
    let exact: Vec<f64> = (0..n).map(|_| sample_exit_point(&p, z, &mut rng).map(|u| u.signed())).collect::<Result<_, _>>()?;
    let cdf = |s: f64| if s.is_infinite() { 1.0 } else { exit_point_cdf_given_z(&p, z, s).unwrap() };
    println!("KS vs closed form, n = {n}: walked {:.4}, exact {:.4}", ks_statistic(&walked, cdf), ks_statistic(&exact, cdf));
    let zero_side = exact.iter().filter(|&&s| s > 0.0).count() as f64 / n as f64;
    println!("share exiting on the zero ray: {zero_side:.3} (exact 1/2)");
    Ok(())
}
