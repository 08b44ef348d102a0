//! Draws from the entrance law at the cone vertex and estimates the survival
//! scaling ratio `P[tau > 4t] / P[tau > t] = 4^{-lambda/2}`.

use mating_trees::cone::survival_scaling_check;
use mating_trees::excursion::sample_shimura_entrance;
use mating_trees::stats::{mean, std_error};
use mating_trees::{GammaParams, RngStream};

fn main() -> mating_trees::Result<()> {
    for gamma in [std::f64::consts::SQRT_2, 1.0] {
        let p = GammaParams::new(gamma, 1.0)?;
        let eps = 0.5;
        let mut rng = RngStream::new(3, 0).rng();
        let r2: Vec<f64> = (0..20_000).map(|_| sample_shimura_entrance(&p, eps, &mut rng)).map(|z| z.r * z.r / eps).collect();
        println!("lambda {:.0}: E[r^2]/eps = {:.4} +- {:.4} (exact {})", p.lambda_exp, mean(&r2), std_error(&r2), 2.0 + p.lambda_exp);
        let est = survival_scaling_check(&p, 1.0, 1.05, 20_000, RngStream::new(4, 0))?;
        println!("  survival ratio {:.4} +- {:.4}, target {:.4}", est.ratio, est.std_error(), est.target);
    }
    Ok(())
}
