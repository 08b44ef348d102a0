//! Tabulates the closed-form cone laws and the quantum-disk area law.
//!
//! ```text
//! cargo run --example closed_form_laws -- 1.2
//! ```

use mating_trees::area::AreaLaw;
use mating_trees::cone::{self, BoundaryPoint, ConePoint, Side};
use mating_trees::GammaParams;

fn main() -> mating_trees::Result<()> {
    let gamma: f64 = std::env::args().nth(1).map_or(Ok(std::f64::consts::SQRT_2), |s| s.parse()).expect("gamma");
    let p = GammaParams::new(gamma, 1.0)?;
    println!("gamma {gamma}: theta {:.6}, lambda {:.6}, Q {:.6}", p.theta, p.lambda_exp, p.q_coef);

    let z = ConePoint::new(1.0, p.theta / 2.0);
    println!("\ntime-1 density along the bisector");
    for r in [0.25, 0.5, 1.0, 2.0, 3.0] {
        println!("  r {r:<5} {:.6e}", cone::time_t_pdf(&p, ConePoint::new(r, p.theta / 2.0), 1.0)?);
    }

    println!("\nexit point from z = (1, theta/2), signed boundary coordinate");
    for s in [-4.0, -1.0, -0.25, 0.25, 1.0, 4.0] {
        let density = cone::exit_point_pdf_given_z(&p, z, BoundaryPoint::from_signed(s))?;
        println!("  s {s:<5} density {density:.6}  cdf {:.6}", cone::exit_point_cdf_given_z(&p, z, s)?);
    }

    let u = BoundaryPoint::disk_endpoint(&p);
    let law = AreaLaw::new(&p);
    println!("\nvertex-to-boundary survival at |u| = {:.6} and the area law", u.dist);
    for t in [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0] {
        println!(
            "  t {t:<5} survival {:.6}  area pdf {:.6}  area cdf {:.6}",
            cone::cone_survival(&p, u, t)?,
            law.pdf(t)?,
            law.cdf(t)?
        );
    }
    println!("\nc6 = {:.6e}, area normalizer c = {:.6e}", cone::survival_constant(&p), law.norm_c);
    println!("tail shape at |u| = 1, t = 1: {:.6e}", cone::tau_marginal_shape(&p, BoundaryPoint::new(1.0, Side::AngleZero), 1.0)?);
    Ok(())
}
