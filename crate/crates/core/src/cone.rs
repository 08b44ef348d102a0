//! Closed-form laws for Brownian motion in the cone `C_theta` started at its
//! vertex.
//!
//! Cone coordinates use standard planar Brownian motion (unit variance per
//! coordinate per unit time). Boundary points are written `u` and identified by
//! their distance from the vertex and the ray they lie on.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};
use crate::excursion::{self, ExitMonitor, WalkLimit};
use crate::params::GammaParams;
use crate::rng::RngStream;
use crate::specfun::{ln_truncated_gamma, regularized_lower_gamma};

/// A point of `C_theta` in polar form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    pub r: f64,
    pub phi: f64,
}

impl ConePoint {
    pub fn new(r: f64, phi: f64) -> Self {
        Self { r, phi }
    }

    pub fn from_xy(x: f64, y: f64) -> Self {
        Self { r: x.hypot(y), phi: y.atan2(x) }
    }

    pub fn to_xy(&self) -> (f64, f64) {
        let (s, c) = self.phi.sin_cos();
        (self.r * c, self.r * s)
    }

    pub fn in_cone(&self, params: &GammaParams) -> bool {
        self.r >= 0.0 && self.phi >= 0.0 && self.phi <= params.theta
    }

    pub fn is_interior(&self, params: &GammaParams) -> bool {
        self.r > 0.0 && self.phi > 0.0 && self.phi < params.theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// The ray `arg z = 0`.
    AngleZero,
    /// The ray `arg z = theta`.
    AngleTheta,
}

/// A point of the cone boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub dist: f64,
    pub side: Side,
}

impl BoundaryPoint {
    pub fn new(dist: f64, side: Side) -> Self {
        Self { dist, side }
    }

    /// Signed arclength coordinate: `+dist` on the zero ray, `-dist` on the
    /// theta ray. Orders the whole boundary as one line.
    pub fn signed(&self) -> f64 {
        match self.side {
            Side::AngleZero => self.dist,
            Side::AngleTheta => -self.dist,
        }
    }

    pub fn from_signed(s: f64) -> Self {
        if s >= 0.0 {
            Self { dist: s, side: Side::AngleZero }
        } else {
            Self { dist: -s, side: Side::AngleTheta }
        }
    }

    pub fn to_xy(&self, params: &GammaParams) -> (f64, f64) {
        match self.side {
            Side::AngleZero => (self.dist, 0.0),
            Side::AngleTheta => {
                let (s, c) = params.theta.sin_cos();
                (self.dist * c, self.dist * s)
            }
        }
    }

    /// `Lambda (1, 0)`: the endpoint whose excursion duration is the disk area.
    pub fn disk_endpoint(params: &GammaParams) -> Self {
        Self { dist: 1.0 / params.a_sin_theta(), side: Side::AngleZero }
    }
}

/// `c_1 = 2^{-lambda/2} / Gamma(lambda/2)`.
pub fn time_t_constant(params: &GammaParams) -> f64 {
    ln_time_t_constant(params).exp()
}

fn ln_time_t_constant(params: &GammaParams) -> f64 {
    let lam = params.lambda_exp;
    -0.5 * lam * std::f64::consts::LN_2 - ln_gamma(lam / 2.0)
}

/// Density at `z` of the position at time `t` of Brownian motion started at the
/// vertex and conditioned to stay in the cone up to time `t`:
/// `c_1 |z|^lambda sin(lambda arg z) t^{-1-lambda/2} exp(-|z|^2 / 2t)`.
pub fn time_t_pdf(params: &GammaParams, z: ConePoint, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    if !z.in_cone(params) || z.r == 0.0 {
        return Ok(0.0);
    }
    let lam = params.lambda_exp;
    let ln = ln_time_t_constant(params) + lam * z.r.ln() - (1.0 + lam / 2.0) * t.ln() - z.r * z.r / (2.0 * t);
    Ok(ln.exp() * (lam * z.phi).sin().max(0.0))
}

fn check_interior(params: &GammaParams, z: ConePoint) -> Result<()> {
    if !z.is_interior(params) {
        return Err(Error::Domain(format!(
            "point (r={}, phi={}) is not strictly inside the cone of angle {}",
            z.r, z.phi, params.theta
        )));
    }
    Ok(())
}

/// `(u/z)`-scaled quantities shared by the harmonic-measure density and CDF:
/// returns `q = (dist/|z|)^lambda` with the sign of the ray applied.
fn scaled_boundary_power(lam: f64, z: ConePoint, u: BoundaryPoint) -> f64 {
    let q = (lam * (u.dist / z.r).ln()).exp();
    match u.side {
        Side::AngleZero => q,
        Side::AngleTheta => -q,
    }
}

/// Density, against arclength on the boundary, of the exit point of Brownian
/// motion started at `z`:
/// `|z|^lambda |u|^{lambda-1} sin(lambda arg z) / (theta |z^lambda - u^lambda|^2)`
/// with `u^lambda = +|u|^lambda` on the zero ray and `-|u|^lambda` on the theta ray.
pub fn exit_point_pdf_given_z(params: &GammaParams, z: ConePoint, u: BoundaryPoint) -> Result<f64> {
    check_interior(params, z)?;
    if !(u.dist > 0.0) {
        return Err(Error::Domain(format!("boundary point must be away from the vertex, got {}", u.dist)));
    }
    let lam = params.lambda_exp;
    let (s, c) = (lam * z.phi).sin_cos();
    let x = scaled_boundary_power(lam, z, u);
    if !x.is_finite() || x.abs() > 1e150 {
        // Far tail: the denominator is dominated by q^2.
        return Ok(s / (params.theta * u.dist * x.abs()));
    }
    // Divide numerator and denominator by |z|^{2 lambda} to stay in range.
    let den = (c - x) * (c - x) + s * s;
    Ok(x.abs() * s / (params.theta * u.dist * den))
}

/// Distribution function of the exit point in the signed coordinate of
/// [`BoundaryPoint::signed`]. Under `w = z^lambda` the exit point is Cauchy with
/// location `Re w` and scale `Im w`.
pub fn exit_point_cdf_given_z(params: &GammaParams, z: ConePoint, signed: f64) -> Result<f64> {
    check_interior(params, z)?;
    let lam = params.lambda_exp;
    let (s, c) = (lam * z.phi).sin_cos();
    if signed == 0.0 {
        return Ok(0.5 + (-c / s).atan() / PI);
    }
    let x = scaled_boundary_power(lam, z, BoundaryPoint::from_signed(signed));
    Ok(0.5 + ((x - c) / s).atan() / PI)
}

fn check_boundary_time(u: BoundaryPoint, t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    if !(u.dist > 0.0) {
        return Err(Error::Domain(format!("boundary point must be away from the vertex, got {}", u.dist)));
    }
    Ok(())
}

/// Unnormalized density in `u` of the exit point given survival past `t`:
/// `|u|^{lambda-1} t^{-1-lambda/2} (t e^{-x} + 2^lambda t^{1+lambda} |u|^{-2 lambda} Gamma_(1+lambda, x))`
/// with `x = |u|^2 / 2t` and `Gamma_` the truncated gamma function.
pub fn tau_marginal_shape(params: &GammaParams, u: BoundaryPoint, t: f64) -> Result<f64> {
    check_boundary_time(u, t)?;
    let lam = params.lambda_exp;
    let x = u.dist * u.dist / (2.0 * t);
    // 2^lambda t^lambda |u|^{-2 lambda} = x^{-lambda}.
    let tail = (ln_truncated_gamma(1.0 + lam, x)? - lam * x.ln()).exp();
    let prefactor = ((lam - 1.0) * u.dist.ln() - (lam / 2.0) * t.ln()).exp();
    Ok(prefactor * ((-x).exp() + tail))
}

/// `c_6 = 2^{-lambda} / Gamma(1 + lambda)`.
pub fn survival_constant(params: &GammaParams) -> f64 {
    let lam = params.lambda_exp;
    (-lam * std::f64::consts::LN_2 - ln_gamma(1.0 + lam)).exp()
}

/// Probability that the normalized vertex-to-`u` cone excursion lasts longer
/// than `t`:
/// `c_6 |u|^{2 lambda} t^{-1-lambda} (t e^{-x} + 2^lambda t^{1+lambda} |u|^{-2 lambda} Gamma_(1+lambda, x))`
/// with `x = |u|^2 / 2t`.
pub fn cone_survival(params: &GammaParams, u: BoundaryPoint, t: f64) -> Result<f64> {
    check_boundary_time(u, t)?;
    let lam = params.lambda_exp;
    let x = u.dist * u.dist / (2.0 * t);
    let ln_c6 = survival_constant(params).ln();
    // c_6 |u|^{2 lambda} t^{-lambda} e^{-x}
    let first = (ln_c6 + 2.0 * lam * u.dist.ln() - lam * t.ln() - x).exp();
    // c_6 2^lambda Gamma_(1 + lambda, x) = P(1 + lambda, x)
    let second = regularized_lower_gamma(1.0 + lam, x)?;
    Ok((first + second).clamp(0.0, 1.0))
}

/// Outcome of [`survival_scaling_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingEstimate {
    /// Monte Carlo estimate of `P[tau > 4t] / P[tau > t]`.
    pub ratio: f64,
    /// `4^{-lambda/2}`.
    pub target: f64,
    pub survived_t: usize,
    pub survived_4t: usize,
    pub n_samples: usize,
}

impl ScalingEstimate {
    /// Binomial standard error of `ratio`, conditional on `survived_t`.
    pub fn std_error(&self) -> f64 {
        let p = self.ratio;
        (p * (1.0 - p) / self.survived_t as f64).sqrt()
    }
}

/// Step size, as a fraction of `eps`, used by [`survival_scaling_check`].
pub const SCALING_DT_FRACTION: f64 = 2e-3;

/// Monte Carlo estimate of `P^eps[tau > 4t] / P^eps[tau > t]` for Brownian
/// motion entering the cone from its vertex, whose theoretical value is
/// `4^{-lambda/2}`.
///
/// Each replica draws the time-`eps` position from the entrance law, then runs
/// standard Brownian motion with bridge-corrected exit monitoring until it
/// leaves the cone or reaches time `4t`. Replica `i` uses `rng.child(i)`.
pub fn survival_scaling_check(
    params: &GammaParams,
    eps: f64,
    t: f64,
    n_samples: usize,
    rng: RngStream,
) -> Result<ScalingEstimate> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    if !(t > eps) {
        return Err(Error::Domain(format!("need t > eps, got t={t}, eps={eps}")));
    }
    let dt = eps * SCALING_DT_FRACTION;
    let horizon = 4.0 * t - eps;
    let limit = WalkLimit::Time(horizon);
    // `None` marks a path still inside at time 4t.
    let lifetimes: Vec<Option<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.child(i).rng();
            let start = excursion::sample_shimura_entrance(params, eps, &mut r);
            let walk = excursion::walk_in_cone(params, start.to_xy(), dt, &mut r, limit, ExitMonitor::BridgeCorrected, false);
            walk.exit.map(|_| eps + walk.elapsed)
        })
        .collect();
    let survived_4t = lifetimes.iter().filter(|l| l.is_none()).count();
    let survived_t = lifetimes.iter().filter(|l| l.is_none_or(|l| l > t)).count();
    if survived_t == 0 {
        return Err(Error::Sampling {
            message: "no path survived to time t".into(),
            attempts: n_samples,
            acceptance_rate: 0.0,
        });
    }
    Ok(ScalingEstimate {
        ratio: survived_4t as f64 / survived_t as f64,
        target: 4f64.powf(-params.lambda_exp / 2.0),
        survived_t,
        survived_4t,
        n_samples,
    })
}
