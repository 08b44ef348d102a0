//! The area law of the unit boundary length quantum disk, an inverse gamma
//! distribution, and the Monte Carlo comparison against excursion durations.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};
use crate::excursion::{self, Conditioning, ExcursionConfig};
use crate::params::GammaParams;
use crate::rng::{gamma, RngStream};
use crate::specfun::regularized_upper_gamma;
use crate::stats::{self, ChiSquare};

/// Inverse gamma law with shape `lambda` and scale `b = 1 / (2 (a sin theta)^2)`:
/// density `t^{-1-lambda} exp(-b/t) / c` on `t > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaLaw {
    pub params: GammaParams,
    pub rate_b: f64,
    pub shape: f64,
    pub norm_c: f64,
}

impl AreaLaw {
    pub fn new(params: &GammaParams) -> Self {
        let s = params.a_sin_theta();
        let rate_b = 1.0 / (2.0 * s * s);
        let shape = params.lambda_exp;
        Self { params: *params, rate_b, shape, norm_c: Self::ln_paper_constant(params).exp() }
    }

    /// `ln c` for `c = 2^lambda Gamma(lambda) (a sin theta)^{2 lambda}`.
    pub fn ln_paper_constant(params: &GammaParams) -> f64 {
        let lam = params.lambda_exp;
        lam * std::f64::consts::LN_2 + ln_gamma(lam) + 2.0 * lam * params.a_sin_theta().ln()
    }

    /// `ln(Gamma(lambda) / b^lambda)`, the inverse gamma normalizer.
    pub fn ln_inverse_gamma_norm(&self) -> f64 {
        ln_gamma(self.shape) - self.shape * self.rate_b.ln()
    }

    fn check_t(t: f64) -> Result<()> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("area must be positive, got {t}")));
        }
        Ok(())
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        if t.is_infinite() {
            return Ok(0.0);
        }
        let ln = -(1.0 + self.shape) * t.ln() - self.rate_b / t - self.ln_inverse_gamma_norm();
        Ok(ln.exp())
    }

    /// `P(area <= t) = Q(lambda, b / t)`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        if t.is_infinite() {
            return Ok(1.0);
        }
        regularized_upper_gamma(self.shape, self.rate_b / t)
    }

    /// Mean `b / (lambda - 1)`, finite for `lambda > 1`.
    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.rate_b / (self.shape - 1.0))
    }

    /// Exact draw `b / G` with `G ~ Gamma(lambda, 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.rate_b / gamma(rng, self.shape)
    }
}

pub fn disk_area_pdf(law: &AreaLaw, t: f64) -> Result<f64> {
    law.pdf(t)
}

pub fn disk_area_cdf(law: &AreaLaw, t: f64) -> Result<f64> {
    law.cdf(t)
}

pub fn sample_disk_area<R: Rng + ?Sized>(law: &AreaLaw, rng: &mut R) -> f64 {
    law.sample(rng)
}

/// Number of equiprobable bins in the chi-square part of the report.
pub const REPORT_BINS: usize = 20;

/// Comparison of approximate-excursion durations with the area law. Field
/// order is fixed and is the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaMcReport {
    pub ks: f64,
    pub ks_p_value: f64,
    pub chi2: ChiSquare,
    pub acceptance_rate: f64,
    pub n: usize,
    pub attempts: usize,
    pub mean: f64,
    pub theoretical_mean: Option<f64>,
    pub gamma: f64,
    pub a_const: f64,
    pub delta: f64,
    pub c: f64,
    pub dt: f64,
    pub conditioning: Conditioning,
    pub seed: u64,
    pub stream_id: u64,
    pub runtime_seconds: f64,
}

/// Samples `n` approximate excursions with the h-transform sampler and
/// compares their durations with [`AreaLaw::cdf`].
pub fn mc_area_comparison(params: &GammaParams, delta: f64, c: f64, dt: f64, n: usize, rng: &RngStream) -> Result<AreaMcReport> {
    let cfg = ExcursionConfig { record_path: false, ..ExcursionConfig::new(delta, c, dt) };
    mc_area_comparison_with(params, &cfg, n, rng)
}

pub fn mc_area_comparison_with(params: &GammaParams, cfg: &ExcursionConfig, n: usize, rng: &RngStream) -> Result<AreaMcReport> {
    if n == 0 {
        return Err(Error::Parameter("area comparison needs n >= 1 samples".into()));
    }
    let started = Instant::now();
    let batch = excursion::sample_excursions(params, cfg, n, rng)?;
    let durations = batch.durations();
    Ok(report_from_durations(params, cfg, &durations, batch.attempts, rng, started.elapsed().as_secs_f64()))
}

fn report_from_durations(
    params: &GammaParams,
    cfg: &ExcursionConfig,
    durations: &[f64],
    attempts: usize,
    rng: &RngStream,
    runtime_seconds: f64,
) -> AreaMcReport {
    let law = AreaLaw::new(params);
    let cdf = |t: f64| if t > 0.0 { law.cdf(t).unwrap_or(0.0) } else { 0.0 };
    let ks = stats::ks_statistic(durations, cdf);
    let n = durations.len();
    AreaMcReport {
        ks,
        ks_p_value: stats::ks_p_value(ks, n as f64),
        chi2: stats::chi_square_equiprobable(durations, cdf, REPORT_BINS, 0.0, f64::INFINITY),
        acceptance_rate: n as f64 / attempts as f64,
        n,
        attempts,
        mean: stats::mean(durations),
        theoretical_mean: law.mean(),
        gamma: params.gamma,
        a_const: params.a_const,
        delta: cfg.delta,
        c: cfg.c,
        dt: cfg.dt,
        conditioning: cfg.conditioning,
        seed: rng.seed,
        stream_id: rng.stream_id,
        runtime_seconds,
    }
}

/// `n` exact draws from the area law; draw `i` uses `rng.child(i)`.
pub fn sample_disk_areas(law: &AreaLaw, n: usize, rng: &RngStream) -> Vec<f64> {
    (0..n as u64).into_par_iter().map(|i| law.sample(&mut rng.child(i).rng())).collect()
}
