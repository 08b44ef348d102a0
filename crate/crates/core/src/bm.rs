//! Correlated planar Brownian motion: the boundary-length process `(L, R)`.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::GammaParams;
use crate::rng::normal;

pub use crate::rng::RngStream;

/// A planar path sampled on a uniform time grid. Point `k` sits at time
/// `origin_time + k * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path2D {
    pub dt: f64,
    pub origin_time: f64,
    pub points: Vec<(f64, f64)>,
}

impl Path2D {
    pub fn new(dt: f64, origin_time: f64, points: Vec<(f64, f64)>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Input(format!("path time step must be positive, got {dt}")));
        }
        if points.is_empty() {
            return Err(Error::Input("path has no points".into()));
        }
        Ok(Self { dt, origin_time, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.origin_time + k as f64 * self.dt
    }

    /// Time spanned by the grid, `(len - 1) * dt`.
    pub fn duration(&self) -> f64 {
        (self.points.len().saturating_sub(1)) as f64 * self.dt
    }

    pub fn first(&self) -> (f64, f64) {
        self.points[0]
    }

    pub fn last(&self) -> (f64, f64) {
        *self.points.last().expect("nonempty path")
    }

    /// Per-step increments.
    pub fn increments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.windows(2).map(|w| (w[1].0 - w[0].0, w[1].1 - w[0].1))
    }

    /// CSV with header `t,L,R`, 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 64 + 8);
        out.push_str("t,L,R\n");
        self.write_csv_rows(&mut out);
        out
    }

    pub(crate) fn write_csv_rows(&self, out: &mut String) {
        for (k, &(l, r)) in self.points.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt_sig17(self.time(k)), fmt_sig17(l), fmt_sig17(r));
        }
    }

    /// Parses the first block of a `t,L,R` CSV file. The time step is taken
    /// from the first two rows and every later row must agree with it.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut blocks = paths_from_csv(text)?;
        if blocks.is_empty() {
            return Err(Error::Input("CSV contains no path".into()));
        }
        Ok(blocks.swap_remove(0))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("path serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Path2D = serde_json::from_str(text)?;
        Path2D::new(p.dt, p.origin_time, p.points)
    }
}

/// Parses every blank-line separated `t,L,R` block in `text`.
pub fn paths_from_csv(text: &str) -> Result<Vec<Path2D>> {
    let mut out = Vec::new();
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    let flush = |rows: &mut Vec<(f64, f64, f64)>, out: &mut Vec<Path2D>| -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        if rows.len() < 2 {
            return Err(Error::Input("a CSV path block needs at least two rows".into()));
        }
        let t0 = rows[0].0;
        let dt = rows[1].0 - t0;
        if !(dt > 0.0) {
            return Err(Error::Input(format!("non-increasing times in CSV path near t={t0}")));
        }
        for (k, row) in rows.iter().enumerate() {
            let expected = t0 + k as f64 * dt;
            if (row.0 - expected).abs() > 1e-6 * dt.max(expected.abs() * 1e-9) + 1e-9 * dt {
                return Err(Error::Input(format!("non-uniform time grid at row {k}: t={}", row.0)));
            }
        }
        out.push(Path2D::new(dt, t0, rows.iter().map(|r| (r.1, r.2)).collect())?);
        rows.clear();
        Ok(())
    };
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            flush(&mut rows, &mut out)?;
            continue;
        }
        if line.starts_with('t') || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(|f| f.trim().parse::<f64>());
        let mut next = || -> Result<f64> {
            fields
                .next()
                .ok_or_else(|| Error::Input(format!("line {}: expected three columns", lineno + 1)))?
                .map_err(|e| Error::Input(format!("line {}: {e}", lineno + 1)))
        };
        let row = (next()?, next()?, next()?);
        rows.push(row);
    }
    flush(&mut rows, &mut out)?;
    Ok(out)
}

/// Formats a value with 17 significant digits in plain decimal notation,
/// falling back to exponent notation for very large or small magnitudes.
pub fn fmt_sig17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.16e}")
    }
}

/// Correlated Brownian motion with covariance `dt * params.cov` per step,
/// started at `start`; returns `n_steps + 1` points.
pub fn sample_correlated_bm<R: Rng + ?Sized>(
    params: &GammaParams,
    dt: f64,
    n_steps: usize,
    start: (f64, f64),
    rng: &mut R,
) -> Result<Path2D> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    if n_steps == 0 {
        return Err(Error::Parameter("n_steps must be at least 1".into()));
    }
    let chol = params.cov_cholesky();
    let sd = dt.sqrt();
    let mut points = Vec::with_capacity(n_steps + 1);
    let mut cur = start;
    points.push(cur);
    for _ in 0..n_steps {
        let (dl, dr) = chol.apply((sd * normal(rng), sd * normal(rng)));
        cur = (cur.0 + dl, cur.1 + dr);
        points.push(cur);
    }
    Ok(Path2D { dt, origin_time: 0.0, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShearDirection {
    /// Apply `Lambda`: boundary-length coordinates to cone coordinates.
    Forward,
    /// Apply `Lambda^{-1}`: cone coordinates to boundary-length coordinates.
    Inverse,
}

pub fn shear_path(params: &GammaParams, path: &Path2D, direction: ShearDirection) -> Path2D {
    let m = match direction {
        ShearDirection::Forward => params.shear,
        ShearDirection::Inverse => params.shear_inv,
    };
    Path2D {
        dt: path.dt,
        origin_time: path.origin_time,
        points: path.points.iter().map(|&p| m.apply(p)).collect(),
    }
}

const MAX_WEDGE_ATTEMPTS: usize = 1_000_000;

/// Two-sided boundary-length process of a wedge: an unconditioned correlated
/// motion for `t >= 0` and, for `t < 0`, an independent one whose `R`
/// coordinate is conditioned to stay nonnegative.
///
/// The conditioning is approximated by rejection: the backward motion starts
/// at `(0, sqrt(dt))` and must keep `R >= 0` over a window of
/// `horizon_factor * n_bwd` steps; on failure the whole window is redrawn.
/// Only the first `n_bwd` steps of the window are kept. The returned path has
/// `origin_time = -n_bwd * dt` and passes through `(0, 0)` at time zero.
pub fn sample_wedge_boundary_process<R: Rng + ?Sized>(
    params: &GammaParams,
    dt: f64,
    n_fwd: usize,
    n_bwd: usize,
    horizon_factor: f64,
    rng: &mut R,
) -> Result<Path2D> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    if n_bwd > 0 && !(horizon_factor >= 1.0) {
        return Err(Error::Parameter(format!("horizon_factor must be >= 1, got {horizon_factor}")));
    }
    let chol = params.cov_cholesky();
    let sd = dt.sqrt();

    let mut backward = Vec::with_capacity(n_bwd);
    if n_bwd > 0 {
        let window = ((n_bwd as f64) * horizon_factor).ceil() as usize;
        let offset = dt.sqrt();
        let mut attempts = 0usize;
        'attempt: loop {
            attempts += 1;
            if attempts > MAX_WEDGE_ATTEMPTS {
                return Err(Error::Sampling {
                    message: format!("R >= 0 over {window} steps never held"),
                    attempts: attempts - 1,
                    acceptance_rate: 0.0,
                });
            }
            backward.clear();
            let mut cur = (0.0, offset);
            for k in 0..window {
                let (dl, dr) = chol.apply((sd * normal(rng), sd * normal(rng)));
                cur = (cur.0 + dl, cur.1 + dr);
                if cur.1 < 0.0 {
                    continue 'attempt;
                }
                if k < n_bwd {
                    backward.push(cur);
                }
            }
            break;
        }
        // backward[k] is the position at time -(k+1) dt.
    }

    let mut points = Vec::with_capacity(n_bwd + n_fwd + 1);
    points.extend(backward.iter().rev().copied());
    let mut cur = (0.0, 0.0);
    points.push(cur);
    for _ in 0..n_fwd {
        let (dl, dr) = chol.apply((sd * normal(rng), sd * normal(rng)));
        cur = (cur.0 + dl, cur.1 + dr);
        points.push(cur);
    }
    Ok(Path2D { dt, origin_time: -(n_bwd as f64) * dt, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn sample_corr(p: &GammaParams, n: usize, seed: u64) -> (f64, [f64; 3]) {
        let mut rng = RngStream::new(seed, 0).rng();
        let path = sample_correlated_bm(p, 1e-2, n, (0.0, 0.0), &mut rng).unwrap();
        let inc: Vec<(f64, f64)> = path.increments().collect();
        let cov = stats::covariance2(&inc);
        (cov[1] / (cov[0] * cov[2]).sqrt(), cov)
    }

    #[test]
    fn increments_have_target_covariance() {
        for gamma in [0.7, std::f64::consts::SQRT_2, 1.9] {
            let p = GammaParams::new(gamma, 1.3).unwrap();
            let n = 100_000;
            let dt = 1e-2;
            let (_, cov) = sample_corr(&p, n, 5);
            let target = [dt * p.cov.0[0], dt * p.cov.0[1], dt * p.cov.0[3]];
            let rho = p.correlation();
            let var = p.a_const * p.a_const * dt;
            // Standard errors of sample (co)variances of a bivariate normal.
            let se_var = var * (2.0 / n as f64).sqrt();
            let se_cov = var * ((1.0 + rho * rho) / n as f64).sqrt();
            assert!((cov[0] - target[0]).abs() < 4.0 * se_var, "gamma {gamma}: var L");
            assert!((cov[2] - target[2]).abs() < 4.0 * se_var, "gamma {gamma}: var R");
            assert!((cov[1] - target[1]).abs() < 4.0 * se_cov, "gamma {gamma}: cov");
        }
    }

    #[test]
    fn correlation_examples() {
        let (rho, _) = sample_corr(&GammaParams::sqrt2(), 100_000, 9);
        assert!(rho.abs() < 0.01);
        let (rho, _) = sample_corr(&GammaParams::new(1.0, 1.0).unwrap(), 100_000, 9);
        assert!((rho + 0.5f64.sqrt()).abs() < 0.01, "{rho}");
    }

    #[test]
    fn deterministic_given_stream() {
        let p = GammaParams::new(1.2, 0.8).unwrap();
        let a = sample_correlated_bm(&p, 1e-3, 500, (0.5, 1.0), &mut RngStream::new(3, 1).rng()).unwrap();
        let b = sample_correlated_bm(&p, 1e-3, 500, (0.5, 1.0), &mut RngStream::new(3, 1).rng()).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.first(), (0.5, 1.0));
        assert_eq!(a.len(), 501);
        assert!(sample_correlated_bm(&p, 0.0, 5, (0.0, 0.0), &mut RngStream::new(3, 1).rng()).is_err());
        assert!(sample_correlated_bm(&p, 1e-3, 0, (0.0, 0.0), &mut RngStream::new(3, 1).rng()).is_err());
    }

    #[test]
    fn shear_round_trip_and_identity_case() {
        let p = GammaParams::new(0.9, 2.0).unwrap();
        let path = sample_correlated_bm(&p, 1e-2, 200, (1.0, -2.0), &mut RngStream::new(1, 1).rng()).unwrap();
        let back = shear_path(&p, &shear_path(&p, &path, ShearDirection::Forward), ShearDirection::Inverse);
        for (a, b) in path.points.iter().zip(&back.points) {
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
        let q = GammaParams::sqrt2();
        let same = shear_path(&q, &path, ShearDirection::Forward);
        for (a, b) in path.points.iter().zip(&same.points) {
            assert!((a.0 - b.0).abs() < 1e-13 && (a.1 - b.1).abs() < 1e-13);
        }
    }

    #[test]
    fn sheared_standard_bm_has_target_covariance() {
        // Standard planar BM is the gamma = sqrt(2), a = 1 motion.
        let p = GammaParams::new(1.6, 1.0).unwrap();
        let n = 100_000;
        let dt = 1e-2;
        let std = sample_correlated_bm(&GammaParams::sqrt2(), dt, n, (0.0, 0.0), &mut RngStream::new(2, 0).rng()).unwrap();
        let lr = shear_path(&p, &std, ShearDirection::Inverse);
        let inc: Vec<(f64, f64)> = lr.increments().collect();
        let cov = stats::covariance2(&inc);
        let se = dt * (2.0 / n as f64).sqrt();
        assert!((cov[0] - dt * p.cov.0[0]).abs() < 4.0 * se);
        assert!((cov[1] - dt * p.cov.0[1]).abs() < 4.0 * se);
        assert!((cov[2] - dt * p.cov.0[3]).abs() < 4.0 * se);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let p = GammaParams::new(1.1, 1.0).unwrap();
        let path = sample_correlated_bm(&p, 0.125, 20, (0.0, 1.0), &mut RngStream::new(8, 0).rng()).unwrap();
        let csv = path.to_csv();
        assert!(csv.starts_with("t,L,R\n"));
        let back = Path2D::from_csv(&csv).unwrap();
        assert_eq!(back, path);
        let back = Path2D::from_json(&path.to_json()).unwrap();
        assert_eq!(back, path);
        assert!(Path2D::from_csv("t,L,R\n0,1,2\n0.1,1,x\n").is_err());
    }

    #[test]
    fn wedge_backward_part_is_nonnegative() {
        let p = GammaParams::new(1.3, 1.0).unwrap();
        let mut rng = RngStream::new(4, 4).rng();
        let path = sample_wedge_boundary_process(&p, 1e-3, 300, 200, 2.0, &mut rng).unwrap();
        assert_eq!(path.len(), 501);
        assert!((path.origin_time + 0.2).abs() < 1e-12);
        assert_eq!(path.points[200], (0.0, 0.0));
        assert!(path.points[..200].iter().all(|q| q.1 >= 0.0));
        let plain = sample_wedge_boundary_process(&p, 1e-3, 50, 0, 1.0, &mut rng).unwrap();
        assert_eq!(plain.len(), 51);
        assert_eq!(plain.origin_time, 0.0);
    }

    #[test]
    fn wedge_forward_variance() {
        let p = GammaParams::new(1.0, 1.5).unwrap();
        let n = 10_000;
        let dt = 1e-2;
        let steps = 100;
        let t = dt * steps as f64;
        let l_end: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = RngStream::new(12, i as u64).rng();
                sample_wedge_boundary_process(&p, dt, steps, 0, 1.0, &mut rng).unwrap().last().0
            })
            .collect();
        let var = l_end.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let target = p.a_const * p.a_const * t;
        let se = target * (2.0 / n as f64).sqrt();
        assert!((var - target).abs() < 3.0 * se, "var {var} vs {target}");
    }

    #[test]
    fn wedge_backward_entrance_law() {
        // Conditioned to stay in {R >= 0}, R at time T is approximately
        // chi-3 distributed with scale a sqrt(T): the half-plane entrance law.
        let p = GammaParams::new(1.2, 1.0).unwrap();
        let dt = 1e-3;
        let n_bwd = 400;
        let t = n_bwd as f64 * dt;
        let ends: Vec<f64> = (0..1500)
            .map(|i| {
                let mut rng = RngStream::new(77, i).rng();
                let path = sample_wedge_boundary_process(&p, dt, 0, n_bwd, 25.0, &mut rng).unwrap();
                path.points[0].1
            })
            .collect();
        let scale = p.a_const * t.sqrt();
        let chi3_cdf = |r: f64| {
            let x = r / scale;
            libm::erf(x / 2f64.sqrt()) - (2.0 / std::f64::consts::PI).sqrt() * x * (-x * x / 2.0).exp()
        };
        let ks = stats::ks_statistic(&ends, chi3_cdf);
        assert!(ks < 0.06, "ks {ks}");
    }

    #[test]
    fn sig17_formatting() {
        assert_eq!(fmt_sig17(0.0), "0");
        assert_eq!(fmt_sig17(1.0), "1.0000000000000000");
        assert_eq!(fmt_sig17(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_sig17(-123.456).parse::<f64>().unwrap(), -123.456);
        assert_eq!(fmt_sig17(1e-9).parse::<f64>().unwrap(), 1e-9);
        assert_eq!(fmt_sig17(3.5e20).parse::<f64>().unwrap(), 3.5e20);
    }
}
