//! Field-average processes of quantum wedges, disks and thin-wedge beads:
//! variance-2 Brownian paths with drift, conditioned versions of them, and
//! log-Bessel excursions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bm::fmt_sig17;
use crate::error::{Error, Result};
use crate::params::GammaParams;
use crate::rng::{gamma, normal, poisson};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    /// Thick wedge, `s >= 0` branch only.
    ThickWedgeFwd,
    /// Thick wedge, `s < 0` branch only.
    ThickWedgeBwd,
    /// Both thick-wedge branches joined at `s = 0`.
    ThickWedge,
    DiskConditioned,
    BeadBessel,
    DiskBessel,
}

/// A sampled field-average path on the uniform grid `s_k = origin + k dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldAverageProcess {
    pub kind: ProcessKind,
    pub params: GammaParams,
    pub dt: f64,
    pub origin: f64,
    pub values: Vec<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub dimension: Option<f64>,
}

impl FieldAverageProcess {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.values.len().saturating_sub(1) as f64 * self.dt
    }

    /// Index of `s = 0`, if it lies on the grid.
    pub fn zero_index(&self) -> Option<usize> {
        let k = (-self.origin / self.dt).round();
        (k >= 0.0 && (k as usize) < self.values.len() && (self.origin + k * self.dt).abs() < 1e-9 * self.dt)
            .then_some(k as usize)
    }

    /// `(s, X)` pairs.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, &x)| (self.time(k), x))
    }

    /// Realized quadratic variation per unit time, `sum (dX)^2 / T`.
    pub fn quadratic_variation_rate(&self) -> f64 {
        let qv: f64 = self.values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        qv / self.duration()
    }

    /// CSV with header `s,X`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 40 + 4);
        out.push_str("s,X\n");
        for (s, x) in self.points() {
            out.push_str(&fmt_sig17(s));
            out.push(',');
            out.push_str(&fmt_sig17(x));
            out.push('\n');
        }
        out
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// Variance-2 Brownian motion with drift `m` from `x0`, `n` steps.
fn drifted_bm<R: Rng + ?Sized>(x0: f64, m: f64, dt: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let sd = (2.0 * dt).sqrt();
    let mut out = Vec::with_capacity(n + 1);
    let mut x = x0;
    out.push(x);
    for _ in 0..n {
        x += m * dt + sd * normal(rng);
        out.push(x);
    }
    out
}

/// Substep scale relative to the distance from zero.
const SUBSTEP_KAPPA: f64 = 0.3;
/// Length of the exact Bessel-3 entrance step, as a fraction of `dt`.
const ENTRANCE_FRACTION: f64 = 1e-6;

/// Drift of variance-2 Brownian motion with drift `m > 0` conditioned never to
/// hit zero: `m + 2 h'/h` with `h(x) = 1 - e^{-m x}`, i.e. `m coth(m x / 2)`.
#[inline]
pub fn conditioned_drift(m: f64, x: f64) -> f64 {
    let y = 0.5 * m * x;
    if y < 1e-6 {
        2.0 / x + m * y / 3.0
    } else {
        m / y.tanh()
    }
}

/// Variance-2 Brownian motion with drift `m >= 0`, started at zero and
/// conditioned to stay positive, sampled at `k dt` for `k = 0..=n`.
///
/// The motion leaves zero with an exact Bessel-3 step of length
/// `ENTRANCE_FRACTION * dt`; afterwards the h-transform SDE is integrated by
/// Euler substeps of length `min(dt, (0.3 x)^2)`, redrawing any substep that
/// would land at or below zero.
pub fn conditioned_positive_path<R: Rng + ?Sized>(m: f64, dt: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    if n == 0 {
        return out;
    }
    let h0 = ENTRANCE_FRACTION * dt;
    let chi3 = (normal(rng).powi(2) + normal(rng).powi(2) + normal(rng).powi(2)).sqrt();
    let mut x = (2.0 * h0).sqrt() * chi3;
    for k in 0..n {
        let mut remaining = if k == 0 { dt - h0 } else { dt };
        while remaining > 0.0 {
            let cap = (SUBSTEP_KAPPA * x) * (SUBSTEP_KAPPA * x);
            let h = if cap < remaining { cap } else { remaining };
            let drift = conditioned_drift(m, x);
            let sd = (2.0 * h).sqrt();
            x = loop {
                let nx = x + drift * h + sd * normal(rng);
                if nx > 0.0 {
                    break nx;
                }
            };
            remaining -= h;
            if remaining < 1e-15 * dt {
                remaining = 0.0;
            }
        }
        out.push(x);
    }
    out
}

/// Field average of a thick quantum wedge of weight parameter `alpha < Q`.
///
/// For `s >= 0` the process is variance-2 Brownian motion from 0 with drift
/// `alpha - Q`; for `s < 0`, read right to left, it is an independent one with
/// drift `Q - alpha` conditioned to stay positive. The path covers
/// `s in [-n_bwd dt, n_fwd dt]` with `X_0 = 0`.
pub fn sample_thick_wedge_average<R: Rng + ?Sized>(
    params: &GammaParams,
    alpha: f64,
    dt: f64,
    n_fwd: usize,
    n_bwd: usize,
    rng: &mut R,
) -> Result<FieldAverageProcess> {
    check_dt(dt)?;
    let q = params.q_coef;
    if !(alpha < q) || !alpha.is_finite() {
        return Err(Error::Parameter(format!("thick wedge needs alpha < Q = {q}, got {alpha}")));
    }
    let fwd = drifted_bm(0.0, alpha - q, dt, n_fwd, rng);
    let bwd = conditioned_positive_path(q - alpha, dt, n_bwd, rng);
    let mut values: Vec<f64> = bwd.into_iter().rev().collect();
    values.extend_from_slice(&fwd[1..]);
    let kind = match (n_fwd, n_bwd) {
        (_, 0) => ProcessKind::ThickWedgeFwd,
        (0, _) => ProcessKind::ThickWedgeBwd,
        _ => ProcessKind::ThickWedge,
    };
    Ok(FieldAverageProcess {
        kind,
        params: *params,
        dt,
        origin: -(n_bwd as f64) * dt,
        values,
        alpha: Some(alpha),
        beta: None,
        dimension: None,
    })
}

/// Field average of a quantum disk conditioned on `sup X >= -beta`, with the
/// supremum placed at `s = 0`.
///
/// For `s >= 0`: variance-2 Brownian motion from `-beta` with drift `gamma - Q`.
/// For `s < 0`, read right to left: the same motion conditioned to stay below
/// `-beta`. The path covers `s in [-n_each dt, n_each dt]`.
pub fn sample_disk_conditioned_average<R: Rng + ?Sized>(
    params: &GammaParams,
    beta: f64,
    dt: f64,
    n_each: usize,
    rng: &mut R,
) -> Result<FieldAverageProcess> {
    check_dt(dt)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
    }
    let m = params.q_coef - params.gamma;
    let fwd = drifted_bm(-beta, -m, dt, n_each, rng);
    let below = conditioned_positive_path(m, dt, n_each, rng);
    let mut values: Vec<f64> = below.into_iter().rev().map(|y| -beta - y).collect();
    values.extend_from_slice(&fwd[1..]);
    Ok(FieldAverageProcess {
        kind: ProcessKind::DiskConditioned,
        params: *params,
        dt,
        origin: -(n_each as f64) * dt,
        values,
        alpha: None,
        beta: Some(beta),
        dimension: None,
    })
}

/// Time-grid settings for [`sample_bessel_excursion`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselGrid {
    /// The excursion is sampled on `[t0, 1 - t0]` with `t0 = 1 / (1 + e^{u_max})`.
    pub u_max: f64,
    /// Largest step in logit time `u = log(t / (1 - t))`.
    pub du: f64,
    /// Steps are also kept below `max_log_step^2 R_t^2`, so that `log R`
    /// moves by about `max_log_step` per step at most.
    pub max_log_step: f64,
}

impl BesselGrid {
    /// Grid for `(2/gamma) log R` resampled on an output step `dt`: each step
    /// adds about `dt / 4` to the quadratic-variation clock.
    pub fn for_dt(gamma: f64, dt: f64) -> Self {
        Self { u_max: 8.0, du: dt.min(1e-2), max_log_step: (0.25 * dt * gamma * gamma / 2.0).sqrt() }
    }
}

/// Smallest step, relative to the distance to the nearer endpoint.
const MIN_RELATIVE_STEP: f64 = 1e-10;

/// Steps allowed in one excursion before giving up.
const MAX_BESSEL_STEPS: usize = 50_000_000;

/// A unit-duration Bessel excursion of dimension `delta in (0, 2)`, sampled as
/// a Bessel bridge of dimension `4 - delta` from 0 to 0.
///
/// Returns `(t_k, R_{t_k})`. The squared bridge is `(1 - t)^2 Y_{t / (1 - t)}`
/// for a squared Bessel process `Y` of dimension `d = 4 - delta` from 0, which
/// is advanced exactly: given `Y_s = y`, `Y_{s+h} = 2 h Gamma(d/2 + N)` with
/// `N ~ Poisson(y / 2h)`. Step sizes adapt to the current value but every step
/// is exact.
pub fn sample_bessel_excursion<R: Rng + ?Sized>(delta: f64, grid: BesselGrid, rng: &mut R) -> Result<Vec<(f64, f64)>> {
    if !(delta > 0.0 && delta < 2.0) {
        return Err(Error::Parameter(format!("Bessel excursion dimension must lie in (0, 2), got {delta}")));
    }
    if !(grid.u_max > 0.0 && grid.du > 0.0 && grid.max_log_step > 0.0) {
        return Err(Error::Parameter("Bessel grid needs positive u_max, du and max_log_step".into()));
    }
    let d = 4.0 - delta;
    let t0 = 1.0 / (1.0 + grid.u_max.exp());
    let t_end = 1.0 - t0;
    let mut t = t0;
    let mut s = t / (1.0 - t);
    let mut y = 2.0 * s * gamma(rng, 0.5 * d);
    let mut out = vec![(t, (1.0 - t) * y.sqrt())];
    while t < t_end {
        if out.len() > MAX_BESSEL_STEPS {
            return Err(Error::Budget { max_steps: MAX_BESSEL_STEPS, time: t, partial: None });
        }
        let r2 = (1.0 - t) * (1.0 - t) * y;
        // Dimensions just above 2 come very close to zero; the floor keeps
        // the step representable there at the cost of resolution in log R.
        let floor = MIN_RELATIVE_STEP * t.min(1.0 - t);
        let step = (grid.du * t * (1.0 - t)).min(grid.max_log_step * grid.max_log_step * r2).max(floor);
        let t_new = if t + step >= t_end { t_end } else { t + step };
        let s_new = t_new / (1.0 - t_new);
        let h = s_new - s;
        if !(h > 0.0) {
            return Err(Error::Sampling { message: "Bessel step underflow".into(), attempts: out.len(), acceptance_rate: 0.0 });
        }
        let shape = 0.5 * d + poisson(rng, y / (2.0 * h)) as f64;
        y = 2.0 * h * gamma(rng, shape);
        t = t_new;
        s = s_new;
        out.push((t, (1.0 - t) * y.sqrt()));
    }
    Ok(out)
}

/// `(2/gamma) log e` of a unit Bessel excursion `e` of the given dimension,
/// reparametrized to quadratic variation `2 ds` and resampled on `ds = dt`.
///
/// The time change is the accumulated discrete quadratic variation
/// `s_k = (1/2) sum (dX)^2`, inverted piecewise linearly. The output starts at
/// `s = 0`.
pub fn sample_bessel_excursion_average<R: Rng + ?Sized>(
    params: &GammaParams,
    dimension: f64,
    dt: f64,
    rng: &mut R,
) -> Result<FieldAverageProcess> {
    check_dt(dt)?;
    if !(dimension > 0.0) {
        return Err(Error::Parameter(format!(
            "Bessel dimension {dimension} <= 0 is unsupported: sampling the excursion measure of a \
             nonpositive-dimension Bessel process is out of scope (the disk case needs gamma > 2/sqrt(3))"
        )));
    }
    if !(dimension < 2.0) {
        return Err(Error::Parameter(format!("Bessel dimension must be below 2, got {dimension}")));
    }
    let exc = sample_bessel_excursion(dimension, BesselGrid::for_dt(params.gamma, dt), rng)?;
    let scale = 2.0 / params.gamma;
    let xs: Vec<f64> = exc.iter().map(|&(_, r)| scale * r.ln()).collect();
    let mut clock = Vec::with_capacity(xs.len());
    let mut s = 0.0;
    clock.push(0.0);
    for w in xs.windows(2) {
        s += 0.5 * (w[1] - w[0]).powi(2);
        clock.push(s);
    }
    // Read off the path at the first grid point past each clock mark, so each
    // output increment is a sum of exact increments.
    let n_out = (s / dt).floor() as usize;
    let mut values = Vec::with_capacity(n_out + 1);
    let mut j = 0;
    for k in 0..=n_out {
        let target = k as f64 * dt;
        while j + 1 < clock.len() && clock[j] < target {
            j += 1;
        }
        values.push(xs[j]);
    }
    Ok(FieldAverageProcess {
        kind: ProcessKind::BeadBessel,
        params: *params,
        dt,
        origin: 0.0,
        values,
        alpha: None,
        beta: None,
        dimension: Some(dimension),
    })
}

/// Bessel dimension of a thin-wedge bead of weight parameter `alpha`:
/// `2 + 2 (Q - alpha) / gamma`.
pub fn bead_dimension(params: &GammaParams, alpha: f64) -> f64 {
    2.0 + 2.0 * (params.q_coef - alpha) / params.gamma
}

/// Bessel dimension of the quantum disk: `3 - 4 / gamma^2`.
pub fn disk_dimension(params: &GammaParams) -> f64 {
    3.0 - 4.0 / (params.gamma * params.gamma)
}

/// Field average of a bead of a thin wedge; needs `Q < alpha < Q + gamma`.
pub fn sample_bead_average<R: Rng + ?Sized>(params: &GammaParams, alpha: f64, dt: f64, rng: &mut R) -> Result<FieldAverageProcess> {
    let delta = bead_dimension(params, alpha);
    let mut p = sample_bessel_excursion_average(params, delta, dt, rng)?;
    p.alpha = Some(alpha);
    Ok(p)
}

/// Field average of a quantum disk as a log-Bessel excursion; needs
/// `gamma > 2 / sqrt(3)`.
pub fn sample_disk_average<R: Rng + ?Sized>(params: &GammaParams, dt: f64, rng: &mut R) -> Result<FieldAverageProcess> {
    let mut p = sample_bessel_excursion_average(params, disk_dimension(params), dt, rng)?;
    p.kind = ProcessKind::DiskBessel;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::stats::{mean, ols_slope, std_error};
    use std::f64::consts::SQRT_2;

    #[test]
    fn dimensions() {
        let p = GammaParams::new(1.5, 1.0).unwrap();
        assert!((bead_dimension(&p, 2.25) - 16.0 / 9.0).abs() < 1e-12);
        assert!((bead_dimension(&p, 2.25) - 4.0 / 2.25).abs() < 1e-12);
        assert!((disk_dimension(&GammaParams::sqrt2()) - 1.0).abs() < 1e-12);
        assert!(disk_dimension(&GammaParams::new(1.1, 1.0).unwrap()) < 0.0);
    }

    #[test]
    fn conditioned_drift_limits() {
        for m in [0.1, 0.7, 2.0] {
            assert!((conditioned_drift(m, 50.0 / m) - m).abs() < 1e-12);
            let x = 1e-4;
            assert!((conditioned_drift(m, x) * x - 2.0).abs() < 1e-6);
            // m + 2 h'/h with h = 1 - exp(-m x).
            let x = 0.37;
            let h = 1.0 - (-m * x).exp();
            let direct = m + 2.0 * m * (-m * x).exp() / h;
            assert!((conditioned_drift(m, x) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn wedge_structure() {
        let p = GammaParams::sqrt2();
        let mut rng = RngStream::new(1, 0).rng();
        let w = sample_thick_wedge_average(&p, p.gamma, 1e-3, 500, 700, &mut rng).unwrap();
        assert_eq!(w.len(), 1201);
        let z = w.zero_index().unwrap();
        assert_eq!(z, 700);
        assert_eq!(w.values[z], 0.0);
        assert!(w.values[..z].iter().all(|&x| x > 0.0));
        assert!(sample_thick_wedge_average(&p, p.q_coef, 1e-3, 5, 5, &mut rng).is_err());
    }

    #[test]
    fn forward_drift_recovered() {
        let p = GammaParams::sqrt2();
        let alpha = p.gamma;
        let dt = 1e-2;
        let n = 200;
        let slopes: Vec<f64> = (0..2000u64)
            .map(|i| {
                let mut r = RngStream::new(4, 0).child(i).rng();
                let w = sample_thick_wedge_average(&p, alpha, dt, n, 0, &mut r).unwrap();
                let ts: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
                ols_slope(&ts, &w.values)
            })
            .collect();
        let target = alpha - p.q_coef;
        assert!((target + 1.0 / SQRT_2).abs() < 1e-12);
        assert!((mean(&slopes) - target).abs() < 3.0 * std_error(&slopes));
    }

    #[test]
    fn disk_conditioned_structure() {
        let p = GammaParams::new(1.2, 1.0).unwrap();
        let mut rng = RngStream::new(2, 0).rng();
        let d = sample_disk_conditioned_average(&p, 0.8, 1e-3, 400, &mut rng).unwrap();
        let z = d.zero_index().unwrap();
        assert_eq!(d.values[z], -0.8);
        assert!(d.values[..z].iter().all(|&x| x < -0.8));
        assert!(sample_disk_conditioned_average(&p, 0.0, 1e-3, 4, &mut rng).is_err());
    }

    #[test]
    fn quadratic_variation_is_two() {
        let p = GammaParams::new(1.5, 1.0).unwrap();
        let mut rng = RngStream::new(6, 0).rng();
        for dt in [1e-3, 1e-4] {
            let n = (20.0 / dt) as usize;
            let procs = [
                sample_thick_wedge_average(&p, 1.0, dt, n, n, &mut rng).unwrap(),
                sample_disk_conditioned_average(&p, 0.5, dt, n, &mut rng).unwrap(),
            ];
            for pr in procs {
                let n_inc = (pr.len() - 1) as f64;
                let tol = 6.0 * 2.0 * (2.0 / n_inc).sqrt();
                assert!((pr.quadratic_variation_rate() - 2.0).abs() < tol, "{:?} {}", pr.kind, pr.quadratic_variation_rate());
            }
        }
    }

    #[test]
    fn bessel_preconditions() {
        let p = GammaParams::new(1.0, 1.0).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        let err = sample_disk_average(&p, 1e-3, &mut rng).unwrap_err();
        assert!(format!("{err}").contains("out of scope"));
        assert!(sample_bessel_excursion_average(&p, 2.0, 1e-3, &mut rng).is_err());
        assert!(sample_bessel_excursion(0.0, BesselGrid::for_dt(1.0, 1e-3), &mut rng).is_err());
    }

    #[test]
    fn bessel_average_shape() {
        let p = GammaParams::new(1.5, 1.0).unwrap();
        let mut rng = RngStream::new(8, 0).rng();
        for _ in 0..10 {
            let b = sample_bead_average(&p, 1.5 * p.gamma, 1e-3, &mut rng).unwrap();
            assert_eq!(b.kind, ProcessKind::BeadBessel);
            let max = b.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(b.values[0] < max - 2.0 && b.values[b.len() - 1] < max - 2.0);
            let rate = b.quadratic_variation_rate();
            assert!((rate - 2.0).abs() < 0.2, "{rate}");
        }
        let d = sample_disk_average(&GammaParams::sqrt2(), 1e-3, &mut rng).unwrap();
        assert_eq!(d.kind, ProcessKind::DiskBessel);
        assert_eq!(d.dimension, Some(disk_dimension(&GammaParams::sqrt2())));
    }

    #[test]
    fn bessel_bridge_endpoints_vanish() {
        let mut rng = RngStream::new(3, 0).rng();
        let e = sample_bessel_excursion(1.5, BesselGrid { u_max: 10.0, du: 1e-2, max_log_step: 0.1 }, &mut rng).unwrap();
        assert!(e.first().unwrap().1 < 0.05);
        assert!(e.last().unwrap().1 < 0.05);
        assert!(e.iter().all(|&(_, r)| r > 0.0));
        assert!(e.windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn log_excursion_lower_near_the_ends_on_average() {
        let p = GammaParams::new(1.5, 1.0).unwrap();
        let delta = bead_dimension(&p, 1.5 * p.gamma);
        let mut rng = RngStream::new(4, 0).rng();
        let n = 200;
        let (mut ends, mut mid) = (0.0, 0.0);
        for _ in 0..n {
            let e = sample_bessel_excursion(delta, BesselGrid { u_max: 8.0, du: 1e-2, max_log_step: 0.3 }, &mut rng).unwrap();
            let log_at = |t: f64| e.iter().find(|&&(s, _)| s >= t).unwrap().1.ln();
            ends += 0.5 * (log_at(0.02) + log_at(0.98));
            mid += log_at(0.5);
        }
        // E log R(t) - E log R(1/2) = log(4 t (1 - t)) / 2 for a bridge from zero.
        let gap = (ends - mid) / n as f64;
        let expected = 0.5 * (4.0 * 0.02 * 0.98f64).ln();
        assert!((gap - expected).abs() < 0.5, "{gap} vs {expected}");
    }

    #[test]
    fn csv_header() {
        let p = GammaParams::sqrt2();
        let mut rng = RngStream::new(1, 0).rng();
        let w = sample_thick_wedge_average(&p, 1.0, 0.5, 1, 1, &mut rng).unwrap();
        let csv = w.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("s,X"));
        let first: f64 = lines.next().unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, -0.5);
        assert_eq!(csv.lines().count(), 4);
    }
}
