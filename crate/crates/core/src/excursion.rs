//! Brownian paths in the cone `C_theta`: run-until-exit, near-boundary to
//! boundary excursions, Shimura's entrance law and exact exit points.
//!
//! Cone-coordinate motion is standard planar Brownian motion, so that mapping
//! a path through `Lambda^{-1}` gives the correlated boundary-length process.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bm::Path2D;
use crate::cone::{BoundaryPoint, ConePoint, Side};
use crate::error::{Error, Result};
use crate::params::GammaParams;
use crate::rng::{gamma, normal, RngStream};

/// How a discretized path is checked for leaving the cone between grid times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitMonitor {
    /// Only grid points are tested.
    Discrete,
    /// Grid points are tested, and in addition each step is killed with the
    /// probability that a Brownian bridge between its endpoints crosses a
    /// boundary line, `exp(-2 d d' / dt)`.
    BridgeCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum WalkLimit {
    Steps(usize),
    Time(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Crossing {
    pub point: (f64, f64),
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Walk {
    /// Exit time if the walk left the cone, else the time simulated.
    pub elapsed: f64,
    pub exit: Option<Crossing>,
    /// Grid points (if recorded), ending with the crossing point on exit.
    pub points: Vec<(f64, f64)>,
    /// Final position: the crossing point on exit, else the last grid point.
    pub last: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
struct ConeLines {
    sin: f64,
    cos: f64,
}

impl ConeLines {
    fn new(params: &GammaParams) -> Self {
        let (sin, cos) = params.theta.sin_cos();
        Self { sin, cos }
    }

    /// Signed distances to the lines carrying the zero ray and the theta ray.
    #[inline]
    fn dists(&self, p: (f64, f64)) -> (f64, f64) {
        (p.1, p.0 * self.sin - p.1 * self.cos)
    }

    fn project_theta(&self, p: (f64, f64)) -> (f64, f64) {
        let d = p.0 * self.sin - p.1 * self.cos;
        (p.0 - d * self.sin, p.1 + d * self.cos)
    }

    /// First crossing along the segment `p -> q` when `q` lies outside.
    fn crossing(&self, p: (f64, f64), q: (f64, f64)) -> Option<(f64, Crossing)> {
        let (a0, a1) = self.dists(p);
        let (b0, b1) = self.dists(q);
        let f0 = if b0 < 0.0 { a0 / (a0 - b0) } else { f64::INFINITY };
        let f1 = if b1 < 0.0 { a1 / (a1 - b1) } else { f64::INFINITY };
        if f0.is_infinite() && f1.is_infinite() {
            return None;
        }
        let (f, side) = if f0 <= f1 { (f0, Side::AngleZero) } else { (f1, Side::AngleTheta) };
        let point = (p.0 + f * (q.0 - p.0), p.1 + f * (q.1 - p.1));
        let point = match side {
            Side::AngleZero => (point.0, 0.0),
            Side::AngleTheta => self.project_theta(point),
        };
        Some((f, Crossing { point, side }))
    }
}

/// Bridge crossing threshold: beyond this exponent the kill probability is
/// below `e^{-40}` and is not sampled.
const BRIDGE_CUTOFF: f64 = 40.0;

/// Standard Brownian motion from `start` (cone coordinates) until it leaves the
/// cone or the limit is reached.
pub(crate) fn walk_in_cone<R: Rng + ?Sized>(
    params: &GammaParams,
    start: (f64, f64),
    dt: f64,
    rng: &mut R,
    limit: WalkLimit,
    monitor: ExitMonitor,
    record: bool,
) -> Walk {
    let lines = ConeLines::new(params);
    let sd = dt.sqrt();
    let max_steps = match limit {
        WalkLimit::Steps(n) => n,
        WalkLimit::Time(t) => (t / dt - 1e-9).ceil().max(0.0) as usize,
    };
    let mut points = Vec::new();
    if record {
        points.push(start);
    }
    let mut p = start;
    let (mut d0, mut d1) = lines.dists(p);
    for k in 0..max_steps {
        let q = (p.0 + sd * normal(rng), p.1 + sd * normal(rng));
        if let Some((f, crossing)) = lines.crossing(p, q) {
            if record {
                points.push(crossing.point);
            }
            return Walk { elapsed: (k as f64 + f) * dt, exit: Some(crossing), points, last: crossing.point };
        }
        let (e0, e1) = lines.dists(q);
        if monitor == ExitMonitor::BridgeCorrected {
            let mid = (0.5 * (p.0 + q.0), 0.5 * (p.1 + q.1));
            let x0 = 2.0 * d0 * e0 / dt;
            let x1 = 2.0 * d1 * e1 / dt;
            let hit = if x0 < BRIDGE_CUTOFF && rng.random::<f64>() < (-x0).exp() {
                Some(Crossing { point: (mid.0, 0.0), side: Side::AngleZero })
            } else if x1 < BRIDGE_CUTOFF && rng.random::<f64>() < (-x1).exp() {
                Some(Crossing { point: lines.project_theta(mid), side: Side::AngleTheta })
            } else {
                None
            };
            if let Some(crossing) = hit {
                if record {
                    points.push(crossing.point);
                }
                return Walk { elapsed: (k as f64 + 0.5) * dt, exit: Some(crossing), points, last: crossing.point };
            }
        }
        p = q;
        d0 = e0;
        d1 = e1;
        if record {
            points.push(p);
        }
    }
    Walk { elapsed: max_steps as f64 * dt, exit: None, points, last: p }
}

/// A path run until it leaves the cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeExit {
    /// Cone-coordinate path; its last point is the interpolated crossing point.
    pub path: Path2D,
    /// Exit time, interpolated inside the crossing step.
    pub tau: f64,
    pub exit_point: BoundaryPoint,
}

fn boundary_point(c: &Crossing) -> BoundaryPoint {
    BoundaryPoint::new(c.point.0.hypot(c.point.1), c.side)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

fn check_interior(params: &GammaParams, z: ConePoint) -> Result<()> {
    if !z.is_interior(params) {
        return Err(Error::Domain(format!(
            "start (r={}, phi={}) is not strictly inside the cone of angle {}",
            z.r, z.phi, params.theta
        )));
    }
    Ok(())
}

/// Runs standard planar Brownian motion from `start` until it first leaves the
/// cone, with bridge-corrected exit monitoring.
///
/// Fails with [`Error::Budget`] carrying the partial path after `max_steps`.
pub fn run_until_exit<R: Rng + ?Sized>(
    params: &GammaParams,
    start: ConePoint,
    dt: f64,
    rng: &mut R,
    max_steps: usize,
) -> Result<ConeExit> {
    run_until_exit_with(params, start, dt, rng, max_steps, ExitMonitor::BridgeCorrected)
}

pub fn run_until_exit_with<R: Rng + ?Sized>(
    params: &GammaParams,
    start: ConePoint,
    dt: f64,
    rng: &mut R,
    max_steps: usize,
    monitor: ExitMonitor,
) -> Result<ConeExit> {
    check_dt(dt)?;
    check_interior(params, start)?;
    let walk = walk_in_cone(params, start.to_xy(), dt, rng, WalkLimit::Steps(max_steps), monitor, true);
    let path = Path2D { dt, origin_time: 0.0, points: walk.points };
    match walk.exit {
        Some(c) => Ok(ConeExit { path, tau: walk.elapsed, exit_point: boundary_point(&c) }),
        None => Err(Error::Budget { max_steps, time: walk.elapsed, partial: Some(Box::new(path)) }),
    }
}

/// Exit point and exit time, without storing the path. If the walk is still
/// inside after `max_steps`, returns its position then instead.
pub fn exit_point_by_walk<R: Rng + ?Sized>(
    params: &GammaParams,
    start: ConePoint,
    dt: f64,
    rng: &mut R,
    max_steps: usize,
    monitor: ExitMonitor,
) -> Result<std::result::Result<(BoundaryPoint, f64), ConePoint>> {
    check_dt(dt)?;
    check_interior(params, start)?;
    let walk = walk_in_cone(params, start.to_xy(), dt, rng, WalkLimit::Steps(max_steps), monitor, false);
    Ok(match walk.exit {
        Some(c) => Ok((boundary_point(&c), walk.elapsed)),
        None => Err(ConePoint::from_xy(walk.last.0, walk.last.1)),
    })
}

/// Draws `Z_eps` under the Shimura entrance law: Brownian motion from the
/// vertex conditioned to stay in the cone up to time `eps`.
///
/// The radial part is `sqrt(2 eps G)` with `G ~ Gamma(1 + lambda/2)`; the angle
/// has density proportional to `sin(lambda phi)` and is drawn by inversion.
pub fn sample_shimura_entrance<R: Rng + ?Sized>(params: &GammaParams, eps: f64, rng: &mut R) -> ConePoint {
    let lam = params.lambda_exp;
    let g = gamma(rng, 1.0 + lam / 2.0);
    let u: f64 = rng.random();
    let phi = ((1.0 - 2.0 * u).acos() / lam).clamp(0.0, params.theta);
    ConePoint::new((2.0 * eps * g).sqrt(), phi)
}

/// `z^lambda` for `z` in the closed cone, computed in polar form.
fn cone_power(lam: f64, z: ConePoint) -> Complex64 {
    Complex64::from_polar(z.r.powf(lam), lam * z.phi)
}

/// Exact exit point of Brownian motion started at interior `z`.
///
/// Under `w = z^lambda` the cone becomes the upper half-plane and the exit
/// point is Cauchy with location `Re w` and scale `Im w`. A draw `x > 0` maps
/// back to the zero ray at distance `x^{1/lambda}`, `x < 0` to the theta ray;
/// `x = 0` is assigned to the zero ray at the vertex.
pub fn sample_exit_point<R: Rng + ?Sized>(params: &GammaParams, z: ConePoint, rng: &mut R) -> Result<BoundaryPoint> {
    check_interior(params, z)?;
    let lam = params.lambda_exp;
    let w = cone_power(lam, z);
    let u: f64 = rng.random();
    let x = w.re + w.im * (PI * (u - 0.5)).tan();
    Ok(if x > 0.0 {
        BoundaryPoint::new(x.powf(1.0 / lam), Side::AngleZero)
    } else if x < 0.0 {
        BoundaryPoint::new((-x).powf(1.0 / lam), Side::AngleTheta)
    } else {
        BoundaryPoint::new(0.0, Side::AngleZero)
    })
}

/// How the exit-through-the-target event is imposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// Doob transform by the harmonic measure of the target segment; a run is
    /// rejected only if the discretized path leaves elsewhere.
    HTransform,
    /// Plain Brownian motion, accepted iff it leaves through the target.
    Rejection,
}

/// Settings for [`sample_approx_excursion_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionConfig {
    pub delta: f64,
    pub c: f64,
    pub dt: f64,
    pub max_attempts: usize,
    /// Per-attempt cap on grid steps. Attempts hitting it count as rejected.
    pub max_steps: usize,
    pub conditioning: Conditioning,
    pub record_path: bool,
}

impl ExcursionConfig {
    pub fn new(delta: f64, c: f64, dt: f64) -> Self {
        Self {
            delta,
            c,
            dt,
            max_attempts: 1_000_000,
            max_steps: 200_000_000,
            conditioning: Conditioning::HTransform,
            record_path: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dt(self.dt)?;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Parameter(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.c.is_finite() && self.delta < self.c) {
            return Err(Error::Parameter(format!("need 0 < delta < c, got delta={}, c={}", self.delta, self.c)));
        }
        if self.max_attempts == 0 || self.max_steps == 0 {
            return Err(Error::Parameter("max_attempts and max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// An accepted approximate excursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionSample {
    /// Boundary-length path `(L, R)` from `(0, c)` to the exit on `R = 0`;
    /// empty when paths are not recorded.
    pub lr_path: Option<Path2D>,
    /// Exit time, interpolated within the final step.
    pub duration: f64,
    /// Number of runs drawn, including the accepted one.
    pub accepted_after: usize,
}

/// The Doob transform by the harmonic measure of a segment `[lo, hi]` of the
/// zero ray (cone coordinates relative to the vertex).
struct SegmentHarmonic {
    lam: f64,
    int_lam: Option<i32>,
    scale: f64,
    a: f64,
    lo: f64,
    hi: f64,
    lines: ConeLines,
}

impl SegmentHarmonic {
    fn new(params: &GammaParams, lo: f64, hi: f64) -> Self {
        let lam = params.lambda_exp;
        let rounded = lam.round();
        let int_lam = if (lam - rounded).abs() < 1e-12 && rounded <= 64.0 { Some(rounded as i32) } else { None };
        Self { lam, int_lam, scale: hi, a: (lo / hi).powf(lam), lo, hi, lines: ConeLines::new(params) }
    }

    /// Drift `grad log h`, where `h = V / pi` and
    /// `V = arg((w - 1) / (w - a))`, `w = (zeta / scale)^lambda`.
    #[inline]
    fn drift(&self, p: (f64, f64)) -> Option<(f64, f64)> {
        let z = Complex64::new(p.0 / self.scale, p.1 / self.scale);
        let (w, w_over_z) = match self.int_lam {
            Some(n) => {
                let zm = z.powi(n - 1);
                (zm * z, zm)
            }
            None => {
                let r = z.norm();
                let phi = z.im.atan2(z.re).max(0.0);
                let w = Complex64::from_polar(r.powf(self.lam), self.lam * phi);
                (w, Complex64::from_polar(r.powf(self.lam - 1.0), (self.lam - 1.0) * phi))
            }
        };
        let wa = w - self.a;
        let wb = w - 1.0;
        // (w - 1) / (w - a) = 1 - eps with eps = (1 - a) / (w - a).
        let eps = (1.0 - self.a) / wa;
        let v = (-eps.im).atan2(1.0 - eps.re);
        let g = w_over_z * self.lam * (1.0 - self.a) / (wb * wa);
        let k = 1.0 / (self.scale * v);
        let d = (g.im * k, g.re * k);
        if v > 0.0 && d.0.is_finite() && d.1.is_finite() {
            Some(d)
        } else {
            None
        }
    }

    /// Distance to the repelling boundary: the cone boundary minus the target.
    #[inline]
    fn repel_dist(&self, p: (f64, f64)) -> f64 {
        let (x, y) = p;
        let d_theta = x * self.lines.sin - y * self.lines.cos;
        let d_zero = if x < 0.0 {
            x.hypot(y)
        } else if x < self.lo || x > self.hi {
            y
        } else {
            (x - self.lo).hypot(y).min((x - self.hi).hypot(y))
        };
        d_theta.min(d_zero)
    }
}

/// Substep scale relative to the distance from the repelling boundary.
const SUBSTEP_KAPPA: f64 = 0.3;
/// Substeps allowed per grid step before an attempt is abandoned.
const MAX_SUBSTEPS_PER_STEP: usize = 100_000;

enum Attempt {
    Accepted { tau: f64, points: Vec<(f64, f64)> },
    Rejected,
}

fn conditioned_attempt<R: Rng + ?Sized>(
    h: &SegmentHarmonic,
    start: (f64, f64),
    dt: f64,
    max_steps: usize,
    record: bool,
    rng: &mut R,
) -> Attempt {
    let mut points = Vec::new();
    if record {
        points.push(start);
    }
    let mut p = start;
    let mut t = 0.0;
    for _ in 0..max_steps {
        let mut remaining = dt;
        let mut substeps = 0usize;
        while remaining > 0.0 {
            substeps += 1;
            if substeps > MAX_SUBSTEPS_PER_STEP {
                return Attempt::Rejected;
            }
            let ell = h.repel_dist(p);
            let cap = (SUBSTEP_KAPPA * ell) * (SUBSTEP_KAPPA * ell);
            let step = if cap < remaining { cap } else { remaining };
            let Some((bx, by)) = h.drift(p) else { return Attempt::Rejected };
            let sd = step.sqrt();
            let q = (p.0 + bx * step + sd * normal(rng), p.1 + by * step + sd * normal(rng));
            if let Some((f, crossing)) = h.lines.crossing(p, q) {
                let x = crossing.point.0;
                if crossing.side == Side::AngleZero && x >= h.lo && x <= h.hi {
                    if record {
                        points.push(crossing.point);
                    }
                    return Attempt::Accepted { tau: t + f * step, points };
                }
                return Attempt::Rejected;
            }
            // Bridge crossing of the target between the two endpoints.
            let x0 = 2.0 * p.1 * q.1 / step;
            if x0 < BRIDGE_CUTOFF {
                let mx = 0.5 * (p.0 + q.0);
                if mx >= h.lo && mx <= h.hi && rng.random::<f64>() < (-x0).exp() {
                    if record {
                        points.push((mx, 0.0));
                    }
                    return Attempt::Accepted { tau: t + 0.5 * step, points };
                }
            }
            p = q;
            t += step;
            remaining -= step;
            if remaining < 1e-15 * dt {
                remaining = 0.0;
            }
        }
        if record {
            points.push(p);
        }
    }
    Attempt::Rejected
}

fn rejection_attempt<R: Rng + ?Sized>(
    params: &GammaParams,
    lo: f64,
    hi: f64,
    start: (f64, f64),
    dt: f64,
    max_steps: usize,
    record: bool,
    rng: &mut R,
) -> Attempt {
    let walk = walk_in_cone(params, start, dt, rng, WalkLimit::Steps(max_steps), ExitMonitor::BridgeCorrected, record);
    match walk.exit {
        Some(c) if c.side == Side::AngleZero && c.point.0 >= lo && c.point.0 <= hi => {
            Attempt::Accepted { tau: walk.elapsed, points: walk.points }
        }
        _ => Attempt::Rejected,
    }
}

/// Approximate boundary-to-boundary excursion with the default h-transform
/// conditioning; see [`sample_approx_excursion_with`].
pub fn sample_approx_excursion<R: Rng + ?Sized>(
    params: &GammaParams,
    delta: f64,
    c: f64,
    dt: f64,
    rng: &mut R,
    max_attempts: usize,
) -> Result<ExcursionSample> {
    let cfg = ExcursionConfig { max_attempts, ..ExcursionConfig::new(delta, c, dt) };
    sample_approx_excursion_with(params, &cfg, rng)
}

/// Correlated Brownian motion `(L, R)` from `(0, c)`, conditioned to leave
/// `[-delta, inf) x [0, inf)` through the bottom edge with `L in [delta, 2 delta]`.
///
/// In cone coordinates relative to the vertex `Lambda(-delta, 0)` the region is
/// the cone, the start is `Lambda(delta, c)` and the target is the segment
/// `[2 delta |x|, 3 delta |x|]` of the zero ray, `|x| = 1 / (a sin theta)`.
pub fn sample_approx_excursion_with<R: Rng + ?Sized>(
    params: &GammaParams,
    cfg: &ExcursionConfig,
    rng: &mut R,
) -> Result<ExcursionSample> {
    cfg.validate()?;
    let unit = 1.0 / params.a_sin_theta();
    let (lo, hi) = (2.0 * cfg.delta * unit, 3.0 * cfg.delta * unit);
    let start = params.shear.apply((cfg.delta, cfg.c));
    let harmonic = SegmentHarmonic::new(params, lo, hi);
    for attempt in 1..=cfg.max_attempts {
        let outcome = match cfg.conditioning {
            Conditioning::HTransform => conditioned_attempt(&harmonic, start, cfg.dt, cfg.max_steps, cfg.record_path, rng),
            Conditioning::Rejection => rejection_attempt(params, lo, hi, start, cfg.dt, cfg.max_steps, cfg.record_path, rng),
        };
        if let Attempt::Accepted { tau, points } = outcome {
            let lr_path = if cfg.record_path {
                let points = points
                    .into_iter()
                    .map(|p| {
                        let (l, r) = params.shear_inv.apply(p);
                        (l - cfg.delta, r)
                    })
                    .collect();
                Some(Path2D { dt: cfg.dt, origin_time: 0.0, points })
            } else {
                None
            };
            return Ok(ExcursionSample { lr_path, duration: tau, accepted_after: attempt });
        }
    }
    Err(Error::Sampling {
        message: format!("no excursion accepted in {} attempts", cfg.max_attempts),
        attempts: cfg.max_attempts,
        acceptance_rate: 0.0,
    })
}

/// `n` independent excursions; replica `i` uses `rng.child(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionBatch {
    pub samples: Vec<ExcursionSample>,
    pub attempts: usize,
}

impl ExcursionBatch {
    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.samples.len() as f64 / self.attempts as f64
        }
    }

    pub fn durations(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.duration).collect()
    }
}

pub fn sample_excursions(params: &GammaParams, cfg: &ExcursionConfig, n: usize, rng: &RngStream) -> Result<ExcursionBatch> {
    cfg.validate()?;
    let samples = (0..n as u64)
        .into_par_iter()
        .map(|i| sample_approx_excursion_with(params, cfg, &mut rng.child(i).rng()))
        .collect::<Result<Vec<_>>>()?;
    let attempts = samples.iter().map(|s| s.accepted_after).sum();
    Ok(ExcursionBatch { samples, attempts })
}
