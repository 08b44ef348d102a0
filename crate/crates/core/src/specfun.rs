//! Special functions and a general-purpose adaptive quadrature.
//!
//! The quadrature is the oracle for every closed-form identity in the crate,
//! so it deliberately shares no code with the closed forms it checks.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;

/// Regularized lower incomplete gamma `P(a, x) = (1/Gamma(a)) int_0^x y^(a-1) e^-y dy`.
pub fn regularized_lower_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(if x < a + 1.0 { gamma_series(a, x) } else { 1.0 - gamma_cont_frac(a, x) })
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`, accurate in the tail.
pub fn regularized_upper_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(if x < a + 1.0 { 1.0 - gamma_series(a, x) } else { gamma_cont_frac(a, x) })
}

/// The truncated gamma function `int_0^x y^(a-1) e^-y dy`.
///
/// Overflows to infinity once `Gamma(a)` does (a > ~171); use
/// [`ln_truncated_gamma`] there.
pub fn truncated_gamma(a: f64, x: f64) -> Result<f64> {
    Ok(ln_truncated_gamma(a, x)?.exp())
}

/// Natural log of [`truncated_gamma`]; `-inf` at `x = 0`.
pub fn ln_truncated_gamma(a: f64, x: f64) -> Result<f64> {
    let p = regularized_lower_gamma(a, x)?;
    Ok(ln_gamma(a) + p.ln())
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("incomplete gamma needs a > 0, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("incomplete gamma needs x >= 0, got {x}")));
    }
    Ok(())
}

// Series for P(a,x); converges quickly for x < a + 1.
fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

// Lentz continued fraction for Q(a,x); converges quickly for x >= a + 1.
fn gamma_cont_frac(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (h.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

/// `sin(phi)^2 / |s e^{i phi} - 1|^2`.
#[inline]
pub fn residue_integrand(s: f64, phi: f64) -> f64 {
    let sin = phi.sin();
    sin * sin / (s * s - 2.0 * s * phi.cos() + 1.0)
}

/// Closed form of `int_0^pi sin(phi)^2 / |s e^{i phi} - 1|^2 dphi`.
pub fn residue_integral(s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("residue integral needs s > 0, got {s}")));
    }
    Ok(if s <= 1.0 { PI / 2.0 } else { PI / (2.0 * s * s) })
}

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

const MAX_SEGMENTS: usize = 4000;

/// Adaptive Gauss-Kronrod (7/15) quadrature with global bisection of the
/// segment carrying the largest error estimate.
///
/// Infinite limits are handled with `x = lo + t/(1-t)` (upper) and
/// `x = hi - t/(1-t)` (lower); a doubly infinite range is split at zero.
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<QuadratureResult> {
    integrate_dyn(&f, lo, hi, tol)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<QuadratureResult> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("quadrature tolerance must be positive, got {tol}")));
    }
    if lo.is_nan() || hi.is_nan() || !(lo < hi) {
        return Err(Error::Domain(format!("quadrature needs lo < hi, got [{lo}, {hi}]")));
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => adaptive(f, lo, hi, tol),
        (true, false) => adaptive(
            &|t: f64| {
                let s = 1.0 - t;
                f(lo + t / s) / (s * s)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, true) => adaptive(
            &|t: f64| {
                let s = 1.0 - t;
                f(hi - t / s) / (s * s)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, false) => {
            let left = integrate_dyn(f, f64::NEG_INFINITY, 0.0, tol / 2.0)?;
            let right = integrate_dyn(f, 0.0, f64::INFINITY, tol / 2.0)?;
            Ok(QuadratureResult {
                value: left.value + right.value,
                abs_error_estimate: left.abs_error_estimate + right.abs_error_estimate,
                evaluations: left.evaluations + right.evaluations,
            })
        }
    }
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<QuadratureResult> {
    let mut heap = BinaryHeap::new();
    let (value, error) = gauss_kronrod(f, a, b);
    let mut total = value;
    let mut total_err = error;
    let mut evaluations = 15;
    heap.push(Segment { a, b, value, error });
    while total_err > tol {
        if heap.len() >= MAX_SEGMENTS || !total.is_finite() {
            return Err(Error::Quadrature { value: total, abs_error_estimate: total_err, evaluations });
        }
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Cannot split further in double precision.
            return Err(Error::Quadrature { value: total, abs_error_estimate: total_err, evaluations });
        }
        let (v1, e1) = gauss_kronrod(f, seg.a, mid);
        let (v2, e2) = gauss_kronrod(f, mid, seg.b);
        evaluations += 30;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
        // Re-sum occasionally so that cancellation in the running totals
        // never hides the true remaining error.
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let total_err = heap.iter().map(|s| s.error).sum::<f64>();
    Ok(QuadratureResult { value: heap.iter().map(|s| s.value).sum(), abs_error_estimate: total_err, evaluations })
}

/// Double integral over the polar sector `r in [0, inf)`, `phi in [0, phi_max]`
/// of `f(r, phi) r dr dphi`, by nested [`integrate_1d`].
pub fn integrate_polar_sector<F: Fn(f64, f64) -> f64>(f: F, phi_max: f64, tol: f64) -> Result<QuadratureResult> {
    // (inner evaluations, largest inner error estimate)
    let cell = std::cell::Cell::new((0usize, 0.0f64));
    let outer = integrate_1d(
        |phi| {
            let r = integrate_1d(|r| f(r, phi) * r, 0.0, f64::INFINITY, tol * 1e-2)
                .unwrap_or_else(|e| match e {
                    Error::Quadrature { value, abs_error_estimate, evaluations } => {
                        QuadratureResult { value, abs_error_estimate, evaluations }
                    }
                    _ => QuadratureResult { value: f64::NAN, abs_error_estimate: f64::INFINITY, evaluations: 0 },
                });
            let (n, e) = cell.get();
            cell.set((n + r.evaluations, e.max(r.abs_error_estimate)));
            r.value
        },
        0.0,
        phi_max,
        tol,
    )?;
    let (inner_evaluations, inner_err) = cell.get();
    Ok(QuadratureResult {
        value: outer.value,
        abs_error_estimate: outer.abs_error_estimate + inner_err * phi_max,
        evaluations: inner_evaluations + outer.evaluations,
    })
}
