//! The LQG parameter `gamma` and every constant derived from it.
//!
//! The mating-of-trees Brownian motion has per-unit-time covariance
//! `a^2 [[1, -cos(theta)], [-cos(theta), 1]]` with `theta = pi gamma^2 / 4`.
//! The shear `Lambda` maps the first quadrant onto the cone of opening angle
//! `theta` and turns that correlated motion into standard planar Brownian
//! motion.

use std::f64::consts::PI;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A 2x2 real matrix stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [f64; 4]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([1.0, 0.0, 0.0, 1.0]);

    #[inline]
    pub fn apply(&self, v: (f64, f64)) -> (f64, f64) {
        let m = &self.0;
        (m[0] * v.0 + m[1] * v.1, m[2] * v.0 + m[3] * v.1)
    }

    pub fn mul(&self, other: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &other.0;
        Mat2([
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ])
    }

    pub fn transpose(&self) -> Mat2 {
        let m = &self.0;
        Mat2([m[0], m[2], m[1], m[3]])
    }

    pub fn det(&self) -> f64 {
        self.0[0] * self.0[3] - self.0[1] * self.0[2]
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        Some(Mat2([m[3] / d, -m[1] / d, -m[2] / d, m[0] / d]))
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `gamma` together with all derived constants. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub gamma: f64,
    /// The covariance constant `a`, left undetermined by the theory.
    pub a_const: f64,
    pub kappa: f64,
    pub kappa_prime: f64,
    pub q_coef: f64,
    /// Cone opening angle `pi gamma^2 / 4`.
    pub theta: f64,
    /// `pi / theta = 4 / gamma^2`.
    pub lambda_exp: f64,
    pub shear: Mat2,
    pub shear_inv: Mat2,
    pub cov: Mat2,
}

impl GammaParams {
    pub fn new(gamma: f64, a_const: f64) -> Result<Self> {
        derive_params(gamma, a_const)
    }

    /// `gamma = sqrt(2)`, `a = 1`: the uncorrelated case where the shear is the identity.
    pub fn sqrt2() -> Self {
        derive_params(std::f64::consts::SQRT_2, 1.0).expect("valid")
    }

    /// Correlation `-cos(theta)` of the two boundary-length coordinates.
    pub fn correlation(&self) -> f64 {
        -self.theta.cos()
    }

    /// `a sin(theta)`; `1 / (a sin(theta))` is the modulus of `Lambda (1,0)`.
    pub fn a_sin_theta(&self) -> f64 {
        self.a_const * self.theta.sin()
    }

    /// Lower-triangular Cholesky factor of `cov`.
    pub fn cov_cholesky(&self) -> Mat2 {
        let a = self.a_const;
        let rho = self.correlation();
        Mat2([a, 0.0, a * rho, a * (1.0 - rho * rho).sqrt()])
    }
}

/// Builds [`GammaParams`] for `gamma` in `(0, 2)` and `a_const > 0`.
pub fn derive_params(gamma: f64, a_const: f64) -> Result<GammaParams> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::Parameter(format!("gamma must lie in (0,2), got {gamma}")));
    }
    if !(a_const > 0.0 && a_const.is_finite()) {
        return Err(Error::Parameter(format!("a_const must be positive, got {a_const}")));
    }
    let kappa = gamma * gamma;
    let theta = PI * kappa / 4.0;
    let (s, c) = theta.sin_cos();
    let shear = Mat2([1.0 / (a_const * s), c / (s * a_const), 0.0, 1.0 / a_const]);
    // Closed form of the inverse: a [[sin, -cos], [0, 1]].
    let shear_inv = Mat2([a_const * s, -a_const * c, 0.0, a_const]);
    let a2 = a_const * a_const;
    let cov = Mat2([a2, -a2 * c, -a2 * c, a2]);
    Ok(GammaParams {
        gamma,
        a_const,
        kappa,
        kappa_prime: 16.0 / kappa,
        q_coef: gamma / 2.0 + 2.0 / gamma,
        theta,
        lambda_exp: 4.0 / kappa,
        shear,
        shear_inv,
        cov,
    })
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    gamma: f64,
    a_const: f64,
}

impl Serialize for GammaParams {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ParamsRepr { gamma: self.gamma, a_const: self.a_const }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GammaParams {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = ParamsRepr::deserialize(deserializer)?;
        derive_params(repr.gamma, repr.a_const).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn sqrt2_is_uncorrelated_identity_shear() {
        let p = derive_params(2f64.sqrt(), 1.0).unwrap();
        assert_abs_diff_eq!(p.theta, PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.lambda_exp, 2.0, epsilon = 1e-14);
        assert!(p.cov.max_abs_diff(&Mat2::IDENTITY) < 1e-15);
        assert!(p.shear.max_abs_diff(&Mat2::IDENTITY) < 1e-15);
        assert_abs_diff_eq!(p.correlation(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gamma_one() {
        let p = derive_params(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.theta, PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.lambda_exp, 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.correlation(), -(0.5f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(p.q_coef, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.kappa_prime, 16.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_out_of_range() {
        for g in [0.0, -1.0, 2.0, 2.5, f64::NAN] {
            assert!(matches!(derive_params(g, 1.0), Err(Error::Parameter(_))));
        }
        for a in [0.0, -1.0, f64::INFINITY, f64::NAN] {
            assert!(matches!(derive_params(1.0, a), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn json_recomputes_derived_fields() {
        let p = derive_params(1.3, 0.7).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"gamma":1.3,"a_const":0.7}"#);
        let back: GammaParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<GammaParams>(r#"{"gamma":3.0,"a_const":1.0}"#).is_err());
    }

    proptest! {
        #[test]
        fn shear_identities(gamma in 0.01f64..1.99, a in 0.1f64..5.0) {
            let p = derive_params(gamma, a).unwrap();
            prop_assert!(p.shear.mul(&p.shear_inv).max_abs_diff(&Mat2::IDENTITY) < 1e-12);
            let pushed = p.shear_inv.mul(&p.shear_inv.transpose());
            prop_assert!(pushed.max_abs_diff(&p.cov) < 1e-12 * a * a);
            prop_assert!((p.theta - PI * p.kappa / 4.0).abs() < 1e-15);
            prop_assert!((p.lambda_exp * p.theta - PI).abs() < 1e-12);
            let chol = p.cov_cholesky();
            prop_assert!(chol.mul(&chol.transpose()).max_abs_diff(&p.cov) < 1e-12 * a * a);
        }

        #[test]
        fn shear_maps_axes_to_cone_rays(gamma in 0.01f64..1.99, a in 0.1f64..5.0) {
            let p = derive_params(gamma, a).unwrap();
            let (x0, x1) = p.shear.apply((1.0, 0.0));
            let (y0, y1) = p.shear.apply((0.0, 1.0));
            prop_assert!(x1.abs() < 1e-15 && x0 > 0.0);
            prop_assert!((y1.atan2(y0) - p.theta).abs() < 1e-12);
            prop_assert!((x0 - 1.0 / (a * p.theta.sin())).abs() < 1e-12 * x0);
            prop_assert!(((y0 * y0 + y1 * y1).sqrt() - x0).abs() < 1e-12 * x0);
        }
    }
}
