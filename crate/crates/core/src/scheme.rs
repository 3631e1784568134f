//! Scalar machinery of the penalized flow: the relaxation clock `kappa`,
//! the cutoff `chi` and its derivative, and the time-dependent penalty
//! coefficient `lambda^(1 - kappa(t))`.

use std::f64::consts::PI;

use crate::error::{GlhfError, Result};

/// Start of the interpolation window of the cutoff.
pub const CHI_KNEE: f64 = 2.0;
/// End of the interpolation window; `chi` is constant from here on.
pub const CHI_CAP_START: f64 = 4.0;
/// Saturation value of the cutoff.
pub const CHI_CAP: f64 = 3.0;

/// Relaxation clock `arctan(t) / pi`.
pub fn kappa(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(GlhfError::InvalidParameter(format!(
            "kappa requires t >= 0, got {t}"
        )));
    }
    Ok(t.atan() / PI)
}

/// Time derivative of [`kappa`], `1 / (pi (1 + t^2))`.
pub fn kappa_dot(t: f64) -> f64 {
    1.0 / (PI * (1.0 + t * t))
}

/// Cutoff applied to `(|u|^2 - 1)^2`.
///
/// Identity below 2, constant 3 from 4 on, and on `[2, 4]` the quintic
/// Hermite interpolant matching `(value, slope, curvature)` of both
/// branches. With `s = (x - 2) / 2` the interpolant is
/// `2 + 2s - 2s^3 + s^4`, whose slope `(1 - s)^2 (1 + 2s)` is nonnegative.
pub fn chi(x: f64) -> f64 {
    if x < CHI_KNEE {
        x
    } else if x >= CHI_CAP_START {
        CHI_CAP
    } else {
        let s = 0.5 * (x - CHI_KNEE);
        2.0 + s * (2.0 + s * s * (-2.0 + s))
    }
}

/// Derivative of [`chi`].
pub fn chi_dot(x: f64) -> f64 {
    if x < CHI_KNEE {
        1.0
    } else if x >= CHI_CAP_START {
        0.0
    } else {
        let s = 0.5 * (x - CHI_KNEE);
        let w = 1.0 - s;
        w * w * (1.0 + 2.0 * s)
    }
}

/// Knobs of the scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeParams {
    lambda: f64,
    horizon: f64,
    dim: usize,
}

impl SchemeParams {
    /// `lambda > 1`, `horizon >= 0` (a zero horizon yields a single-slice run), `dim >= 2`.
    pub fn new(lambda: f64, horizon: f64, dim: usize) -> Result<Self> {
        if !(lambda > 1.0) || !lambda.is_finite() {
            return Err(GlhfError::InvalidParameter(format!(
                "lambda must be a finite number > 1, got {lambda}"
            )));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(GlhfError::InvalidParameter(format!(
                "time horizon T must be finite and >= 0, got {horizon}"
            )));
        }
        if dim < 2 {
            return Err(GlhfError::InvalidParameter(format!(
                "dimension d must be >= 2, got {dim}"
            )));
        }
        Ok(SchemeParams {
            lambda,
            horizon,
            dim,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        SchemeParams::new(lambda, self.horizon, self.dim)
    }

    pub fn log_lambda(&self) -> f64 {
        self.lambda.ln()
    }

    /// `lambda^(1 - kappa(t))` for `t` in `[0, T]`.
    pub fn penalty_coefficient(&self, t: f64) -> Result<f64> {
        // slack for t = m * dt landing a rounding step past T
        let slack = 1e-12 * self.horizon.max(1.0);
        if !(t >= 0.0) || t > self.horizon + slack {
            return Err(GlhfError::InvalidParameter(format!(
                "penalty coefficient requested at t = {t}, outside [0, {}]",
                self.horizon
            )));
        }
        Ok(self.lambda.powf(1.0 - kappa(t)?))
    }

    /// Pointwise penalty force `Lambda(t) chi'((|u|^2-1)^2) (|u|^2-1) u`.
    pub fn penalty_force(&self, u: &[f64], t: f64) -> Result<Vec<f64>> {
        let coeff = self.penalty_coefficient(t)?;
        let y: f64 = u.iter().map(|c| c * c).sum();
        let scale = coeff * penalty_shape(y);
        Ok(u.iter().map(|c| scale * c).collect())
    }
}

/// `chi'((y-1)^2) (y-1)` with `y = |u|^2`.
#[inline]
pub fn penalty_shape(y: f64) -> f64 {
    let m = y - 1.0;
    chi_dot(m * m) * m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_reference_values() {
        assert_eq!(kappa(0.0).unwrap(), 0.0);
        assert!((kappa(1.0).unwrap() - 0.25).abs() < 1e-16);
        let far = kappa(1e6).unwrap();
        // arctan(x) = pi/2 - 1/x + O(x^-3)
        let oracle = 0.5 - 1.0 / (1e6 * PI);
        assert!(far < 0.5);
        assert!((far - oracle).abs() < 1e-15);
        assert!(0.5 - far < 1e-6);
        assert!(kappa(-1e-3).is_err());
    }

    #[test]
    fn kappa_monotone_and_bounded() {
        let mut prev = -1.0;
        for i in 0..20_000 {
            let t = i as f64 * 0.01;
            let k = kappa(t).unwrap();
            assert!(k >= 0.0 && k < 0.5);
            assert!(k > prev);
            prev = k;
        }
    }

    #[test]
    fn kappa_dot_matches_finite_difference() {
        for &t in &[0.1, 0.5, 1.0, 3.0] {
            let h = 1e-6;
            let fd = (kappa(t + h).unwrap() - kappa(t - h).unwrap()) / (2.0 * h);
            assert!((fd - kappa_dot(t)).abs() < 1e-9);
        }
    }

    #[test]
    fn chi_branches() {
        assert_eq!(chi(1.0), 1.0);
        assert_eq!(chi(5.0), 3.0);
        assert_eq!(chi_dot(1.0), 1.0);
        assert_eq!(chi_dot(5.0), 0.0);
        // s = 1/2: 2 + 1 - 1/4 + 1/16
        assert!((chi(3.0) - 2.8125).abs() < 1e-15);
        assert!((chi_dot(3.0) - 0.5).abs() < 1e-15);
        let h = 1e-5;
        let fd = (chi(3.0 + h) - chi(3.0 - h)) / (2.0 * h);
        assert!((fd - chi_dot(3.0)).abs() < 1e-8);
    }

    #[test]
    fn chi_is_c1_at_both_knots() {
        for &knot in &[CHI_KNEE, CHI_CAP_START] {
            let mut prev_gap = f64::INFINITY;
            for k in 1..8 {
                let h = 10f64.powi(-k);
                let gap = (chi_dot(knot + h) - chi_dot(knot - h)).abs();
                assert!(gap <= prev_gap + 1e-15);
                prev_gap = gap;
                let value_gap = (chi(knot + h) - chi(knot - h)).abs();
                assert!(value_gap <= 2.0 * h + 1e-15);
            }
            assert!(prev_gap < 1e-6);
        }
    }

    #[test]
    fn chi_bounded_and_nondecreasing() {
        let mut prev = chi(0.0);
        for i in 1..=100_000 {
            let x = i as f64 * 1e-4;
            let v = chi(x);
            assert!(v <= CHI_CAP);
            assert!(v >= prev);
            assert!(chi_dot(x) >= 0.0);
            prev = v;
        }
    }

    #[test]
    fn penalty_coefficient_values() {
        let p = SchemeParams::new(100.0, 2.0, 3).unwrap();
        assert_eq!(p.penalty_coefficient(0.0).unwrap(), 100.0);
        let c1 = p.penalty_coefficient(1.0).unwrap();
        assert!((c1 - 31.622776601683793).abs() < 1e-12);
        assert!(p.penalty_coefficient(-0.1).is_err());
        assert!(p.penalty_coefficient(2.5).is_err());

        let mut prev = f64::INFINITY;
        for i in 0..=200 {
            let c = p.penalty_coefficient(i as f64 * 0.01).unwrap();
            assert!(c <= prev && c > 10.0 && c <= 100.0);
            prev = c;
        }

        let near_one = SchemeParams::new(1.0 + 1e-9, 1.0, 3).unwrap();
        assert!((near_one.penalty_coefficient(0.5).unwrap() - 1.0).abs() < 1e-8);
        assert!(SchemeParams::new(1.0, 1.0, 3).is_err());
        assert!(SchemeParams::new(10.0, 1.0, 1).is_err());
    }

    #[test]
    fn penalty_force_cases() {
        let p = SchemeParams::new(2.0, 1.0, 3).unwrap();
        let f = p.penalty_force(&[0.5, 0.0, 0.0], 0.0).unwrap();
        assert!((f[0] + 0.75).abs() < 1e-15);
        assert_eq!(&f[1..], &[0.0, 0.0]);
        assert!(p
            .penalty_force(&[0.0, 0.6, 0.8], 0.3)
            .unwrap()
            .iter()
            .all(|c| c.abs() < 1e-15));
        assert!(p
            .penalty_force(&[0.0, 0.0, 0.0], 0.3)
            .unwrap()
            .iter()
            .all(|c| *c == 0.0));
    }

    #[test]
    fn restoring_sign_inside_unit_ball() {
        for i in 0..=100 {
            let y = i as f64 / 100.0;
            assert!((y - 1.0) * y <= 0.0);
            assert!(penalty_shape(y) * y <= 0.0);
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn force_is_parallel_to_u(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, t in 0.0f64..1.0) {
                let p = SchemeParams::new(1e3, 1.0, 3).unwrap();
                let u = [a, b, c];
                let f = p.penalty_force(&u, t).unwrap();
                let cross = [
                    f[1] * u[2] - f[2] * u[1],
                    f[2] * u[0] - f[0] * u[2],
                    f[0] * u[1] - f[1] * u[0],
                ];
                let scale = f.iter().map(|x| x.abs()).fold(1.0, f64::max) * 4.0;
                for x in cross {
                    prop_assert!(x.abs() <= 1e-12 * scale);
                }
            }
        }
    }
}
