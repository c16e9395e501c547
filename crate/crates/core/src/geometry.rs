//! Planar engagement geometry against a stationary target at the origin.
//!
//! Speed is normalized to one. Heading `theta` is counter-clockwise from the
//! x-axis; the lead angle `sigma` is measured clockwise from the line of sight
//! (pursuer to target) to the velocity vector.

use core::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::math::{atan2, cos, exp, hypot, ln, sin, wrap_angle};
use crate::{Error, Result};

/// Ranges below this are treated as "at the target".
pub const ZERO_RANGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl CartesianState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn range(&self) -> f64 {
        hypot(self.x, self.y)
    }

    /// Reflection across the x-axis.
    pub fn mirrored(&self) -> Self {
        Self { x: self.x, y: -self.y, theta: -self.theta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarState {
    pub r: f64,
    pub sigma: f64,
}

impl PolarState {
    pub fn new(r: f64, sigma: f64) -> Self {
        Self { r, sigma: wrap_angle(sigma) }
    }
}

/// Seeker field-of-view half angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovConfig {
    pub sigma_max: f64,
}

impl FovConfig {
    pub fn new(sigma_max: f64) -> Result<Self> {
        if !(sigma_max > 0.0 && sigma_max <= FRAC_PI_2) {
            return Err(Error::InvalidParameter("sigma_max must lie in (0, pi/2]"));
        }
        Ok(Self { sigma_max })
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        Self::new(deg.to_radians())
    }
}

fn check_range(r: f64) -> Result<()> {
    if r < ZERO_RANGE || !r.is_finite() {
        Err(Error::ZeroRange(r))
    } else {
        Ok(())
    }
}

/// Unit-speed kinematics: `(cos theta, sin theta, u)`.
#[inline]
pub fn kinematics_rhs(s: &CartesianState, u: f64) -> (f64, f64, f64) {
    (cos(s.theta), sin(s.theta), u)
}

/// Kinematics in polar coordinates: `(dr, dsigma)`.
pub fn polar_rhs(p: &PolarState, u: f64) -> Result<(f64, f64)> {
    check_range(p.r)?;
    Ok((-cos(p.sigma), sin(p.sigma) / p.r - u))
}

/// `(r, sin sigma, cos sigma)` of a Cartesian state, without the atan2.
pub fn lead_terms(x: f64, y: f64, theta: f64) -> Result<(f64, f64, f64)> {
    let r = hypot(x, y);
    check_range(r)?;
    let (st, ct) = (sin(theta), cos(theta));
    Ok((r, (x * st - y * ct) / r, -(x * ct + y * st) / r))
}

pub fn to_polar(s: &CartesianState) -> Result<PolarState> {
    let (r, sin_sigma, cos_sigma) = lead_terms(s.x, s.y, s.theta)?;
    Ok(PolarState { r, sigma: wrap_angle(atan2(sin_sigma, cos_sigma)) })
}

/// Line-of-sight angle: direction of the pursuer as seen from the target.
pub fn los_angle(s: &CartesianState) -> f64 {
    atan2(s.y, s.x)
}

pub fn lead_from_los(lambda: f64, theta: f64) -> f64 {
    wrap_angle(PI + lambda - theta)
}

/// Canonical pose with the pursuer on the negative x-axis at range `r`.
pub fn from_polar(p: &PolarState) -> CartesianState {
    CartesianState::new(-p.r, 0.0, -p.sigma)
}

/// `S = cos sigma_max - cos sigma`; non-positive inside the field of view.
#[inline]
pub fn constraint_value(sigma: f64, fov: &FovConfig) -> f64 {
    cos(fov.sigma_max) - cos(sigma)
}

/// Time derivative of [`constraint_value`] along the polar flow.
pub fn constraint_rate(p: &PolarState, u: f64) -> Result<f64> {
    check_range(p.r)?;
    let s = sin(p.sigma);
    Ok((s / p.r - u) * s)
}

/// Saturation function `psi(xi) = -exp(-xi)`.
#[inline]
pub fn psi(xi: f64) -> f64 {
    -exp(-xi)
}

#[inline]
pub fn psi_prime(xi: f64) -> f64 {
    exp(-xi)
}

/// Inverts `S(sigma) = psi(xi)` for a lead angle strictly inside the field of view.
pub fn xi_from_sigma(sigma: f64, fov: &FovConfig) -> Result<f64> {
    let gap = cos(sigma) - cos(fov.sigma_max);
    if sigma.abs() >= fov.sigma_max || gap <= 0.0 {
        return Err(Error::ConstraintActive { sigma, sigma_max: fov.sigma_max });
    }
    Ok(-ln(gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::{FRAC_PI_6, LN_2};
    use proptest::prelude::*;

    #[test]
    fn kinematics_axis_aligned() {
        assert_eq!(kinematics_rhs(&CartesianState::new(0.0, 0.0, 0.0), 0.0), (1.0, 0.0, 0.0));
        let (dx, dy, dth) = kinematics_rhs(&CartesianState::new(5.0, -2.0, FRAC_PI_2), 0.3);
        assert_abs_diff_eq!(dx, 0.0, epsilon = 1e-16);
        assert_eq!(dy, 1.0);
        assert_eq!(dth, 0.3);
    }

    #[test]
    fn polar_rhs_examples() {
        assert_eq!(polar_rhs(&PolarState::new(1.0, 0.0), 0.0).unwrap(), (-1.0, 0.0));
        let (dr, ds) = polar_rhs(&PolarState::new(2.0, FRAC_PI_2), 0.0).unwrap();
        assert_abs_diff_eq!(dr, 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(ds, 0.5, epsilon = 1e-16);
        let (dr, ds) = polar_rhs(&PolarState::new(1.0, FRAC_PI_6), 0.5).unwrap();
        assert_abs_diff_eq!(dr, -0.8660254037844386, epsilon = 1e-12);
        assert_abs_diff_eq!(ds, 0.0, epsilon = 1e-15);
        assert!(matches!(polar_rhs(&PolarState::new(0.0, 0.1), 0.0), Err(Error::ZeroRange(_))));
    }

    #[test]
    fn to_polar_examples() {
        let p = to_polar(&CartesianState::new(-1.0, 0.0, 0.0)).unwrap();
        assert_eq!((p.r, p.sigma), (1.0, 0.0));
        let p = to_polar(&CartesianState::new(-1.0, 0.0, FRAC_PI_6)).unwrap();
        assert_abs_diff_eq!(p.r, 1.0);
        assert_abs_diff_eq!(p.sigma, -FRAC_PI_6, epsilon = 1e-15);
        let p = to_polar(&CartesianState::new(0.0, 1.0, -FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(p.r, 1.0);
        assert_abs_diff_eq!(p.sigma, 0.0, epsilon = 1e-15);
        assert!(to_polar(&CartesianState::new(0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn lead_from_los_examples() {
        assert_eq!(lead_from_los(0.0, PI), 0.0);
        assert_abs_diff_eq!(lead_from_los(FRAC_PI_2, PI), FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn constraint_examples() {
        let fov = FovConfig::new(PI / 3.0).unwrap();
        assert_eq!(constraint_value(fov.sigma_max, &fov), 0.0);
        assert_abs_diff_eq!(constraint_value(0.0, &fov), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(constraint_value(FRAC_PI_2, &fov), 0.5, epsilon = 1e-15);

        assert_eq!(constraint_rate(&PolarState::new(3.0, 0.0), 0.7).unwrap(), 0.0);
        assert_abs_diff_eq!(constraint_rate(&PolarState::new(1.0, FRAC_PI_2), 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            constraint_rate(&PolarState::new(2.0, FRAC_PI_6), 0.25).unwrap(),
            0.0,
            epsilon = 1e-16
        );
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(psi(0.0), -1.0);
        assert_eq!(psi_prime(0.0), 1.0);
        assert!(psi(50.0) < 0.0 && psi(50.0) > -1e-20);
        assert_abs_diff_eq!(psi(LN_2), -0.5, epsilon = 1e-15);

        let fov = FovConfig::new(PI / 3.0).unwrap();
        assert_abs_diff_eq!(xi_from_sigma(0.0, &fov).unwrap(), LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(xi_from_sigma(FRAC_PI_6, &fov).unwrap(), 1.0050525385864393, epsilon = 1e-9);
        match xi_from_sigma(fov.sigma_max - 1e-9, &fov) {
            Ok(v) => assert!(v > 20.0),
            Err(e) => assert!(matches!(e, Error::ConstraintActive { .. })),
        }
        assert!(xi_from_sigma(fov.sigma_max, &fov).is_err());
    }

    #[test]
    fn fov_config_bounds() {
        assert!(FovConfig::new(0.0).is_err());
        assert!(FovConfig::new(FRAC_PI_2).is_ok());
        assert!(FovConfig::new(1.6).is_err());
    }

    /// Fixed-step RK4 on an arbitrary vector field; test-only oracle.
    fn rk4<const N: usize>(mut y: [f64; N], h: f64, n: usize, f: impl Fn(&[f64; N]) -> [f64; N]) -> [f64; N] {
        for _ in 0..n {
            let k1 = f(&y);
            let k2 = f(&core::array::from_fn(|i| y[i] + 0.5 * h * k1[i]));
            let k3 = f(&core::array::from_fn(|i| y[i] + 0.5 * h * k2[i]));
            let k4 = f(&core::array::from_fn(|i| y[i] + h * k3[i]));
            for i in 0..N {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y
    }

    proptest! {
        #[test]
        fn unit_speed(x in -10.0..10.0f64, y in -10.0..10.0f64, th in -4.0..4.0f64, u in -5.0..5.0f64) {
            let (dx, dy, _) = kinematics_rhs(&CartesianState::new(x, y, th), u);
            prop_assert!((dx * dx + dy * dy - 1.0).abs() < 1e-15);
        }

        #[test]
        fn mirror_negates_sigma(x in -10.0..10.0f64, y in -10.0..10.0f64, th in -3.0..3.0f64) {
            prop_assume!(hypot(x, y) > 1e-3);
            let s = CartesianState::new(x, y, th);
            let p = to_polar(&s).unwrap();
            let m = to_polar(&s.mirrored()).unwrap();
            prop_assume!(p.sigma.abs() < PI);
            prop_assert_eq!(m.r, p.r);
            prop_assert_eq!(m.sigma, -p.sigma);
        }

        #[test]
        fn los_and_polar_agree(x in -10.0..10.0f64, y in -10.0..10.0f64, th in -3.1..3.1f64) {
            prop_assume!(hypot(x, y) > 1e-3);
            let s = CartesianState::new(x, y, th);
            let a = lead_from_los(los_angle(&s), s.theta);
            let b = to_polar(&s).unwrap().sigma;
            let d = wrap_angle(a - b);
            prop_assert!(d.abs() < 1e-12);
        }

        #[test]
        fn saturation_inverts_constraint(frac in -0.999..0.999f64, smax in 0.1..FRAC_PI_2) {
            let fov = FovConfig::new(smax).unwrap();
            let sigma = (frac * smax).clamp(-(smax - 1e-6), smax - 1e-6);
            let xi = xi_from_sigma(sigma, &fov).unwrap();
            prop_assert!((constraint_value(sigma, &fov) - psi(xi)).abs() < 1e-12);
        }

        #[test]
        fn constraint_rate_is_derivative(r in 0.5..5.0f64, sigma in -1.4..1.4f64, u in -2.0..2.0f64) {
            let fov = FovConfig::new(1.0).unwrap();
            let h = 1e-4;
            let flow = |t: f64| {
                let end = rk4([r, sigma], t / 10.0, 10, |s| {
                    let (dr, ds) = polar_rhs(&PolarState { r: s[0], sigma: s[1] }, u).unwrap();
                    [dr, ds]
                });
                constraint_value(end[1], &fov)
            };
            let fd = (flow(h) - flow(-h)) / (2.0 * h);
            let an = constraint_rate(&PolarState::new(r, sigma), u).unwrap();
            prop_assert!((fd - an).abs() < 1e-6, "fd {} an {}", fd, an);
        }

        #[test]
        fn cartesian_and_polar_flows_agree(
            r0 in 1.5..3.0f64, sigma0 in -1.4..1.4f64, a in -1.0..1.0f64, b in -1.0..1.0f64
        ) {
            // time-varying command u(t) = a + b t over a horizon of 1; r stays above 0.5
            let n = 2000;
            let h = 1.0 / n as f64;
            let start = from_polar(&PolarState::new(r0, sigma0));
            let cart = rk4([start.x, start.y, start.theta, 0.0], h, n, |s| {
                let (dx, dy, dth) = kinematics_rhs(&CartesianState { x: s[0], y: s[1], theta: s[2] }, a + b * s[3]);
                [dx, dy, dth, 1.0]
            });
            let pol = rk4([r0, sigma0, 0.0], h, n, |s| {
                let (dr, ds) = polar_rhs(&PolarState { r: s[0], sigma: s[1] }, a + b * s[2]).unwrap();
                [dr, ds, 1.0]
            });
            let mapped = to_polar(&CartesianState { x: cart[0], y: cart[1], theta: cart[2] }).unwrap();
            prop_assert!((mapped.r - pol[0]).abs() < 1e-8);
            prop_assert!(wrap_angle(mapped.sigma - pol[1]).abs() < 1e-8);
        }
    }
}
