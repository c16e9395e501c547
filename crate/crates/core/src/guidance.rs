//! Feedback laws producing a lateral acceleration from the engagement state.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::math::sin;
use crate::mlp::MlpModel;
use crate::{Error, Result};

/// Physical engagement state seen by a guidance law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceQuery {
    /// Range to the target, m.
    pub r: f64,
    /// Signed lead angle, rad.
    pub sigma: f64,
    /// Time to go until the desired impact, s.
    pub t_go: f64,
    /// Pursuer speed, m/s.
    pub speed: f64,
}

impl GuidanceQuery {
    pub fn new(r: f64, sigma: f64, t_go: f64, speed: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite() && sigma.is_finite() && t_go.is_finite()) {
            return Err(Error::InvalidParameter("query fields must be finite with r >= 0"));
        }
        if !(speed > 0.0) {
            return Err(Error::InvalidParameter("speed must be positive"));
        }
        Ok(Self { r, sigma, t_go, speed })
    }

    /// The target is reachable in `t_go` at the current speed.
    pub fn is_feasible(&self) -> bool {
        self.t_go > 0.0 && self.t_go * self.speed >= self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    /// Normalized time-to-go at which the network is always queried.
    pub t_ref: f64,
    /// Horizon of the training data.
    pub t_bar: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self { t_ref: 2.5, t_bar: 4.0 }
    }
}

impl ScalingParams {
    pub fn new(t_ref: f64, t_bar: f64) -> Result<Self> {
        if !(t_ref > 0.0 && t_ref <= t_bar) {
            return Err(Error::InvalidParameter("need 0 < t_ref <= t_bar"));
        }
        Ok(Self { t_ref, t_bar })
    }
}

/// A query mapped onto the unit-speed problem with time-to-go `t_ref`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledQuery {
    pub k: f64,
    pub r_n: f64,
    pub sigma: f64,
    pub t_ref: f64,
    /// Physical acceleration per unit normalized command.
    pub gain: f64,
}

/// With `k = t_go / t_ref`, the engagement is the unit-speed problem shrunk by
/// `speed k` in space and `k` in time: `r_n = r / (speed k)` and `a = (speed / k) u_n`.
pub fn scale_query(q: &GuidanceQuery, sp: &ScalingParams) -> Result<ScaledQuery> {
    if !q.is_feasible() {
        return Err(Error::InfeasibleQuery { range: q.r, reach: q.t_go.max(0.0) * q.speed });
    }
    let k = q.t_go / sp.t_ref;
    Ok(ScaledQuery { k, r_n: q.r / (q.speed * k), sigma: q.sigma, t_ref: sp.t_ref, gain: q.speed / k })
}

/// Network command folded to `sigma >= 0` and restored by the sign of `sigma`,
/// which makes it exactly odd in `sigma`; clamped to `+- a_max`.
pub fn nn_command(m: &MlpModel, q: &GuidanceQuery, sp: &ScalingParams, a_max: f64) -> Result<f64> {
    let s = scale_query(q, sp)?;
    let u = m.forward([s.r_n, s.sigma.abs(), s.t_ref]);
    let a = s.gain * u;
    let a = if s.sigma < 0.0 { -a } else { a };
    Ok(a.clamp(-a_max, a_max))
}

/// Proportional navigation `a = N speed lambda_dot` with `lambda_dot = speed sin(sigma) / r`.
pub fn pn_command(q: &GuidanceQuery, gain: f64) -> Result<f64> {
    if q.r < crate::geometry::ZERO_RANGE {
        return Err(Error::ZeroRange(q.r));
    }
    Ok(gain * q.speed * q.speed * sin(q.sigma) / q.r)
}

/// Anything that turns an engagement state into a lateral acceleration
/// (m/s^2, positive turns the velocity counter-clockwise).
pub trait GuidanceLaw {
    fn name(&self) -> String;
    fn command(&mut self, q: &GuidanceQuery) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProportionalNavigation {
    pub gain: f64,
    pub a_max: f64,
}

impl GuidanceLaw for ProportionalNavigation {
    fn name(&self) -> String {
        alloc::format!("PN(N={})", self.gain)
    }

    fn command(&mut self, q: &GuidanceQuery) -> f64 {
        pn_command(q, self.gain).map_or(0.0, |a| a.clamp(-self.a_max, self.a_max))
    }
}

/// Exact time-to-go of PN with gain `n > 1` from range `r` and lead `sigma`.
/// Under PN `r` is proportional to `sin(sigma)^(1 / (n - 1))`, which turns the flight time into
/// `r / (speed (n - 1) sin(s0)^m) int_0^s0 sin(s)^(m - 1) ds` with `m = 1 / (n - 1)`;
/// the substitution `s = s0 w^(1/m)` removes the endpoint singularity.
pub fn pn_time_to_go(r: f64, sigma: f64, speed: f64, n: f64) -> f64 {
    let s0 = sigma.abs();
    if s0 < 1e-9 {
        return r / speed;
    }
    let m = 1.0 / (n - 1.0);
    let f = |w: f64| {
        if w == 0.0 {
            return 1.0;
        }
        // integrand divided by its w -> 0 limit s0^m / m
        let s = s0 * crate::math::powf(w, 1.0 / m);
        crate::math::powf(sin(s) / s, m - 1.0)
    };
    let k = 64;
    let h = 1.0 / k as f64;
    let mut acc = f(0.0) + f(1.0);
    for i in 1..k {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    let integral = acc * h / 3.0 * crate::math::powf(s0, m) / m;
    r * integral / (speed * (n - 1.0) * crate::math::powf(sin(s0), m))
}

/// PN with an impact-time bias: `a = N speed^2 sin(sigma) / r - sgn(sigma) k speed^3 e / r^2`,
/// where `e = t_go - pn_time_to_go` is the time surplus. A positive surplus widens the lead angle.
/// The bias grows like `1 / r^2`, so a residual surplus near impact would saturate the command.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactTimePn {
    pub gain: f64,
    pub bias_gain: f64,
    pub a_max: f64,
    /// The bias is dropped once `t_go` falls below this.
    pub terminal_t_go: f64,
    pub fov_guard: Option<FovGuard>,
}

impl GuidanceLaw for ImpactTimePn {
    fn name(&self) -> String {
        alloc::format!("ITPN(N={},k={})", self.gain, self.bias_gain)
    }

    fn command(&mut self, q: &GuidanceQuery) -> f64 {
        let Ok(pn) = pn_command(q, self.gain) else { return 0.0 };
        let e = if q.t_go < self.terminal_t_go { 0.0 } else { q.t_go - pn_time_to_go(q.r, q.sigma, q.speed, self.gain) };
        let sgn = if q.sigma < 0.0 { -1.0 } else { 1.0 };
        let a = pn - sgn * self.bias_gain * q.speed * q.speed * q.speed * e / (q.r * q.r);
        let a = match &self.fov_guard {
            Some(g) => g.filter(q, a, q.r / q.speed),
            None => a,
        };
        a.clamp(-self.a_max, self.a_max)
    }
}

/// Keeps `|sigma|` below `sigma_max` by bounding its growth rate:
/// `d|sigma|/dt <= (rate / k) (sigma_max - |sigma|)`, with `k` the time scale of the query.
/// Commands already satisfying the bound pass through unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovGuard {
    pub sigma_max: f64,
    pub rate: f64,
}

impl FovGuard {
    pub fn new(sigma_max: f64, rate: f64) -> Result<Self> {
        if !(sigma_max > 0.0 && sigma_max < core::f64::consts::FRAC_PI_2) || !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter("fov guard needs sigma_max in (0, pi/2) and rate > 0"));
        }
        Ok(Self { sigma_max, rate })
    }

    pub fn filter(&self, q: &GuidanceQuery, a: f64, k: f64) -> f64 {
        if q.r < crate::geometry::ZERO_RANGE || !(k > 0.0) {
            return a;
        }
        let s = q.sigma.abs();
        // sigma_dot = speed sin(sigma) / r - a / speed for sigma > 0
        let floor = q.speed * q.speed * sin(s) / q.r - self.rate / k * q.speed * (self.sigma_max - s);
        if q.sigma >= 0.0 {
            a.max(floor)
        } else {
            a.min(-floor)
        }
    }
}

/// The network law. Queries it cannot answer (target out of reach in the
/// remaining time, or time-to-go exhausted) are flown with PN instead, as is
/// the final `terminal_t_go` seconds of flight, where the scaled query
/// approaches the singular terminal point and the gain `speed / k` diverges.
#[derive(Debug, Clone)]
pub struct NeuralLaw<'a> {
    pub model: &'a MlpModel,
    pub scaling: ScalingParams,
    pub a_max: f64,
    pub fallback: ProportionalNavigation,
    pub terminal_t_go: f64,
    pub fov_guard: Option<FovGuard>,
    /// Number of commands served by the fallback.
    pub fallbacks: usize,
}

impl<'a> NeuralLaw<'a> {
    pub fn new(model: &'a MlpModel, scaling: ScalingParams, a_max: f64) -> Self {
        Self { model, scaling, a_max, fallback: ProportionalNavigation { gain: 3.0, a_max }, terminal_t_go: 2.0, fov_guard: None, fallbacks: 0 }
    }

    pub fn with_fov_guard(mut self, guard: FovGuard) -> Self {
        self.fov_guard = Some(guard);
        self
    }
}

impl GuidanceLaw for NeuralLaw<'_> {
    fn name(&self) -> String {
        String::from("NN")
    }

    fn command(&mut self, q: &GuidanceQuery) -> f64 {
        if q.t_go < self.terminal_t_go {
            return self.fallback.command(q);
        }
        match nn_command(self.model, q, &self.scaling, self.a_max) {
            Ok(a) if a.is_finite() => match &self.fov_guard {
                Some(g) => g.filter(q, a, q.t_go / self.scaling.t_ref).clamp(-self.a_max, self.a_max),
                None => a,
            },
            _ => {
                self.fallbacks += 1;
                self.fallback.command(q)
            }
        }
    }
}
