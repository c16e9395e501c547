//! Backward propagation of the parameterized extremal family.
//!
//! Each extremal is labelled by the terminal costate `(px, py) = alpha (cos beta,
//! sin beta)` and integrated in `tau = t_f - t` from the target outwards. The
//! terminal point itself is singular (`r = 0`), so integration starts at `tau0`
//! from a Taylor expansion of the unconstrained terminal arc.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::geometry::{lead_terms, CartesianState, FovConfig};
use crate::math::{acos, atan2, cos, exp, ln, sin, wrap_angle};
use crate::ode::{Dopri5, Tolerances};
use crate::pmp::{
    coupled_rhs, hamiltonian, newton_project, stationarity, AugmentedState, ControlTriple, Costate, Epsilon,
};
use crate::{Error, Result};

const STATE_DIM: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedParams {
    pub alpha: f64,
    pub beta: f64,
    pub sigma_max: f64,
}

impl SeedParams {
    /// `beta` may lie anywhere in `[-pi, pi]`; the sweep only uses `[0, pi]`.
    pub fn new(alpha: f64, beta: f64, sigma_max: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter("alpha must be positive and finite"));
        }
        if !(-PI..=PI).contains(&beta) {
            return Err(Error::InvalidParameter("beta must lie in [-pi, pi]"));
        }
        FovConfig::new(sigma_max)?;
        Ok(Self { alpha, beta, sigma_max })
    }

    pub fn xi_terminal(&self) -> f64 {
        -ln(1.0 - cos(self.sigma_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub eps: Epsilon,
    /// Longest backward horizon.
    pub t_bar: f64,
    /// Offset from the singular terminal point where integration starts.
    pub tau0: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Output grid spacing; accepted integrator steps shorter than this are
    /// recorded as well.
    pub sample_dtau: f64,
    /// Accepted steps between Newton re-projections of `U`; 0 disables them.
    pub reproject_every: usize,
    /// Propagation stops once the saturation state reaches this value; beyond it
    /// `omega = exp(xi) * (...)` has no significant digits left.
    pub xi_cap: f64,
    /// Event localization tolerance in `tau`.
    pub event_tol: f64,
    pub max_steps: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            eps: Epsilon::default(),
            t_bar: 4.0,
            tau0: 1e-3,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            sample_dtau: 0.005,
            reproject_every: 20,
            xi_cap: 20.0,
            event_tol: 1e-10,
            max_steps: 200_000,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0 && self.t_bar > self.tau0) {
            return Err(Error::InvalidParameter("need t_bar > tau0 > 0"));
        }
        let tol_ok = |t: f64| t > 0.0 && t <= 1e-3;
        if !(tol_ok(self.rel_tol) && tol_ok(self.abs_tol)) {
            return Err(Error::InvalidParameter("tolerances must lie in (0, 1e-3]"));
        }
        if !(self.sample_dtau > 0.0) {
            return Err(Error::InvalidParameter("sample_dtau must be positive"));
        }
        if !(self.xi_cap > self.event_tol) {
            return Err(Error::InvalidParameter("xi_cap must be positive"));
        }
        Ok(())
    }

    /// Collinearity is only checked beyond this offset; `sigma` starts at zero.
    pub fn tau_min(&self) -> f64 {
        2.0 * self.tau0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    ReachedTbar,
    /// Velocity became collinear with the line of sight; extremals past this point are not optimal.
    Collinearity,
    /// The pursuer returned to the target.
    RangeBlowup,
    /// The lead angle reached the FOV bound to within `exp(-xi_cap)`.
    SaturationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremalPoint {
    pub tau: f64,
    pub z: AugmentedState,
    pub p: Costate,
    pub u: ControlTriple,
    pub r: f64,
    pub sigma: f64,
}

impl ExtremalPoint {
    fn from_state(tau: f64, z: AugmentedState, p: Costate, u: ControlTriple) -> Result<Self> {
        let (r, s, c) = lead_terms(z.x, z.y, z.theta)?;
        Ok(Self { tau, z, p, u, r, sigma: wrap_angle(atan2(s, c)) })
    }

    pub fn cartesian(&self) -> CartesianState {
        CartesianState { x: self.z.x, y: self.z.y, theta: self.z.theta }
    }

    pub fn mirrored(&self) -> Self {
        Self { z: self.z.mirrored(), p: self.p.mirrored(), u: self.u.mirrored(), sigma: -self.sigma, ..*self }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagationStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
    /// Largest `|g|_inf` of the integrated (not yet projected) control triple.
    pub max_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalTrajectory {
    pub seed: SeedParams,
    pub points: Vec<ExtremalPoint>,
    pub termination: Termination,
    pub stats: PropagationStats,
}

impl ExtremalTrajectory {
    pub fn final_tau(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.tau)
    }

    pub fn max_abs_sigma(&self) -> f64 {
        self.points.iter().fold(0.0f64, |m, p| m.max(p.sigma.abs()))
    }

    /// `1/2 int u^2 dtau` from the target out to the last sample.
    pub fn effort(&self) -> f64 {
        let mut acc = self.terminal_arc_effort();
        for w in self.points.windows(2) {
            acc += 0.25 * (w[1].tau - w[0].tau) * (w[0].u.u * w[0].u.u + w[1].u.u * w[1].u.u);
        }
        acc
    }

    /// Regularized cost `1/2 int (u^2 + eps omega^2) dtau`.
    pub fn regularized_cost(&self, eps: Epsilon) -> f64 {
        let e = eps.get();
        let f = |p: &ExtremalPoint| p.u.u * p.u.u + e * p.u.omega * p.u.omega;
        let mut acc = self.terminal_arc_effort();
        for w in self.points.windows(2) {
            acc += 0.25 * (w[1].tau - w[0].tau) * (f(&w[0]) + f(&w[1]));
        }
        acc
    }

    // u grows linearly from zero on [0, tau0]
    fn terminal_arc_effort(&self) -> f64 {
        match self.points.first() {
            Some(p) => p.u.u * p.u.u * p.tau / 6.0,
            None => 0.0,
        }
    }

    /// Samples in decreasing `tau`, i.e. forward time order.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.points.reverse();
        out
    }

    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        out.seed.beta = -self.seed.beta;
        for p in &mut out.points {
            *p = p.mirrored();
        }
        out
    }
}

/// Exact terminal values `(Z, P, U)` at `tau = 0`.
pub fn seed_terminal(seed: &SeedParams) -> (AugmentedState, Costate, ControlTriple) {
    let z = AugmentedState { x: 0.0, y: 0.0, theta: 0.0, xi: seed.xi_terminal() };
    let p = Costate { px: seed.alpha * cos(seed.beta), py: seed.alpha * sin(seed.beta), ptheta: 0.0, pxi: 0.0 };
    (z, p, ControlTriple::default())
}

/// State at `tau0` from the expansion of the unconstrained terminal arc.
///
/// With `a = alpha sin(beta)` and `b = alpha cos(beta)`: `U = a tau + a b tau^3 / 6`,
/// `Theta = -a tau^2 / 2 - a b tau^4 / 24`, `X = -tau + a^2 tau^5 / 40`,
/// `Y = a tau^3 / 6 + a b tau^5 / 120`. The multiplier and `xi` move only at
/// higher order; `U` is then projected onto `g = 0`.
pub fn seed_taylor(seed: &SeedParams, tau0: f64, eps: Epsilon) -> Result<(AugmentedState, Costate, ControlTriple)> {
    let (z0, p0, _) = seed_terminal(seed);
    let a = p0.py;
    let b = p0.px;
    let t = tau0;
    let (t2, t3) = (t * t, t * t * t);
    let z = AugmentedState {
        x: -t + a * a * t2 * t3 / 40.0,
        y: a * t3 / 6.0 + a * b * t2 * t3 / 120.0,
        theta: -a * t2 / 2.0 - a * b * t2 * t2 / 24.0,
        xi: z0.xi,
    };
    let ptheta = a * t + a * b * t3 / 6.0;
    let p = Costate { ptheta, ..p0 };
    let u = newton_project(&z, &p, &ControlTriple { u: ptheta, omega: 0.0, mu: 0.0 }, eps)?;
    Ok((z, p, u))
}

/// `1 - |cos sigma|`: zero when the velocity is collinear with the line of sight.
pub fn collinearity_event(z: &AugmentedState) -> Result<f64> {
    let (_, _, c) = lead_terms(z.x, z.y, z.theta)?;
    Ok(1.0 - c.abs())
}

fn pack(z: &AugmentedState, p: &Costate, u: &ControlTriple) -> [f64; STATE_DIM] {
    [z.x, z.y, z.theta, z.xi, p.px, p.py, p.ptheta, p.pxi, u.u, u.omega, u.mu]
}

fn unpack(y: &[f64; STATE_DIM]) -> (AugmentedState, Costate, ControlTriple) {
    (
        AugmentedState { x: y[0], y: y[1], theta: y[2], xi: y[3] },
        Costate { px: y[4], py: y[5], ptheta: y[6], pxi: y[7] },
        ControlTriple { u: y[8], omega: y[9], mu: y[10] },
    )
}

/// Vector field of the parameterized system in `tau`: every forward-time rate negated.
fn backward_rhs(y: &[f64; STATE_DIM], eps: Epsilon) -> Result<[f64; STATE_DIM]> {
    let (z, p, u) = unpack(y);
    let (dz, dp, du) = coupled_rhs(&z, &p, &u, eps)?;
    Ok([-dz[0], -dz[1], -dz[2], -dz[3], -dp[0], -dp[1], -dp[2], -dp[3], -du[0], -du[1], -du[2]])
}

/// Smallest range accepted away from the terminal point.
const RANGE_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy)]
enum Event {
    Collinear,
    Saturation,
    Range,
}

fn event_value(ev: Event, y: &[f64; STATE_DIM], xi_cap: f64) -> f64 {
    match ev {
        // sign of sin(sigma)
        Event::Collinear => y[0] * sin(y[2]) - y[1] * cos(y[2]),
        Event::Saturation => y[3] - xi_cap,
        Event::Range => libm::hypot(y[0], y[1]) - RANGE_FLOOR,
    }
}

fn crossed(ev: Event, a: f64, b: f64) -> bool {
    match ev {
        Event::Collinear => (a > 0.0 && b <= 0.0) || (a < 0.0 && b >= 0.0),
        Event::Saturation => a < 0.0 && b >= 0.0,
        Event::Range => a > 0.0 && b <= 0.0,
    }
}

fn drift(z: &AugmentedState, p: &Costate, u: &ControlTriple, eps: Epsilon) -> f64 {
    stationarity(z, p, u, eps).map_or(f64::INFINITY, |g| g.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Integrates one extremal from `tau0` to the first of: `t_bar`, collinearity,
/// return to the target, or saturation of `xi`.
pub fn propagate(seed: &SeedParams, cfg: &PropagationConfig) -> Result<ExtremalTrajectory> {
    cfg.validate()?;
    let eps = cfg.eps;
    let (z0, p0, u0) = seed_taylor(seed, cfg.tau0, eps)?;
    let mut rhs = |_t: f64, y: &[f64; STATE_DIM]| backward_rhs(y, eps);
    let tol = Tolerances {
        rel: cfg.rel_tol,
        abs: cfg.abs_tol,
        h_max: 4.0 * cfg.sample_dtau,
        h_min: 1e-14,
        max_steps: cfg.max_steps,
    };
    let fail = |tau: f64, reason: &'static str| Error::IntegrationFailure { tau, reason };
    let y0 = pack(&z0, &p0, &u0);
    let mut solver =
        Dopri5::new(cfg.tau0, y0, cfg.t_bar, tol, &mut rhs).map_err(|_| fail(cfg.tau0, "initial evaluation failed"))?;

    let mut points = Vec::with_capacity((cfg.t_bar / cfg.sample_dtau) as usize + 2);
    points.push(ExtremalPoint::from_state(cfg.tau0, z0, p0, u0)?);
    let mut stats = PropagationStats::default();
    let mut next_k = libm::floor(cfg.tau0 / cfg.sample_dtau) as u64 + 1;
    let mut since_projection = 0usize;
    let events = [Event::Collinear, Event::Saturation, Event::Range];
    let mut prev_y = y0;
    let tau_min = cfg.tau_min();

    let termination = loop {
        let t_prev = solver.t();
        solver.step(cfg.t_bar, &mut rhs).map_err(|e| match e {
            Error::IntegrationFailure { tau, reason } => fail(tau, reason),
            _ => fail(t_prev, "right-hand side evaluation failed"),
        })?;
        let t_new = solver.t();
        let y_new = *solver.y();
        if y_new.iter().any(|v| !v.is_finite()) {
            return Err(fail(t_prev, "non-finite state"));
        }

        // earliest event inside (t_prev, t_new]
        let mut hit: Option<(f64, Event)> = None;
        for ev in events {
            let (ta, ya) = match ev {
                Event::Collinear if t_new <= tau_min => continue,
                Event::Collinear if t_prev < tau_min => (tau_min, solver.interpolate(tau_min)),
                _ => (t_prev, prev_y),
            };
            let (fa, fb) = (event_value(ev, &ya, cfg.xi_cap), event_value(ev, &y_new, cfg.xi_cap));
            if crossed(ev, fa, fb) {
                let (mut lo, mut hi) = (ta, t_new);
                while hi - lo > cfg.event_tol {
                    let mid = 0.5 * (lo + hi);
                    if crossed(ev, fa, event_value(ev, &solver.interpolate(mid), cfg.xi_cap)) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                if hit.is_none_or(|(t, _)| hi < t) {
                    hit = Some((hi, ev));
                }
            }
        }
        let t_stop = hit.map_or(t_new, |(t, _)| t);

        loop {
            let tau = next_k as f64 * cfg.sample_dtau;
            if tau > t_stop || tau > cfg.t_bar {
                break;
            }
            let y = if tau == t_new { y_new } else { solver.interpolate(tau) };
            points.push(sample(tau, &y, eps, &mut stats)?);
            next_k += 1;
        }
        // short steps mark fast command variation; keep them as extra nodes
        let last_tau = points.last().map_or(0.0, |p| p.tau);
        if hit.is_none() && t_new - t_prev < cfg.sample_dtau && t_new - last_tau > 1e-3 * cfg.sample_dtau {
            points.push(sample(t_new, &y_new, eps, &mut stats)?);
        }

        let finished = match hit {
            Some((t, ev)) => Some((
                t,
                match ev {
                    Event::Collinear => Termination::Collinearity,
                    Event::Saturation => Termination::SaturationLimit,
                    Event::Range => Termination::RangeBlowup,
                },
            )),
            None if t_new >= cfg.t_bar => Some((cfg.t_bar, Termination::ReachedTbar)),
            None => None,
        };
        if let Some((t_end, cause)) = finished {
            let last_tau = points.last().map_or(0.0, |p| p.tau);
            if t_end - last_tau > 1e-9 * t_end.max(1.0) {
                let y = if t_end == t_new { y_new } else { solver.interpolate(t_end) };
                if cause != Termination::RangeBlowup {
                    points.push(sample(t_end, &y, eps, &mut stats)?);
                }
            }
            break cause;
        }

        since_projection += 1;
        if cfg.reproject_every > 0 && since_projection >= cfg.reproject_every {
            since_projection = 0;
            let (z, p, u) = unpack(&y_new);
            stats.max_drift = stats.max_drift.max(drift(&z, &p, &u, eps));
            let u = newton_project(&z, &p, &u, eps).map_err(|_| fail(t_new, "projection failed"))?;
            let y = pack(&z, &p, &u);
            solver.reset_state(y, &mut rhs).map_err(|_| fail(t_new, "right-hand side evaluation failed"))?;
            prev_y = y;
        } else {
            prev_y = y_new;
        }
    };

    let st = solver.stats();
    stats.accepted_steps = st.accepted;
    stats.rejected_steps = st.rejected;
    stats.rhs_evals = st.evals;
    Ok(ExtremalTrajectory { seed: *seed, points, termination, stats })
}

fn sample(tau: f64, y: &[f64; STATE_DIM], eps: Epsilon, stats: &mut PropagationStats) -> Result<ExtremalPoint> {
    let (z, p, u) = unpack(y);
    stats.max_drift = stats.max_drift.max(drift(&z, &p, &u, eps));
    let u = newton_project(&z, &p, &u, eps).map_err(|_| Error::IntegrationFailure { tau, reason: "projection failed" })?;
    ExtremalPoint::from_state(tau, z, p, u)
}

/// Replays the recorded command forward in time from the deepest sample and
/// returns the terminal pose; a consistent extremal ends at the origin.
///
/// The command between samples is a cubic Hermite interpolant whose slopes come
/// from the control-rate equation; on `[0, tau0]` it is continued linearly to zero.
pub fn replay_forward(traj: &ExtremalTrajectory, eps: Epsilon) -> Result<CartesianState> {
    let pts = &traj.points;
    if pts.len() < 2 {
        return Err(Error::EmptyTrajectory);
    }
    let slopes: Vec<f64> = pts
        .iter()
        .map(|p| coupled_rhs(&p.z, &p.p, &p.u, eps).map(|(_, _, du)| -du[0]))
        .collect::<Result<_>>()?;
    let last = pts.last().unwrap();
    let mut s = [last.z.x, last.z.y, last.z.theta];
    let deriv = |s: &[f64; 3], u: f64| [cos(s[2]), sin(s[2]), u];
    const SUB: usize = 8;
    for k in (0..pts.len() - 1).rev() {
        let (a, b) = (&pts[k], &pts[k + 1]);
        let h = b.tau - a.tau;
        let hermite = |tau: f64| {
            let t = (tau - a.tau) / h;
            let (t2, t3) = (t * t, t * t * t);
            (2.0 * t3 - 3.0 * t2 + 1.0) * a.u.u
                + (t3 - 2.0 * t2 + t) * h * slopes[k]
                + (-2.0 * t3 + 3.0 * t2) * b.u.u
                + (t3 - t2) * h * slopes[k + 1]
        };
        s = rk4_segment(s, b.tau, a.tau, SUB, &hermite, &deriv);
    }
    let first = &pts[0];
    let tail = |tau: f64| first.u.u * tau / first.tau;
    s = rk4_segment(s, first.tau, 0.0, SUB, &tail, &deriv);
    Ok(CartesianState { x: s[0], y: s[1], theta: s[2] })
}

/// RK4 in forward time while `tau` runs from `tau_from` down to `tau_to`.
fn rk4_segment(
    mut s: [f64; 3],
    tau_from: f64,
    tau_to: f64,
    n: usize,
    u_of: &dyn Fn(f64) -> f64,
    f: &dyn Fn(&[f64; 3], f64) -> [f64; 3],
) -> [f64; 3] {
    let h = (tau_from - tau_to) / n as f64;
    for i in 0..n {
        let tau = tau_from - i as f64 * h;
        let k1 = f(&s, u_of(tau));
        let k2 = f(&core::array::from_fn(|j| s[j] + 0.5 * h * k1[j]), u_of(tau - 0.5 * h));
        let k3 = f(&core::array::from_fn(|j| s[j] + 0.5 * h * k2[j]), u_of(tau - 0.5 * h));
        let k4 = f(&core::array::from_fn(|j| s[j] + h * k3[j]), u_of(tau - h));
        for j in 0..3 {
            s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Largest `|g|_inf` over the stored samples.
    pub max_g_residual: f64,
    /// `max |H - H(tau0)| / (1 + |H(tau0)|)`.
    pub hamiltonian_drift: f64,
    /// Distance from the origin after [`replay_forward`].
    pub replay_miss: f64,
    /// `sigma_max - max |sigma|`.
    pub fov_margin: f64,
}

pub fn audit(traj: &ExtremalTrajectory, eps: Epsilon) -> Result<AuditReport> {
    let first = traj.points.first().ok_or(Error::EmptyTrajectory)?;
    let h0 = hamiltonian(&first.z, &first.p, &first.u, eps)?;
    let mut max_g: f64 = 0.0;
    let mut h_drift: f64 = 0.0;
    for p in &traj.points {
        max_g = max_g.max(drift(&p.z, &p.p, &p.u, eps));
        let h = hamiltonian(&p.z, &p.p, &p.u, eps)?;
        h_drift = h_drift.max((h - h0).abs() / (1.0 + h0.abs()));
    }
    let replay_miss = if traj.points.len() >= 2 {
        let end = replay_forward(traj, eps)?;
        libm::hypot(end.x, end.y)
    } else {
        0.0
    };
    Ok(AuditReport {
        max_g_residual: max_g,
        hamiltonian_drift: h_drift,
        replay_miss,
        fov_margin: traj.seed.sigma_max - traj.max_abs_sigma(),
    })
}

/// `(alpha, beta)` grid: `alpha` log-spaced over `alpha_decades` decades ending at
/// `alpha_bar`, `beta` uniform on `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub alpha_bar: f64,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub alpha_decades: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { alpha_bar: 10.0, n_alpha: 100, n_beta: 100, alpha_decades: 3.0 }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_alpha == 0 || self.n_beta == 0 {
            return Err(Error::InvalidParameter("grid dimensions must be at least 1"));
        }
        if !(self.alpha_bar > 0.0 && self.alpha_bar.is_finite()) {
            return Err(Error::InvalidParameter("alpha_bar must be positive"));
        }
        if !(self.alpha_decades >= 0.0) {
            return Err(Error::InvalidParameter("alpha_decades must be non-negative"));
        }
        Ok(())
    }

    pub fn alphas(&self) -> Vec<f64> {
        if self.n_alpha == 1 {
            return alloc::vec![self.alpha_bar];
        }
        let last = (self.n_alpha - 1) as f64;
        (0..self.n_alpha)
            .map(|i| self.alpha_bar * libm::pow(10.0, -self.alpha_decades * (last - i as f64) / last))
            .collect()
    }

    pub fn betas(&self) -> Vec<f64> {
        if self.n_beta == 1 {
            return alloc::vec![FRAC_PI_2];
        }
        let last = (self.n_beta - 1) as f64;
        (0..self.n_beta).map(|j| if j + 1 == self.n_beta { PI } else { PI * j as f64 / last }).collect()
    }

    /// Seeds in `(alpha-index, beta-index)` order.
    pub fn seeds(&self, sigma_max: f64) -> Result<Vec<(usize, usize, SeedParams)>> {
        self.validate()?;
        let betas = self.betas();
        let mut out = Vec::with_capacity(self.n_alpha * self.n_beta);
        for (i, a) in self.alphas().into_iter().enumerate() {
            for (j, &b) in betas.iter().enumerate() {
                out.push((i, j, SeedParams::new(a, b, sigma_max)?));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub alpha_index: usize,
    pub beta_index: usize,
    pub seed: SeedParams,
    pub error: alloc::string::String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepOutcome {
    /// Successful trajectories with their grid indices, in grid order.
    pub trajectories: Vec<(usize, usize, ExtremalTrajectory)>,
    pub failures: Vec<SeedFailure>,
}

impl SweepOutcome {
    pub fn success_ratio(&self) -> f64 {
        let n = self.trajectories.len() + self.failures.len();
        if n == 0 {
            0.0
        } else {
            self.trajectories.len() as f64 / n as f64
        }
    }

    /// Assembles per-seed results; the output order is the grid order whatever order they arrive in.
    pub fn assemble(mut results: Vec<(usize, usize, SeedParams, Result<ExtremalTrajectory>)>) -> Self {
        results.sort_by_key(|r| (r.0, r.1));
        let mut out = Self::default();
        for (i, j, seed, res) in results {
            match res {
                Ok(t) => out.trajectories.push((i, j, t)),
                Err(e) => out.failures.push(SeedFailure {
                    alpha_index: i,
                    beta_index: j,
                    seed,
                    error: alloc::format!("{e}"),
                }),
            }
        }
        out
    }
}

/// Sequential sweep over the grid; per-seed failures are collected, not fatal.
pub fn sweep(grid: &SweepGrid, cfg: &PropagationConfig, sigma_max: f64) -> Result<SweepOutcome> {
    cfg.validate()?;
    let results = grid.seeds(sigma_max)?.into_iter().map(|(i, j, s)| (i, j, s, propagate(&s, cfg))).collect();
    Ok(SweepOutcome::assemble(results))
}

/// Finds the extremal whose state at `tau = horizon` is `(r, sigma)` (with
/// `sigma >= 0`) by damped Newton iteration on `(ln alpha, beta)`.
///
/// Start points come from an `(alpha, beta)` scan. Near the FOV bound the
/// extremals reaching `horizon` occupy thin `beta` slivers between saturating and
/// collinear neighbours, so the scan bisects in `beta` wherever the termination
/// cause changes. Targets are kept `1e-4` rad away from the bound, where `xi` is
/// unbounded, and from `sigma = 0`, where the collinearity event fires. The
/// returned trajectory ends at `horizon`.
pub fn match_state(r: f64, sigma: f64, horizon: f64, sigma_max: f64, cfg: &PropagationConfig) -> Result<ExtremalTrajectory> {
    if !(r > 0.0 && r < horizon) {
        return Err(Error::InfeasibleQuery { range: r, reach: horizon });
    }
    let target_sigma = sigma.abs().clamp(1e-4, sigma_max - 1e-4);
    let mut cfg = *cfg;
    cfg.t_bar = horizon;
    let run = |la: f64, b: f64| -> Option<ExtremalTrajectory> {
        let seed = SeedParams::new(exp(la), b.clamp(-PI, PI), sigma_max).ok()?;
        propagate(&seed, &cfg).ok()
    };
    let resid = |t: &ExtremalTrajectory| -> Option<[f64; 2]> {
        if t.termination != Termination::ReachedTbar {
            return None;
        }
        let last = t.points.last()?;
        Some([(last.r - r) / horizon, last.sigma - target_sigma])
    };
    let norm = |e: [f64; 2]| libm::hypot(e[0], e[1]);

    const N_ALPHA: usize = 32;
    const N_BETA: usize = 96;
    let (la_lo, la_hi) = (ln(0.02), ln(400.0 / (horizon * horizon)));
    let mut candidates: Vec<(f64, f64, f64)> = Vec::new();
    for i in 0..N_ALPHA {
        let la = la_lo + (la_hi - la_lo) * i as f64 / (N_ALPHA - 1) as f64;
        let mut prev: Option<(f64, Option<Termination>)> = None;
        for j in 1..N_BETA {
            let b = PI * j as f64 / N_BETA as f64;
            let t = run(la, b);
            let cause = t.as_ref().map(|t| t.termination);
            if let Some(e) = t.as_ref().and_then(resid) {
                candidates.push((norm(e), la, b));
            }
            if let Some((pb, pc)) = prev {
                if pc != cause && pc != Some(Termination::ReachedTbar) && cause != Some(Termination::ReachedTbar) {
                    // look for a sliver reaching the horizon between the two causes
                    let (mut lo, mut hi) = (pb, b);
                    for _ in 0..20 {
                        let mid = 0.5 * (lo + hi);
                        let tm = run(la, mid);
                        match tm.as_ref().map(|t| t.termination) {
                            Some(Termination::ReachedTbar) => {
                                if let Some(e) = tm.as_ref().and_then(resid) {
                                    candidates.push((norm(e), la, mid));
                                }
                                break;
                            }
                            c if c == pc => lo = mid,
                            _ => hi = mid,
                        }
                    }
                }
            }
            prev = Some((b, cause));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    if candidates.is_empty() {
        return Err(Error::EmptySweep);
    }

    let mut best_residual = f64::INFINITY;
    for &(_, la0, b0) in candidates.iter().take(6) {
        match newton_match(la0, b0, &run, &resid) {
            Ok(t) => return Ok(t),
            Err(res) => best_residual = best_residual.min(res),
        }
    }
    Err(Error::NoConvergence { residual: best_residual, iterations: 60 })
}

fn newton_match(
    mut la: f64,
    mut b: f64,
    run: &dyn Fn(f64, f64) -> Option<ExtremalTrajectory>,
    resid: &dyn Fn(&ExtremalTrajectory) -> Option<[f64; 2]>,
) -> core::result::Result<ExtremalTrajectory, f64> {
    let norm = |e: [f64; 2]| libm::hypot(e[0], e[1]);
    let eval = |la: f64, b: f64| run(la, b).and_then(|t| resid(&t).map(|e| (e, t)));
    let (mut e, mut traj) = eval(la, b).ok_or(f64::INFINITY)?;
    for _ in 0..60 {
        let n0 = norm(e);
        if n0 < 1e-11 {
            return Ok(traj);
        }
        let h = 1e-7;
        let col = |dla: f64, db: f64| -> Option<[f64; 2]> {
            let (e1, _) = eval(la + dla, b + db)?;
            let (e0, _) = eval(la - dla, b - db)?;
            Some([(e1[0] - e0[0]) / (2.0 * h), (e1[1] - e0[1]) / (2.0 * h)])
        };
        let (ja, jb) = match (col(h, 0.0), col(0.0, h)) {
            (Some(a), Some(bb)) => (a, bb),
            _ => break,
        };
        let det = ja[0] * jb[1] - jb[0] * ja[1];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dla = -(jb[1] * e[0] - jb[0] * e[1]) / det;
        let db = -(-ja[1] * e[0] + ja[0] * e[1]) / det;
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-6 {
            if let Some((e1, t1)) = eval(la + lambda * dla, b + lambda * db) {
                if norm(e1) < n0 {
                    la += lambda * dla;
                    b += lambda * db;
                    e = e1;
                    traj = t1;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if norm(e) < 1e-8 {
        Ok(traj)
    } else {
        Err(norm(e))
    }
}

/// Lead angle of a point computed from the arccos form (always non-negative).
pub fn unsigned_lead(z: &AugmentedState) -> Result<f64> {
    let (_, _, c) = lead_terms(z.x, z.y, z.theta)?;
    Ok(acos(c.clamp(-1.0, 1.0)))
}
