//! Closed-loop engagement against a stationary target at the origin.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::extremal::{match_state, PropagationConfig};
use crate::geometry::{to_polar, CartesianState};
use crate::guidance::{GuidanceLaw, GuidanceQuery};
use crate::math::{atan2, cos, hypot, sin};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Initial range, m.
    pub r0: f64,
    /// Initial signed lead angle, rad.
    pub sigma0: f64,
    /// Pursuer speed, m/s.
    pub speed: f64,
    /// Desired impact time, s.
    pub t_f: f64,
    pub sigma_max: f64,
    /// Command limit, m/s^2.
    pub a_max: f64,
    /// Command update period (zero-order hold), s.
    pub dt_guidance: f64,
    pub dt_integrate: f64,
    pub capture_radius: f64,
    /// The run is abandoned this long after `t_f`.
    pub timeout_margin: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            r0: 10_000.0,
            sigma0: 30f64.to_radians(),
            speed: 250.0,
            t_f: 60.0,
            sigma_max: 60f64.to_radians(),
            a_max: 100.0,
            dt_guidance: 0.01,
            dt_integrate: 0.001,
            capture_radius: 0.5,
            timeout_margin: 5.0,
        }
    }
}

impl Scenario {
    /// Pursuer at 10 km with a 30 deg lead angle, 250 m/s.
    pub fn case_a(sigma_max_deg: f64, t_f: f64) -> Self {
        Self { sigma_max: sigma_max_deg.to_radians(), t_f, ..Self::default() }
    }

    /// Scenario for an arbitrary pose; the target stays at the origin.
    pub fn from_cartesian(pose: &CartesianState, base: &Scenario) -> Result<Self> {
        let p = to_polar(pose)?;
        Ok(Self { r0: p.r, sigma0: p.sigma, ..*base })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.speed > 0.0 && self.t_f > 0.0) {
            return Err(Error::InvalidParameter("r0, speed and t_f must be positive"));
        }
        if !(self.dt_integrate > 0.0 && self.dt_integrate <= self.dt_guidance) {
            return Err(Error::InvalidParameter("need 0 < dt_integrate <= dt_guidance"));
        }
        if !(self.a_max > 0.0 && self.capture_radius > 0.0 && self.timeout_margin >= 0.0) {
            return Err(Error::InvalidParameter("a_max, capture radius and timeout must be positive"));
        }
        if !(self.sigma_max > 0.0 && self.sigma_max <= PI / 2.0) {
            return Err(Error::InvalidParameter("sigma_max must lie in (0, pi/2]"));
        }
        Ok(())
    }

    /// Canonical pose: range `r0` on the negative x axis, heading `-sigma0`.
    pub fn initial_pose(&self) -> CartesianState {
        CartesianState { x: -self.r0, y: 0.0, theta: -self.sigma0 }
    }
}

/// Admissible impact times for a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBounds {
    /// Straight-line time `r0 / speed`.
    pub lower_bound: f64,
    /// Turn toward the target at `a_max` until collinear, then fly straight.
    pub min_time: f64,
    /// `r0 / (speed cos(sigma_max))`: range decreases at least at `speed cos(sigma_max)` inside the FOV.
    pub max_time: f64,
    /// The initial lead angle is inside the FOV.
    pub fov_feasible: bool,
}

impl TimeBounds {
    pub fn admits(&self, t_f: f64) -> bool {
        self.fov_feasible && t_f >= self.min_time && t_f <= self.max_time
    }
}

pub fn time_bounds(sc: &Scenario) -> TimeBounds {
    let lower = sc.r0 / sc.speed;
    let mut min_time = lower;
    if sc.sigma0 != 0.0 {
        // fastest alignment, integrated in the polar form
        let (mut r, mut s, mut t) = (sc.r0, sc.sigma0.abs(), 0.0);
        let turn = sc.a_max / sc.speed;
        let h = 1e-3;
        while s > 0.0 && r > sc.capture_radius {
            let ds = sc.speed * sin(s) / r - turn;
            if ds >= 0.0 {
                // the turn rate cannot overcome the line-of-sight rate
                break;
            }
            r -= h * sc.speed * cos(s);
            s += h * ds;
            t += h;
        }
        min_time = t + r.max(0.0) / sc.speed;
    }
    TimeBounds {
        lower_bound: lower,
        min_time,
        max_time: sc.r0 / (sc.speed * cos(sc.sigma_max)),
        fov_feasible: sc.sigma0.abs() <= sc.sigma_max,
    }
}

/// Shortest feasible impact time (see [`TimeBounds::min_time`]).
pub fn min_time(sc: &Scenario) -> f64 {
    time_bounds(sc).min_time
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub sigma: f64,
    pub r: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Intercept,
    NoIntercept,
    /// Refused: `t_f` outside [`TimeBounds`]; nothing was flown.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub law: String,
    pub outcome: Outcome,
    /// Capture time, or the abandon time without intercept, s.
    pub impact_time: f64,
    pub miss_distance: f64,
    /// `1/2 int a^2 dt` over the stored history (trapezoidal), m^2/s^3.
    pub effort_j: f64,
    pub sigma_peak: f64,
    pub command_peak: f64,
    /// Largest change of command between guidance cycles, m/s^2.
    pub command_smoothness: f64,
    pub speed: f64,
    pub bounds: TimeBounds,
    pub history: Vec<HistoryPoint>,
}

impl SimResult {
    pub fn impact_time_error(&self, sc: &Scenario) -> f64 {
        self.impact_time - sc.t_f
    }
}

fn rk4(s: [f64; 3], a: f64, v: f64, h: f64) -> [f64; 3] {
    let f = |s: &[f64; 3]| [v * cos(s[2]), v * sin(s[2]), a / v];
    let k1 = f(&s);
    let k2 = f(&core::array::from_fn(|i| s[i] + 0.5 * h * k1[i]));
    let k3 = f(&core::array::from_fn(|i| s[i] + 0.5 * h * k2[i]));
    let k4 = f(&core::array::from_fn(|i| s[i] + h * k3[i]));
    core::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn lead(s: &[f64; 3]) -> f64 {
    to_polar(&CartesianState { x: s[0], y: s[1], theta: s[2] }).map_or(0.0, |p| p.sigma)
}

/// Flies the scenario with `law` and reports the engagement metrics.
pub fn run(sc: &Scenario, law: &mut dyn GuidanceLaw) -> Result<SimResult> {
    sc.validate()?;
    let bounds = time_bounds(sc);
    let mut res = SimResult {
        law: law.name(),
        outcome: Outcome::NoIntercept,
        impact_time: 0.0,
        miss_distance: sc.r0,
        effort_j: 0.0,
        sigma_peak: sc.sigma0.abs(),
        command_peak: 0.0,
        command_smoothness: 0.0,
        speed: sc.speed,
        bounds,
        history: Vec::new(),
    };
    if !bounds.admits(sc.t_f) {
        res.outcome = Outcome::Infeasible;
        return Ok(res);
    }
    let sub = libm::round(sc.dt_guidance / sc.dt_integrate).max(1.0) as usize;
    let h = sc.dt_guidance / sub as f64;
    let t_end = sc.t_f + sc.timeout_margin;
    let p0 = sc.initial_pose();
    let mut s = [p0.x, p0.y, p0.theta];
    let mut prev_a: Option<f64> = None;
    let mut cycle: u64 = 0;
    'flight: loop {
        let t = cycle as f64 * sc.dt_guidance;
        if t > t_end {
            res.impact_time = t;
            break;
        }
        let r = hypot(s[0], s[1]);
        let sigma = lead(&s);
        let q = GuidanceQuery { r, sigma, t_go: sc.t_f - t, speed: sc.speed };
        let a = law.command(&q);
        let a = if a.is_finite() { a.clamp(-sc.a_max, sc.a_max) } else { 0.0 };
        res.history.push(HistoryPoint { t, x: s[0], y: s[1], theta: s[2], sigma, r, a });
        res.command_peak = res.command_peak.max(a.abs());
        if let Some(p) = prev_a {
            res.command_smoothness = res.command_smoothness.max((a - p).abs());
        }
        prev_a = Some(a);
        for i in 0..sub {
            let next = rk4(s, a, sc.speed, h);
            let (r0, r1) = (hypot(s[0], s[1]), hypot(next[0], next[1]));
            res.miss_distance = res.miss_distance.min(r1);
            res.sigma_peak = res.sigma_peak.max(lead(&next).abs());
            if r1 < sc.capture_radius {
                let frac = if r0 > r1 { (r0 - sc.capture_radius) / (r0 - r1) } else { 1.0 };
                let t_hit = t + (i as f64 + frac.clamp(0.0, 1.0)) * h;
                let hit: [f64; 3] = core::array::from_fn(|k| s[k] + frac.clamp(0.0, 1.0) * (next[k] - s[k]));
                res.history.push(HistoryPoint {
                    t: t_hit,
                    x: hit[0],
                    y: hit[1],
                    theta: hit[2],
                    sigma: lead(&hit),
                    r: sc.capture_radius,
                    a,
                });
                res.outcome = Outcome::Intercept;
                res.impact_time = t_hit;
                break 'flight;
            }
            s = next;
        }
        cycle += 1;
    }
    res.effort_j = effort_of(&res.history);
    Ok(res)
}

/// `1/2` times the trapezoidal integral of `a^2` over a history.
pub fn effort_of(history: &[HistoryPoint]) -> f64 {
    0.5 * history.windows(2).map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].a * w[0].a + w[1].a * w[1].a)).sum::<f64>()
}

/// The extremal through the scenario's initial state, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedReference {
    /// `1/2 int a^2 dt`, m^2/s^3.
    pub effort_j: f64,
    /// Time scale `t_f / t_ref` of the match.
    pub k: f64,
    /// Forward-time samples in the scenario frame; `a` is the extremal command.
    pub history: Vec<HistoryPoint>,
}

/// Matches the scenario to the unit-speed extremal family at horizon `t_ref`.
///
/// With `k = t_f / t_ref` the physical command is `a = (speed / k) u` and
/// `dt = k dtau`, so the effort is `speed^2 / k` times the normalized one.
pub fn matched_reference(sc: &Scenario, t_ref: f64, cfg: &PropagationConfig) -> Result<MatchedReference> {
    sc.validate()?;
    let k = sc.t_f / t_ref;
    let ext = match_state(sc.r0 / (sc.speed * k), sc.sigma0, t_ref, sc.sigma_max, cfg)?;
    let last = ext.points.last().ok_or(Error::EmptyTrajectory)?;
    let ext = if (last.sigma < 0.0) != (sc.sigma0 < 0.0) && sc.sigma0 != 0.0 { ext.mirrored() } else { ext };
    let last = ext.points[ext.points.len() - 1];
    // rotate so the initial point sits on the negative x axis, like the scenario pose
    let phi = PI - atan2(last.z.y, last.z.x);
    let (c, s) = (cos(phi), sin(phi));
    let scale = sc.speed * k;
    let history = ext
        .points
        .iter()
        .rev()
        .map(|p| HistoryPoint {
            t: sc.t_f - k * p.tau,
            x: scale * (c * p.z.x - s * p.z.y),
            y: scale * (s * p.z.x + c * p.z.y),
            theta: p.z.theta + phi,
            sigma: p.sigma,
            r: scale * p.r,
            a: sc.speed / k * p.u.u,
        })
        .collect();
    Ok(MatchedReference { effort_j: sc.speed * sc.speed / k * ext.effort(), k, history })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub law: String,
    pub outcome: Outcome,
    pub impact_time: f64,
    pub impact_time_error: f64,
    pub sigma_peak: f64,
    pub effort_j: f64,
    pub command_peak: f64,
    pub command_smoothness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub scenario: Scenario,
    pub rows: Vec<ComparisonRow>,
}

pub fn compare(sc: &Scenario, laws: &mut [&mut dyn GuidanceLaw]) -> Result<ComparisonTable> {
    if laws.is_empty() {
        return Err(Error::InvalidParameter("compare needs at least one law"));
    }
    let mut rows = Vec::with_capacity(laws.len());
    for law in laws.iter_mut() {
        let r = run(sc, &mut **law)?;
        rows.push(ComparisonRow {
            law: r.law.clone(),
            outcome: r.outcome,
            impact_time: r.impact_time,
            impact_time_error: r.impact_time_error(sc),
            sigma_peak: r.sigma_peak,
            effort_j: r.effort_j,
            command_peak: r.command_peak,
            command_smoothness: r.command_smoothness,
        });
    }
    Ok(ComparisonTable { scenario: *sc, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::ProportionalNavigation;

    struct Constant(f64);
    impl GuidanceLaw for Constant {
        fn name(&self) -> String {
            String::from("constant")
        }
        fn command(&mut self, _: &GuidanceQuery) -> f64 {
            self.0
        }
    }

    fn collision() -> Scenario {
        Scenario { sigma0: 0.0, t_f: 40.0, ..Scenario::default() }
    }

    #[test]
    fn collision_course_flies_straight() {
        let sc = collision();
        let res = run(&sc, &mut Constant(0.0)).unwrap();
        assert_eq!(res.outcome, Outcome::Intercept);
        assert!((res.impact_time - sc.t_f).abs() <= sc.dt_guidance);
        assert!(res.effort_j < 1e-3);
        let pn = run(&sc, &mut ProportionalNavigation { gain: 3.0, a_max: 100.0 }).unwrap();
        assert!(pn.effort_j < 1e-3);
    }

    #[test]
    fn effort_matches_history() {
        let sc = Scenario::case_a(60.0, 45.0);
        let res = run(&sc, &mut ProportionalNavigation { gain: 4.0, a_max: 100.0 }).unwrap();
        assert_eq!(res.outcome, Outcome::Intercept);
        let h = &res.history;
        let mut acc = 0.0;
        for k in 1..h.len() {
            acc += (h[k].t - h[k - 1].t) * (h[k].a.powi(2) + h[k - 1].a.powi(2)) / 4.0;
        }
        assert!((acc - res.effort_j).abs() <= 1e-9 * acc);
    }

    #[test]
    fn mirror_symmetry() {
        let sc = Scenario::case_a(60.0, 45.0);
        let mut pn = ProportionalNavigation { gain: 3.0, a_max: 100.0 };
        let a = run(&sc, &mut pn).unwrap();
        let b = run(&Scenario { sigma0: -sc.sigma0, ..sc }, &mut pn).unwrap();
        assert_eq!(a.impact_time, b.impact_time);
        assert!((a.effort_j - b.effort_j).abs() <= 1e-9 * a.effort_j);
        for (p, q) in a.history.iter().zip(&b.history) {
            assert_eq!(p.a, -q.a);
            assert_eq!(p.y, -q.y);
        }
    }

    #[test]
    fn step_size_convergence() {
        let sc = Scenario::case_a(60.0, 45.0);
        let mut pn = ProportionalNavigation { gain: 3.0, a_max: 100.0 };
        let a = run(&sc, &mut pn).unwrap();
        let b = run(&Scenario { dt_integrate: 0.0005, ..sc }, &mut pn).unwrap();
        assert!((a.impact_time - b.impact_time).abs() < 1e-4);
        assert!((a.effort_j - b.effort_j).abs() < 1e-3 * a.effort_j);
    }

    #[test]
    fn time_bounds_examples() {
        let sc = collision();
        let b = time_bounds(&sc);
        assert_eq!(b.min_time, sc.r0 / sc.speed);
        assert_eq!(b.lower_bound, 40.0);
        let tight = Scenario::case_a(30.0, 44.0);
        let b = time_bounds(&tight);
        assert!(b.fov_feasible && b.min_time >= b.lower_bound);
        assert!(b.admits(44.0));
        let out = Scenario { sigma0: 0.6, ..tight };
        assert!(!time_bounds(&out).fov_feasible);
    }

    #[test]
    fn early_deadline_is_refused() {
        let sc = Scenario::case_a(60.0, 30.0);
        let res = run(&sc, &mut Constant(0.0)).unwrap();
        assert_eq!(res.outcome, Outcome::Infeasible);
        assert!(res.history.is_empty());
    }

    #[test]
    fn cartesian_helper() {
        let base = Scenario::default();
        let sc = Scenario::from_cartesian(&base.initial_pose(), &base).unwrap();
        assert!((sc.r0 - base.r0).abs() < 1e-9 && (sc.sigma0 - base.sigma0).abs() < 1e-12);
    }

    #[test]
    fn pn_time_to_go_predicts_pn_flight() {
        let sc = Scenario { t_f: 60.0, ..Scenario::default() };
        for n in [3.0, 4.0] {
            let res = run(&sc, &mut ProportionalNavigation { gain: n, a_max: 100.0 }).unwrap();
            let predicted = crate::guidance::pn_time_to_go(sc.r0, sc.sigma0, sc.speed, n);
            assert!((res.impact_time - predicted).abs() < 0.02, "{n}: {} vs {predicted}", res.impact_time);
        }
    }

    struct Guarded(crate::guidance::FovGuard, f64);
    impl GuidanceLaw for Guarded {
        fn name(&self) -> String {
            String::from("guarded")
        }
        fn command(&mut self, q: &GuidanceQuery) -> f64 {
            // a constant negative command keeps widening the lead angle
            self.0.filter(q, self.1, q.t_go.max(1.0) / 2.5)
        }
    }

    #[test]
    fn fov_guard_holds_the_bound() {
        // enough authority that the guard is never cut by the command limit
        let sc = Scenario { sigma_max: 45f64.to_radians(), t_f: 50.0, a_max: 1e4, ..Scenario::default() };
        let guard = crate::guidance::FovGuard::new(sc.sigma_max, 20.0).unwrap();
        let unguarded = run(&sc, &mut Constant(-20.0)).unwrap();
        assert!(unguarded.sigma_peak > sc.sigma_max + 0.1);
        let res = run(&sc, &mut Guarded(guard, -20.0)).unwrap();
        let peak = res.history.iter().map(|h| h.sigma.abs()).fold(0.0, f64::max);
        assert!(peak <= sc.sigma_max + 1e-3, "{}", peak.to_degrees());
    }

    #[test]
    fn matched_reference_case_a() {
        let sc = Scenario::case_a(60.0, 60.0);
        let m = matched_reference(&sc, 2.5, &PropagationConfig::default()).unwrap();
        // the extremal through (10 km, 30 deg) with 60 s to go
        assert!((m.effort_j - 5932.8).abs() < 1.0, "{}", m.effort_j);
        assert_eq!(m.k, 24.0);
        let (first, last) = (m.history[0], m.history[m.history.len() - 1]);
        // the extremal starts tau0 before impact
        let tail = m.k * PropagationConfig::default().tau0;
        assert!(first.t.abs() < 1e-9 && (last.t - (60.0 - tail)).abs() < 1e-9);
        assert!((first.x + sc.r0).abs() < 1e-3 && first.y.abs() < 1e-3, "{first:?}");
        assert!((first.sigma - sc.sigma0).abs() < 2e-4);
        assert!((last.r - sc.speed * tail).abs() < 1e-3 * sc.speed * tail);
        assert!(m.history.iter().all(|h| h.sigma.abs() <= sc.sigma_max + 1e-6));
        let trapezoid = effort_of(&m.history);
        assert!((trapezoid - m.effort_j).abs() < 1e-3 * m.effort_j);
    }

    #[test]
    fn compare_rows() {
        let sc = collision();
        let mut a = Constant(0.0);
        let mut b = ProportionalNavigation { gain: 3.0, a_max: 100.0 };
        let table = compare(&sc, &mut [&mut a, &mut b]).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert!(table.rows.iter().all(|r| r.outcome == Outcome::Intercept && r.effort_j < 1e-3));
    }
}
