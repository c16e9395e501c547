//! Invariant suite run by the `audit` command.

use fovguide_core::dataset::Dataset;
use fovguide_core::math::det3;
use fovguide_core::mlp::{gradient_check, MlpModel};
use fovguide_core::pmp::{
    costate_rhs, hamiltonian, jacobian_gu, partials, stationarity, AugmentedState, ControlTriple, Costate, Epsilon,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::formats::SweepReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value <= threshold }
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value >= threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl AuditSummary {
    pub fn new(checks: Vec<Check>) -> Self {
        Self { pass: checks.iter().all(|c| c.pass), checks }
    }
}

/// Random point of the coupled system with `r` in `[0.5, 4]`.
pub fn random_point(rng: &mut ChaCha8Rng) -> (AugmentedState, Costate, ControlTriple) {
    let r = rng.gen_range(0.5..4.0);
    let lam = rng.gen_range(-3.1..3.1);
    let z = AugmentedState {
        x: -r * f64::cos(lam),
        y: -r * f64::sin(lam),
        theta: rng.gen_range(-3.1..3.1),
        xi: rng.gen_range(0.0..3.0),
    };
    let mut u = || rng.gen_range(-5.0..5.0);
    let p = Costate { px: u(), py: u(), ptheta: u(), pxi: u() };
    let c = ControlTriple { u: u(), omega: u(), mu: u() };
    (z, p, c)
}

/// Largest `|det_fd - (exp(-2 xi) + eps sin^2 sigma)| / max(1, closed form)` and the smallest
/// determinant. `g` is affine in the controls, so unit-step differences are exact up to rounding.
pub fn jacobian_determinant(n: usize, seed: u64, eps: Epsilon) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut smallest) = (0.0f64, f64::INFINITY);
    for _ in 0..n {
        let (z, p, c) = random_point(&mut rng);
        let g = |c: ControlTriple| stationarity(&z, &p, &c, eps).expect("r > 0");
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let (mut hi, mut lo) = (c.to_array(), c.to_array());
            hi[j] += 1.0;
            lo[j] -= 1.0;
            let (gh, gl) = (g(ControlTriple::from_array(hi)), g(ControlTriple::from_array(lo)));
            for i in 0..3 {
                jac[i][j] = 0.5 * (gh[i] - gl[i]);
            }
        }
        let det = det3(&jac);
        let r = z.x.hypot(z.y);
        let sin_sigma = (z.x * z.theta.sin() - z.y * z.theta.cos()) / r;
        let closed = (-2.0 * z.xi).exp() + eps.get() * sin_sigma * sin_sigma;
        worst = worst.max((det - closed).abs() / closed.max(1.0));
        smallest = smallest.min(det3(&jacobian_gu(&z, eps).expect("r > 0")));
    }
    (worst, smallest)
}

fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Largest discrepancy of the analytic partials behind the costate and control-rate
/// equations against central differences, `|a - fd| / max(|a|, |fd|, 1)`.
pub fn derivative_consistency(n: usize, seed: u64, eps: Epsilon) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let (z, p, c) = random_point(&mut rng);
        let d = partials(&z, &p, &c, eps).expect("r > 0");
        let pdot = costate_rhs(&z, &p, &c).expect("r > 0");
        for j in 0..4 {
            let zj = |v: f64| {
                let mut a = z.to_array();
                a[j] = v;
                AugmentedState::from_array(a)
            };
            let pj = |v: f64| {
                let mut a = p.to_array();
                a[j] = v;
                Costate::from_array(a)
            };
            let hz = central(|v| hamiltonian(&zj(v), &p, &c, eps).expect("r > 0"), z.to_array()[j]);
            worst = worst.max(rel(d.h_z[j], hz)).max(rel(-pdot[j], hz));
            for i in 0..3 {
                let gz = central(|v| stationarity(&zj(v), &p, &c, eps).expect("r > 0")[i], z.to_array()[j]);
                let gp = central(|v| stationarity(&z, &pj(v), &c, eps).expect("r > 0")[i], p.to_array()[j]);
                worst = worst.max(rel(d.g_z[i][j], gz)).max(rel(d.g_p[i][j], gp));
            }
        }
        for j in 0..3 {
            let cj = |v: f64| {
                let mut a = c.to_array();
                a[j] = v;
                ControlTriple::from_array(a)
            };
            for i in 0..3 {
                let gu = central(|v| stationarity(&z, &p, &cj(v), eps).expect("r > 0")[i], c.to_array()[j]);
                worst = worst.max(rel(d.g_u[i][j], gu));
            }
        }
    }
    worst
}

/// Thresholds applied to every audited trajectory of a sweep.
pub fn sweep_checks(report: &SweepReport, min_success_ratio: f64) -> Vec<Check> {
    let audits: Vec<_> = report.seeds.iter().filter_map(|s| s.audit).collect();
    let fold = |f: fn(&fovguide_core::extremal::AuditReport) -> f64| audits.iter().map(f).fold(0.0f64, f64::max);
    vec![
        Check::at_least("sweep.success_ratio", report.success_ratio, min_success_ratio),
        Check::at_least("sweep.audited_fraction", audits.len() as f64 / report.seeds.len().max(1) as f64, 1.0),
        Check::at_most("sweep.max_g_residual", fold(|a| a.max_g_residual), 1e-8),
        Check::at_most("sweep.hamiltonian_drift", fold(|a| a.hamiltonian_drift), 1e-8),
        Check::at_most("sweep.replay_miss", fold(|a| a.replay_miss), 1e-6),
        Check::at_least(
            "sweep.min_fov_margin",
            audits.iter().map(|a| a.fov_margin).fold(f64::INFINITY, f64::min),
            -1e-3,
        ),
    ]
}

pub fn dataset_checks(ds: &Dataset) -> Vec<Check> {
    let valid = ds.validate().is_ok();
    let n = &ds.norm;
    let worst = ds
        .samples
        .iter()
        .map(|s| {
            let x = s.input();
            let y = n.normalize_input(x);
            let back = [n.r.denormalize(y[0]), n.sigma.denormalize(y[1]), n.t_go.denormalize(y[2])];
            (0..3).map(|i| (back[i] - x[i]).abs()).fold((n.u.denormalize(n.u.normalize(s.u)) - s.u).abs(), f64::max)
        })
        .fold(0.0f64, f64::max);
    vec![
        Check::at_least("dataset.invariants", if valid { 1.0 } else { 0.0 }, 1.0),
        Check::at_most("dataset.normalization_round_trip", worst, 1e-12),
    ]
}

/// Backprop against finite differences at `n` random normalized inputs and targets.
pub fn model_gradient(m: &MlpModel, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            gradient_check(m, x, rng.gen_range(-1.0..1.0))
        })
        .fold(0.0, f64::max)
}
