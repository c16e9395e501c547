use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use fovguide_core::extremal::{propagate, ExtremalPoint, ExtremalTrajectory, PropagationConfig, SeedParams, Termination};
use fovguide_core::pmp::Epsilon;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn at(traj: &ExtremalTrajectory, tau: f64) -> Option<&ExtremalPoint> {
    traj.points.iter().find(|p| (p.tau - tau).abs() < 1e-9)
}

fn components(p: &ExtremalPoint) -> [f64; 11] {
    let (z, q, u) = (p.z.to_array(), p.p.to_array(), p.u.to_array());
    [z[0], z[1], z[2], z[3], q[0], q[1], q[2], q[3], u[0], u[1], u[2]]
}

#[test]
fn terminal_offset_insensitivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 10 {
        let seed = SeedParams::new(uniform(&mut rng, 0.1, 10.0), uniform(&mut rng, 0.0, PI), FRAC_PI_3).unwrap();
        let runs: Vec<_> = [1e-4, 1e-3, 1e-2]
            .iter()
            .map(|&tau0| propagate(&seed, &PropagationConfig { tau0, t_bar: 1.0, ..Default::default() }).unwrap())
            .collect();
        if runs.iter().any(|t| t.termination != Termination::ReachedTbar) {
            continue;
        }
        let ends: Vec<_> = runs.iter().map(|t| components(t.points.last().unwrap())).collect();
        for e in &ends[1..] {
            for k in 0..11 {
                worst = worst.max((e[k] - ends[0][k]).abs());
            }
        }
        checked += 1;
    }
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn mirror_symmetry_is_pointwise() {
    let cfg = PropagationConfig::default();
    for &(a, b) in &[(0.5, 0.4), (3.0, 1.2), (8.0, 2.5), (1.5, FRAC_PI_2)] {
        let up = propagate(&SeedParams::new(a, b, FRAC_PI_3).unwrap(), &cfg).unwrap();
        let down = propagate(&SeedParams::new(a, -b, FRAC_PI_3).unwrap(), &cfg).unwrap();
        let image = down.mirrored();
        assert_eq!(up.termination, image.termination);
        assert_eq!(up.points.len(), image.points.len());
        for (p, q) in up.points.iter().zip(&image.points) {
            let (cp, cq) = (components(p), components(q));
            for k in 0..11 {
                assert!((cp[k] - cq[k]).abs() < 1e-9);
            }
            assert!((p.sigma - q.sigma).abs() < 1e-9 && (p.r - q.r).abs() < 1e-9);
        }
    }
}

#[test]
fn scaling_family() {
    let cfg = PropagationConfig { t_bar: 2.0, ..Default::default() };
    for &(a, b) in &[(0.2, 1.0), (0.5, 2.0), (0.1, 0.5)] {
        let base = propagate(&SeedParams::new(a, b, FRAC_PI_2).unwrap(), &cfg).unwrap();
        let peak_u = base.points.iter().fold(0.0f64, |m, p| m.max(p.u.u.abs()));
        for &k in &[0.5, 2.0] {
            let scaled = propagate(
                &SeedParams::new(k * k * a, b, FRAC_PI_2).unwrap(),
                &PropagationConfig { t_bar: cfg.t_bar / k, ..cfg },
            )
            .unwrap();
            let mut compared = 0;
            for p in &scaled.points {
                let Some(q) = at(&base, k * p.tau) else { continue };
                assert!((p.r - q.r / k).abs() < 1e-3 * q.r / k, "r {} {}", p.r, q.r / k);
                assert!((p.sigma - q.sigma).abs() < 1e-3 * q.sigma.abs().max(1e-3));
                assert!((p.u.u - k * q.u.u).abs() < 1e-3 * k * peak_u);
                compared += 1;
            }
            assert!(compared > 50, "{compared}");
        }
    }
}

#[test]
fn epsilon_monotonicity() {
    for &(a, b) in &[(2.0, 1.0), (6.0, 2.2), (4.0, 0.6)] {
        let seed = SeedParams::new(a, b, FRAC_PI_3).unwrap();
        let runs: Vec<_> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&e| {
                let eps = Epsilon::new(e).unwrap();
                propagate(&seed, &PropagationConfig { eps, ..Default::default() }).unwrap()
            })
            .collect();
        let horizon = runs.iter().map(|t| t.final_tau()).fold(f64::INFINITY, f64::min);
        let upto = |t: &ExtremalTrajectory| ExtremalTrajectory {
            points: t.points.iter().copied().filter(|p| p.tau <= horizon + 1e-12).collect(),
            ..t.clone()
        };
        let cut: Vec<_> = runs.iter().map(upto).collect();
        // a weaker penalty on the saturation rate lets the extremal press closer to the bound
        for w in cut.windows(2) {
            assert!(w[1].max_abs_sigma() >= w[0].max_abs_sigma() - 1e-6);
            assert!(w[1].effort() >= w[0].effort() - 1e-6);
            assert!(w[1].max_abs_sigma() <= FRAC_PI_3 + 1e-6);
        }
    }
}
