//! Supervised samples `(r, sigma, t_go) -> u` extracted from extremal sweeps.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::extremal::{ExtremalTrajectory, PropagationConfig, SweepGrid};
use crate::geometry::to_polar;
use crate::{Error, Result};

pub const GENERATOR_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub r: f64,
    pub sigma: f64,
    pub t_go: f64,
    pub u: f64,
}

impl Sample {
    pub fn input(&self) -> [f64; 3] {
        [self.r, self.sigma, self.t_go]
    }
}

/// Affine map of `[min, max]` onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub min: f64,
    pub max: f64,
}

impl Channel {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::InvalidParameter("channel extent must satisfy max > min"));
        }
        Ok(Self { min, max })
    }

    /// Extent of the data; a degenerate extent `c` widens to `c +- max(|c|, 1e-6)`.
    pub fn from_extent(min: f64, max: f64) -> Result<Self> {
        if max - min > 1e-12 * max.abs().max(min.abs()).max(1.0) {
            return Self::new(min, max);
        }
        let c = 0.5 * (min + max);
        let h = c.abs().max(1e-6);
        Self::new(c - h, c + h)
    }

    #[inline]
    pub fn normalize(&self, x: f64) -> f64 {
        2.0 * (x - self.min) / (self.max - self.min) - 1.0
    }

    #[inline]
    pub fn denormalize(&self, y: f64) -> f64 {
        self.min + 0.5 * (y + 1.0) * (self.max - self.min)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.max - self.min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub r: Channel,
    pub sigma: Channel,
    pub t_go: Channel,
    pub u: Channel,
}

impl NormStats {
    pub fn normalize_input(&self, x: [f64; 3]) -> [f64; 3] {
        [self.r.normalize(x[0]), self.sigma.normalize(x[1]), self.t_go.normalize(x[2])]
    }

    pub fn inputs_contain(&self, x: [f64; 3]) -> bool {
        self.r.contains(x[0]) && self.sigma.contains(x[1]) && self.t_go.contains(x[2])
    }
}

/// One source trajectory and the range of samples it produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub alpha: f64,
    pub beta: f64,
    pub first: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub sigma_max: f64,
    pub eps: f64,
    pub t_bar: f64,
    pub tau0: f64,
    pub stride: usize,
    pub grid: String,
    pub generator_version: String,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub norm: NormStats,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks the sample invariants and the agreement of metadata with samples.
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::EmptySweep);
        }
        for s in &self.samples {
            if !(s.r.is_finite() && s.sigma.is_finite() && s.t_go.is_finite() && s.u.is_finite()) {
                return Err(Error::InvalidParameter("non-finite sample"));
            }
            if s.sigma < 0.0 || s.sigma > self.meta.sigma_max + 1e-3 {
                return Err(Error::InvalidParameter("sample lead angle outside [0, sigma_max]"));
            }
            if s.t_go < s.r - 1e-9 {
                return Err(Error::InvalidParameter("sample time-to-go below range"));
            }
        }
        let total: usize = self.meta.provenance.iter().map(|p| p.count).sum();
        if !self.meta.provenance.is_empty() && total != self.samples.len() {
            return Err(Error::InvalidParameter("provenance does not cover the samples"));
        }
        Ok(())
    }
}

/// `(tau, r, sigma)` of every stored point; `sigma` keeps its sign.
pub fn polar_of_trajectory(traj: &ExtremalTrajectory) -> Result<Vec<(f64, f64, f64)>> {
    traj.points
        .iter()
        .map(|p| to_polar(&p.cartesian()).map(|q| (p.tau, q.r, q.sigma)))
        .collect()
}

/// Every `stride`-th point, folded onto `sigma >= 0`; points with `tau < 2 tau0`
/// (where `tau0` is the first stored offset) are dropped.
pub fn extract_samples(traj: &ExtremalTrajectory, stride: usize) -> Result<Vec<Sample>> {
    let stride = stride.max(1);
    let Some(first) = traj.points.first() else {
        return Ok(Vec::new());
    };
    let tau_min = 2.0 * first.tau;
    let mut out = Vec::with_capacity(traj.points.len() / stride + 1);
    for p in traj.points.iter().step_by(stride) {
        if p.tau < tau_min {
            continue;
        }
        let q = to_polar(&p.cartesian())?;
        let (sigma, u) = if q.sigma < 0.0 { (-q.sigma, -p.u.u) } else { (q.sigma, p.u.u) };
        out.push(Sample { r: q.r, sigma, t_go: p.tau, u });
    }
    Ok(out)
}

/// Concatenates samples in trajectory order. The `sigma` and `t_go` channels use
/// the fixed extents `[0, sigma_max]` and `[0, t_bar]`; `r` and `u` use data extents.
pub fn build(trajs: &[ExtremalTrajectory], stride: usize, cfg: &PropagationConfig, grid: &SweepGrid) -> Result<Dataset> {
    let first = trajs.first().ok_or(Error::EmptySweep)?;
    let sigma_max = first.seed.sigma_max;
    if trajs.iter().any(|t| t.seed.sigma_max != sigma_max) {
        return Err(Error::InvalidParameter("trajectories disagree on sigma_max"));
    }
    let mut samples = Vec::new();
    let mut provenance = Vec::with_capacity(trajs.len());
    for t in trajs {
        let batch = extract_samples(t, stride)?;
        provenance.push(Provenance { alpha: t.seed.alpha, beta: t.seed.beta, first: samples.len(), count: batch.len() });
        samples.extend(batch);
    }
    if samples.is_empty() {
        return Err(Error::EmptySweep);
    }
    let extent = |f: fn(&Sample) -> f64| {
        samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(f(s)), hi.max(f(s))))
    };
    let (r_lo, r_hi) = extent(|s| s.r);
    let (u_lo, u_hi) = extent(|s| s.u);
    let norm = NormStats {
        r: Channel::from_extent(r_lo, r_hi)?,
        sigma: Channel::new(0.0, sigma_max)?,
        t_go: Channel::new(0.0, cfg.t_bar)?,
        u: Channel::from_extent(u_lo, u_hi)?,
    };
    let meta = DatasetMeta {
        sigma_max,
        eps: cfg.eps.get(),
        t_bar: cfg.t_bar,
        tau0: cfg.tau0,
        stride: stride.max(1),
        grid: alloc::format!(
            "alpha log-spaced over {} decades up to {} ({} values) x beta uniform on [0, pi] ({} values)",
            grid.alpha_decades, grid.alpha_bar, grid.n_alpha, grid.n_beta
        ),
        generator_version: String::from(GENERATOR_VERSION),
        provenance,
    };
    Ok(Dataset { samples, norm, meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::{propagate, SeedParams};
    use core::f64::consts::FRAC_PI_3;

    fn traj(a: f64, b: f64) -> ExtremalTrajectory {
        propagate(&SeedParams::new(a, b, FRAC_PI_3).unwrap(), &PropagationConfig { t_bar: 1.0, ..Default::default() })
            .unwrap()
    }

    #[test]
    fn straight_line_polar_form() {
        let t = traj(1e-9, 1.0);
        for (tau, r, sigma) in polar_of_trajectory(&t).unwrap() {
            assert!((r - tau).abs() < 1e-9 && sigma.abs() < 1e-9);
        }
    }

    #[test]
    fn mirrored_trajectory_flips_sigma() {
        let t = traj(3.0, 1.0);
        let a = polar_of_trajectory(&t).unwrap();
        let b = polar_of_trajectory(&t.mirrored()).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.1, q.1);
            assert_eq!(p.2, -q.2);
        }
    }

    #[test]
    fn fold_is_an_involution() {
        let t = traj(3.0, 1.0).mirrored();
        assert!(t.points.iter().skip(1).all(|p| p.sigma <= 0.0));
        let samples = extract_samples(&t, 1).unwrap();
        let kept: Vec<_> = t.points.iter().filter(|p| p.tau >= 2.0 * t.points[0].tau).collect();
        assert_eq!(samples.len(), kept.len());
        for (s, p) in samples.iter().zip(kept) {
            assert!(s.sigma >= 0.0);
            let restored = if p.sigma < 0.0 { -s.u } else { s.u };
            assert_eq!(restored, p.u.u);
        }
    }

    #[test]
    fn near_terminal_points_are_dropped() {
        let t = traj(2.0, 1.0);
        let s = extract_samples(&t, 1).unwrap();
        assert_eq!(s.len(), t.points.len() - 1);
        assert!(s.iter().all(|s| s.t_go >= 2e-3));
        let every_third = extract_samples(&t, 3).unwrap();
        assert_eq!(every_third.len(), t.points.len().div_ceil(3) - 1);
    }

    #[test]
    fn degenerate_u_channel() {
        let t = traj(1e-12, 0.0);
        let ds = build(&[t], 1, &PropagationConfig::default(), &SweepGrid::default()).unwrap();
        assert!(ds.samples.iter().all(|s| s.u.abs() < 1e-6));
        assert!(ds.norm.u.max > ds.norm.u.min);
        assert!(ds.norm.u.max <= 1e-6 + 1e-12 && ds.norm.u.min >= -1e-6 - 1e-12);
        assert_eq!(ds.norm.sigma, Channel { min: 0.0, max: FRAC_PI_3 });
        assert_eq!(ds.norm.t_go, Channel { min: 0.0, max: 4.0 });
        ds.validate().unwrap();
    }

    #[test]
    fn normalization_round_trip() {
        let c = Channel::new(-3.5, 12.25).unwrap();
        for i in 0..100 {
            let x = -3.5 + 15.75 * i as f64 / 99.0;
            assert!((c.denormalize(c.normalize(x)) - x).abs() < 1e-12);
        }
        assert_eq!(c.normalize(-3.5), -1.0);
        assert_eq!(c.normalize(12.25), 1.0);
        assert!(Channel::new(1.0, 1.0).is_err());
    }

    #[test]
    fn build_rejects_empty_input() {
        assert!(matches!(
            build(&[], 1, &PropagationConfig::default(), &SweepGrid::default()),
            Err(Error::EmptySweep)
        ));
    }

    #[test]
    fn provenance_keys_are_unique() {
        let ts = [traj(1.0, 0.5), traj(1.0, 1.5), traj(2.0, 0.5)];
        let ds = build(&ts, 2, &PropagationConfig { t_bar: 1.0, ..Default::default() }, &SweepGrid::default()).unwrap();
        ds.validate().unwrap();
        let p = &ds.meta.provenance;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                assert!(p[i].alpha != p[j].alpha || p[i].beta != p[j].beta);
            }
        }
    }
}
