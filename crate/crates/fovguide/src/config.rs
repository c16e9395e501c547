//! Pipeline configuration, one TOML table per stage. Every key is optional;
//! `configs/example.toml` lists them all with their defaults.

use std::path::Path;

use fovguide_core::extremal::{PropagationConfig, SweepGrid};
use fovguide_core::guidance::{FovGuard, ScalingParams};
use fovguide_core::mlp::{ShuffleRule, TrainConfig};
use fovguide_core::pmp::Epsilon;
use fovguide_core::simulator::Scenario;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub sweep: SweepSection,
    pub dataset: DatasetSection,
    pub train: TrainSection,
    pub guidance: GuidanceSection,
    pub scenario: ScenarioSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub sigma_max_deg: f64,
    pub alpha_bar: f64,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub alpha_decades: f64,
    pub eps: f64,
    pub t_bar: f64,
    pub tau0: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub sample_dtau: f64,
    pub xi_cap: f64,
    /// The sweep command fails when fewer seeds than this succeed.
    pub min_success_ratio: f64,
    /// Audit every trajectory and store the scalars in the report.
    pub audit: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        let g = SweepGrid::default();
        let p = PropagationConfig::default();
        Self {
            sigma_max_deg: 60.0,
            alpha_bar: g.alpha_bar,
            n_alpha: g.n_alpha,
            n_beta: g.n_beta,
            alpha_decades: g.alpha_decades,
            eps: p.eps.get(),
            t_bar: p.t_bar,
            tau0: p.tau0,
            rel_tol: p.rel_tol,
            abs_tol: p.abs_tol,
            sample_dtau: p.sample_dtau,
            xi_cap: p.xi_cap,
            min_success_ratio: 0.95,
            audit: true,
        }
    }
}

impl SweepSection {
    pub fn grid(&self) -> SweepGrid {
        SweepGrid { alpha_bar: self.alpha_bar, n_alpha: self.n_alpha, n_beta: self.n_beta, alpha_decades: self.alpha_decades }
    }

    pub fn propagation(&self) -> Result<PropagationConfig> {
        let eps = Epsilon::new(self.eps).map_err(|e| Error::config("sweep.eps", e))?;
        Ok(PropagationConfig {
            eps,
            t_bar: self.t_bar,
            tau0: self.tau0,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            sample_dtau: self.sample_dtau,
            xi_cap: self.xi_cap,
            ..PropagationConfig::default()
        })
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max_deg.to_radians()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub stride: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self { stride: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shuffle {
    EveryEpoch,
    Once,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub min_learning_rate: f64,
    pub plateau_patience: usize,
    pub validation_fraction: f64,
    pub patience: usize,
    pub shuffle: Shuffle,
    pub refit_output: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            seed: t.seed,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            lr_decay: t.lr_decay,
            min_learning_rate: t.min_learning_rate,
            plateau_patience: t.plateau_patience,
            validation_fraction: t.validation_fraction,
            patience: t.patience,
            shuffle: Shuffle::EveryEpoch,
            refit_output: t.refit_output,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            min_learning_rate: self.min_learning_rate,
            plateau_patience: self.plateau_patience,
            validation_fraction: self.validation_fraction,
            patience: self.patience,
            shuffle: match self.shuffle {
                Shuffle::EveryEpoch => ShuffleRule::EveryEpoch,
                Shuffle::Once => ShuffleRule::Once,
            },
            refit_output: self.refit_output,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceSection {
    pub t_ref: f64,
    /// PN takes over for the last `terminal_t_go` seconds.
    pub terminal_t_go: f64,
    /// FOV guard rate; 0 disables the guard.
    pub fov_guard_rate: f64,
    pub fallback_gain: f64,
    /// Navigation gains of the plain PN baselines in `compare`.
    pub pn_gains: Vec<f64>,
    /// Bias gains tried for the impact-time PN baseline; the cheapest run that
    /// meets the impact time within `impact_tolerance` is reported.
    pub bias_gains: Vec<f64>,
    pub impact_tolerance: f64,
}

impl Default for GuidanceSection {
    fn default() -> Self {
        Self {
            t_ref: ScalingParams::default().t_ref,
            terminal_t_go: 2.0,
            fov_guard_rate: 20.0,
            fallback_gain: 3.0,
            pn_gains: vec![3.0, 4.0, 5.0],
            bias_gains: vec![1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0],
            impact_tolerance: 0.01,
        }
    }
}

impl GuidanceSection {
    pub fn scaling(&self, t_bar: f64) -> Result<ScalingParams> {
        ScalingParams::new(self.t_ref, t_bar).map_err(|e| Error::config("guidance.t_ref", e))
    }

    pub fn fov_guard(&self, sigma_max: f64) -> Result<Option<FovGuard>> {
        if self.fov_guard_rate == 0.0 {
            return Ok(None);
        }
        FovGuard::new(sigma_max, self.fov_guard_rate).map(Some).map_err(|e| Error::config("guidance.fov_guard_rate", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub r0: f64,
    pub sigma0_deg: f64,
    pub speed: f64,
    pub t_f: f64,
    pub sigma_max_deg: f64,
    pub a_max: f64,
    pub dt_guidance: f64,
    pub dt_integrate: f64,
    pub capture_radius: f64,
    pub timeout_margin: f64,
    /// Also solve for the matched extremal and report its effort.
    pub reference: bool,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = Scenario::default();
        Self {
            r0: s.r0,
            sigma0_deg: 30.0,
            speed: s.speed,
            t_f: s.t_f,
            sigma_max_deg: 60.0,
            a_max: s.a_max,
            dt_guidance: s.dt_guidance,
            dt_integrate: s.dt_integrate,
            capture_radius: s.capture_radius,
            timeout_margin: s.timeout_margin,
            reference: true,
        }
    }
}

impl ScenarioSection {
    pub fn scenario(&self) -> Scenario {
        Scenario {
            r0: self.r0,
            sigma0: self.sigma0_deg.to_radians(),
            speed: self.speed,
            t_f: self.t_f,
            sigma_max: self.sigma_max_deg.to_radians(),
            a_max: self.a_max,
            dt_guidance: self.dt_guidance,
            dt_integrate: self.dt_integrate,
            capture_radius: self.capture_radius,
            timeout_margin: self.timeout_margin,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.message()))?;
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(key, e.into_inner().message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Range checks beyond what the types enforce, reported by key.
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, why: &str| if ok { Ok(()) } else { Err(Error::config(key, why)) };
        let s = &self.sweep;
        check(s.sigma_max_deg > 0.0 && s.sigma_max_deg < 90.0, "sweep.sigma_max_deg", "must lie in (0, 90)")?;
        check(s.n_alpha > 0, "sweep.n_alpha", "must be at least 1")?;
        check(s.n_beta > 0, "sweep.n_beta", "must be at least 1")?;
        check(s.alpha_bar > 0.0, "sweep.alpha_bar", "must be positive")?;
        check(s.alpha_decades >= 0.0, "sweep.alpha_decades", "must be non-negative")?;
        check((0.0..=1.0).contains(&s.min_success_ratio), "sweep.min_success_ratio", "must lie in [0, 1]")?;
        s.propagation()?.validate().map_err(|e| Error::config("sweep", e))?;
        check(self.dataset.stride > 0, "dataset.stride", "must be at least 1")?;
        self.train.train_config().validate().map_err(|e| Error::config("train", e))?;
        let g = &self.guidance;
        check(g.t_ref > 0.0 && g.t_ref <= s.t_bar, "guidance.t_ref", "must lie in (0, sweep.t_bar]")?;
        check(g.terminal_t_go >= 0.0, "guidance.terminal_t_go", "must be non-negative")?;
        check(g.fov_guard_rate >= 0.0, "guidance.fov_guard_rate", "must be non-negative")?;
        check(g.pn_gains.iter().all(|&n| n > 1.0), "guidance.pn_gains", "gains must exceed 1")?;
        check(g.bias_gains.iter().all(|&k| k > 0.0), "guidance.bias_gains", "gains must be positive")?;
        check(g.impact_tolerance > 0.0, "guidance.impact_tolerance", "must be positive")?;
        self.scenario.scenario().validate().map_err(|e| Error::config("scenario", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn example_lists_the_defaults() {
        let text = include_str!("../../../configs/example.toml");
        assert_eq!(Config::from_toml(text).unwrap(), Config::default());
    }

    #[test]
    fn round_trip() {
        let c = Config::default();
        assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = Config::from_toml("[sweep]\nn_alpa = 3\n").unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key.starts_with("sweep")), "{e}");
        assert!(e.to_string().contains("n_alpa"), "{e}");
    }

    #[test]
    fn wrong_type_is_named() {
        let e = Config::from_toml("[train]\nepochs = \"many\"\n").unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "train.epochs"), "{e}");
    }

    #[test]
    fn range_violation_is_named() {
        let e = Config::from_toml("[dataset]\nstride = 0\n").unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "dataset.stride"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }
}
