//! TOML scenario files and batch manifests.
//!
//! Every key has a default, so an empty scenario file is a valid pursuit
//! setup. Unknown keys are rejected. Validation reports every problem at
//! once rather than stopping at the first.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::SvmParams;
use crate::gestures::{GestureConfig, InterfaceId, SpeedLimits};
use crate::pilot::PilotConfig;
use crate::sim::course::WaypointsConfig;
use crate::sim::{PursuitConfig, ScenarioKind, SimParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub per_class: usize,
    /// Fingertip noise, metres.
    pub sigma: f64,
    pub hand_scale: f64,
    /// Fraction of records that go to training; the rest are held out.
    pub train_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            per_class: 200,
            sigma: 0.005,
            hand_scale: 1.0,
            train_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub sim: SimParams,
    pub limits: SpeedLimits,
    pub pursuit: PursuitConfig,
    pub waypoints: WaypointsConfig,
    pub gestures: GestureConfig,
    /// Named pilot profiles. `default` and `perfect` exist unless
    /// overridden here.
    pub pilots: BTreeMap<String, PilotConfig>,
    pub dataset: DatasetConfig,
    pub classifier: SvmParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Pursuit,
            sim: SimParams::default(),
            limits: SpeedLimits::default(),
            pursuit: PursuitConfig::default(),
            waypoints: WaypointsConfig::default(),
            gestures: GestureConfig::default(),
            pilots: BTreeMap::new(),
            dataset: DatasetConfig::default(),
            classifier: SvmParams::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn pursuit() -> Self {
        ScenarioConfig::default()
    }

    pub fn waypoints() -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Waypoints,
            ..ScenarioConfig::default()
        }
    }

    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        cfg.validate().map_err(ConfigError::Invalid)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn pilot_profile(&self, name: &str) -> Option<PilotConfig> {
        self.pilots.get(name).copied().or(match name {
            "default" => Some(PilotConfig::default()),
            "perfect" => Some(PilotConfig::perfect()),
            _ => None,
        })
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        self.sim.validate(&mut errors);
        let lim = &self.limits;
        if !(lim.s_min >= 0.0 && lim.s_max > lim.s_min && lim.s_max.is_finite()) {
            errors.push(format!(
                "limits: need 0 <= s_min < s_max (got s_min={}, s_max={})",
                lim.s_min, lim.s_max
            ));
        }
        if !(lim.accel > 0.0 && lim.accel.is_finite()) {
            errors.push(format!("limits.accel must be > 0 (got {})", lim.accel));
        }
        match self.kind {
            ScenarioKind::Pursuit => self.pursuit.validate(lim, &mut errors),
            ScenarioKind::Waypoints => self.waypoints.validate(&mut errors),
        }
        if self.waypoints.opening_height_m <= self.sim.capsule_height {
            errors.push("waypoints.opening_height_m must exceed sim.capsule_height".into());
        }

        let g = &self.gestures;
        let fd = &g.finger_distance;
        if !(fd.d >= 0.0 && fd.r > fd.d) {
            errors.push(format!(
                "gestures.finger_distance: need 0 <= d < r (got d={}, r={})",
                fd.d, fd.r
            ));
        }
        let ft = &g.finger_tapping;
        if !(ft.t_min > 0.0 && ft.t_max > ft.t_min) {
            errors.push(format!(
                "gestures.finger_tapping: need 0 < t_min < t_max (got t_min={}, t_max={})",
                ft.t_min, ft.t_max
            ));
        }
        if !(ft.cutoff_hz > 0.0 && ft.cutoff_hz < 0.5 / self.sim.dt) {
            errors.push(format!(
                "gestures.finger_tapping.cutoff_hz must be in (0, {}) (got {})",
                0.5 / self.sim.dt,
                ft.cutoff_hz
            ));
        }
        if !(ft.buffer_s >= 2.0 * self.sim.dt) {
            errors.push("gestures.finger_tapping.buffer_s must cover at least two ticks".into());
        }
        if !(ft.refractory_s >= 0.0) {
            errors.push("gestures.finger_tapping.refractory_s must be >= 0".into());
        }
        if !(g.steering.smooth_time_s > 0.0) {
            errors.push("gestures.steering.smooth_time_s must be > 0".into());
        }
        if !(g.gamepad.deadzone >= 0.0 && g.gamepad.deadzone < 1.0) {
            errors.push("gestures.gamepad.deadzone must be in [0, 1)".into());
        }
        if !(g.gamepad.max_steer_deg > 0.0) {
            errors.push("gestures.gamepad.max_steer_deg must be > 0".into());
        }
        if !(g.tracking_loss_hold_s >= 0.0) {
            errors.push("gestures.tracking_loss_hold_s must be >= 0".into());
        }

        for (name, p) in &self.pilots {
            if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == ',' || c == '/') {
                errors.push(format!("pilots: invalid profile name '{name}'"));
            }
            let mut pe = Vec::new();
            p.validate(&mut pe);
            errors.extend(pe.into_iter().map(|e| format!("pilots.{name}: {e}")));
        }
        let d = &self.dataset;
        if !(d.sigma >= 0.0) {
            errors.push("dataset.sigma must be >= 0".into());
        }
        if !(d.hand_scale > 0.0) {
            errors.push("dataset.hand_scale must be > 0".into());
        }
        if !(d.train_fraction > 0.0 && d.train_fraction <= 1.0) {
            errors.push(format!("dataset.train_fraction must be in (0, 1] (got {})", d.train_fraction));
        }
        if let Err(e) = self.classifier.validate() {
            errors.push(format!("classifier: {e}"));
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRow {
    /// Scenario file, relative to the manifest.
    pub scenario: PathBuf,
    pub interface: InterfaceId,
    #[serde(default = "default_pilot")]
    pub pilot: String,
    pub seed: u64,
    /// Trials to run; repeat `r` uses seed `seed + r`.
    #[serde(default = "one")]
    pub repeat: u64,
}

fn default_pilot() -> String {
    "default".into()
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchManifest {
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Classifier model, needed by finger-number rows. Relative to the
    /// manifest.
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(rename = "run", default)]
    pub runs: Vec<RunRow>,
}

/// One trial of an expanded manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedTrial {
    pub index: usize,
    pub scenario_path: PathBuf,
    pub scenario: ScenarioConfig,
    pub interface: InterfaceId,
    pub pilot: String,
    pub seed: u64,
}

impl PlannedTrial {
    pub fn file_stem(&self) -> String {
        let scen = self
            .scenario_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
        format!(
            "{:04}-{}-{}-{}-s{}",
            self.index, scen, self.interface, self.pilot, self.seed
        )
    }
}

impl BatchManifest {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    /// Loads every scenario, checks every row and expands repeats. All
    /// problems are collected before anything is reported.
    pub fn plan(&self, base_dir: &Path, seed_offset: u64) -> Result<Vec<PlannedTrial>, ConfigError> {
        let mut errors = Vec::new();
        if self.runs.is_empty() {
            errors.push("manifest has no [[run]] rows".into());
        }
        let mut scenarios: BTreeMap<PathBuf, ScenarioConfig> = BTreeMap::new();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let model_path = self.model.as_ref().map(|m| base_dir.join(m));
        for (row_idx, row) in self.runs.iter().enumerate() {
            let label = format!("run[{row_idx}]");
            let path = base_dir.join(&row.scenario);
            if !scenarios.contains_key(&path) {
                match ScenarioConfig::load(&path) {
                    Ok(cfg) => {
                        scenarios.insert(path.clone(), cfg);
                    }
                    Err(ConfigError::Invalid(es)) => {
                        errors.extend(es.into_iter().map(|e| format!("{label} ({}): {e}", path.display())));
                        continue;
                    }
                    Err(e) => {
                        errors.push(format!("{label}: {e}"));
                        continue;
                    }
                }
            }
            let cfg = &scenarios[&path];
            if cfg.pilot_profile(&row.pilot).is_none() {
                errors.push(format!("{label}: unknown pilot profile '{}'", row.pilot));
            }
            if row.repeat == 0 {
                errors.push(format!("{label}: repeat must be >= 1"));
            }
            if row.interface == InterfaceId::FingerNumber {
                match &model_path {
                    None => errors.push(format!("{label}: finger-number needs a 'model' entry in the manifest")),
                    Some(m) if !m.is_file() => {
                        errors.push(format!("{label}: model file {} does not exist", m.display()))
                    }
                    Some(_) => {}
                }
            }
            for r in 0..row.repeat {
                let Some(seed) = row.seed.checked_add(r).and_then(|s| s.checked_add(seed_offset)) else {
                    errors.push(format!("{label}: seed overflows u64"));
                    break;
                };
                let key = (path.clone(), row.interface, row.pilot.clone(), seed);
                if !seen.insert(key) {
                    errors.push(format!(
                        "{label}: duplicate trial ({}, {}, {}, seed {seed})",
                        row.scenario.display(),
                        row.interface,
                        row.pilot
                    ));
                    continue;
                }
                out.push(PlannedTrial {
                    index: out.len(),
                    scenario_path: path.clone(),
                    scenario: cfg.clone(),
                    interface: row.interface,
                    pilot: row.pilot.clone(),
                    seed,
                });
            }
        }
        if errors.is_empty() {
            Ok(out)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    pub fn model_path(&self, base_dir: &Path) -> Option<PathBuf> {
        self.model.as_ref().map(|m| base_dir.join(m))
    }
}
