//! Plain-text `key = value` run configuration.
//!
//! Lines are `key = value` with `#` comments; unknown keys are rejected.
//! Every key has a default mirroring the reference measurement setup
//! (5.8 GHz, 17 dBm through a 14 dB amplifier, 15.8 dBi horns, 16.51 dB of
//! cable loss, 3.8 m separation, a 1.1 m concrete wall and a 16×16 1-bit
//! transmissive surface halfway between the antennas).
//!
//! Activity models can be tweaked per field with keys such as
//! `activity.walking.modulation_rate_hz = 1.5`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use twsense_core::csi::{default_models, Activity, ActivityModel, ModulationKind};
use twsense_core::propagation::{
    builtin_materials, parse_material_db, LinkBudgetConfig, Material, Obstruction,
};
use twsense_core::ris::{grid_codebook, CascadeGeometry, RisArray, SteeringDirection};
use twsense_core::svm::{GammaSetting, TrainOptions};
use twsense_core::vecmath::{normalize, Vec3};

use crate::CliError;

/// How the element pitch is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpacingSpec {
    /// λ/2 at the design frequency.
    HalfWave,
    /// 31 cm panel split into 16 cells (≈0.019375 m).
    Footprint,
    Meters(f64),
}

/// Where the synthetic-trace noise floor comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFloorSpec {
    /// Beam-scan best received power, mapped through the noise reference.
    AutoWithRis,
    /// Direct through-wall received power, mapped through the reference.
    AutoWithoutRis,
    Fixed(f64),
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub frequency_hz: f64,
    pub distance_m: f64,
    pub tx_power_dbm: f64,
    pub amplifier_gain_db: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub cable_loss_db: f64,

    pub wall_material: Option<String>,
    pub wall_thickness_m: f64,
    pub material_db: Option<PathBuf>,

    pub ris_rows: usize,
    pub ris_cols: usize,
    pub ris_spacing: SpacingSpec,
    pub ris_center: Vec3,
    pub ris_normal: Vec3,
    pub tx_position: Vec3,
    pub rx_position: Vec3,

    pub scan_span_deg: f64,
    pub scan_step_deg: f64,
    pub scan_bits: u8,

    pub sampling_rate_hz: f64,
    pub trace_duration_s: f64,
    pub per_activity_count: usize,
    pub noise_reference_dbm: f64,
    pub noise_floor: NoiseFloorSpec,
    pub seed: u64,
    pub models: Vec<ActivityModel>,

    pub svm_c: f64,
    pub svm_gamma: GammaSetting,
    pub svm_tolerance: f64,
    pub svm_max_passes: usize,
    pub cv_folds: usize,
    pub train_fraction: f64,
    pub dataset_csv: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 5.8e9,
            distance_m: 3.8,
            tx_power_dbm: 17.0,
            amplifier_gain_db: 14.0,
            tx_gain_dbi: 15.8,
            rx_gain_dbi: 15.8,
            cable_loss_db: 16.51,
            wall_material: Some("concrete_fitted".to_string()),
            wall_thickness_m: 1.1,
            material_db: None,
            ris_rows: 16,
            ris_cols: 16,
            ris_spacing: SpacingSpec::HalfWave,
            ris_center: [0.0, 0.0, 0.0],
            ris_normal: [1.0, 0.0, 0.0],
            tx_position: [-1.9, 0.0, 0.0],
            rx_position: [1.9, 0.0, 0.0],
            scan_span_deg: 60.0,
            scan_step_deg: 5.0,
            scan_bits: 1,
            sampling_rate_hz: 20.0,
            trace_duration_s: 10.0,
            per_activity_count: 400,
            noise_reference_dbm: -113.0,
            noise_floor: NoiseFloorSpec::AutoWithRis,
            seed: 42,
            models: default_models(),
            svm_c: 10.0,
            svm_gamma: GammaSetting::Scale,
            svm_tolerance: 1e-3,
            svm_max_passes: 200,
            cv_folds: 5,
            train_fraction: 0.7,
            dataset_csv: None,
        }
    }
}

fn config_err(message: impl Into<String>) -> CliError {
    CliError::Config(message.into())
}

fn parse_f64(key: &str, value: &str) -> Result<f64, CliError> {
    value
        .parse()
        .map_err(|_| config_err(format!("key {key}: invalid number {value:?}")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize, CliError> {
    value
        .parse()
        .map_err(|_| config_err(format!("key {key}: invalid integer {value:?}")))
}

fn parse_vec3(key: &str, value: &str) -> Result<Vec3, CliError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(config_err(format!(
            "key {key}: expected three comma-separated numbers, got {value:?}"
        )));
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = parse_f64(key, part)?;
    }
    Ok(out)
}

impl RunConfig {
    /// Parse a config file, apply the optional seed override and validate.
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            config_err(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut config = Self::parse(&text)?;
        if let Some(seed) = seed_override {
            config.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut config = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                config_err(format!("line {line}: expected `key = value`, got {raw:?}"))
            })?;
            let key = key.trim();
            let value = value.trim();
            config.apply(key, value).map_err(|e| match e {
                CliError::Config(msg) => config_err(format!("line {line}: {msg}")),
                other => other,
            })?;
        }
        Ok(config)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if let Some(rest) = key.strip_prefix("activity.") {
            return self.apply_activity(key, rest, value);
        }
        match key {
            "frequency_hz" => self.frequency_hz = parse_f64(key, value)?,
            "distance_m" => self.distance_m = parse_f64(key, value)?,
            "tx_power_dbm" => self.tx_power_dbm = parse_f64(key, value)?,
            "amplifier_gain_db" => self.amplifier_gain_db = parse_f64(key, value)?,
            "tx_gain_dbi" => self.tx_gain_dbi = parse_f64(key, value)?,
            "rx_gain_dbi" => self.rx_gain_dbi = parse_f64(key, value)?,
            "cable_loss_db" => self.cable_loss_db = parse_f64(key, value)?,
            "wall_material" => {
                self.wall_material = if value == "none" {
                    None
                } else {
                    Some(value.to_string())
                }
            }
            "wall_thickness_m" => self.wall_thickness_m = parse_f64(key, value)?,
            "material_db" => self.material_db = Some(PathBuf::from(value)),
            "ris_rows" => self.ris_rows = parse_usize(key, value)?,
            "ris_cols" => self.ris_cols = parse_usize(key, value)?,
            "ris_spacing" => {
                self.ris_spacing = match value {
                    "half_wave" => SpacingSpec::HalfWave,
                    "footprint" => SpacingSpec::Footprint,
                    other => SpacingSpec::Meters(parse_f64(key, other)?),
                }
            }
            "ris_center" => self.ris_center = parse_vec3(key, value)?,
            "ris_normal" => self.ris_normal = parse_vec3(key, value)?,
            "tx_position" => self.tx_position = parse_vec3(key, value)?,
            "rx_position" => self.rx_position = parse_vec3(key, value)?,
            "scan_span_deg" => self.scan_span_deg = parse_f64(key, value)?,
            "scan_step_deg" => self.scan_step_deg = parse_f64(key, value)?,
            "scan_bits" => {
                let bits = parse_usize(key, value)?;
                if !(1..=30).contains(&bits) {
                    return Err(config_err(format!("key {key}: bits must be 1..=30")));
                }
                self.scan_bits = bits as u8;
            }
            "sampling_rate_hz" => self.sampling_rate_hz = parse_f64(key, value)?,
            "trace_duration_s" => self.trace_duration_s = parse_f64(key, value)?,
            "per_activity_count" => self.per_activity_count = parse_usize(key, value)?,
            "noise_reference_dbm" => self.noise_reference_dbm = parse_f64(key, value)?,
            "noise_floor" => {
                self.noise_floor = match value {
                    "auto_with_ris" => NoiseFloorSpec::AutoWithRis,
                    "auto_without_ris" => NoiseFloorSpec::AutoWithoutRis,
                    other => NoiseFloorSpec::Fixed(parse_f64(key, other)?),
                }
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| config_err(format!("key {key}: invalid seed {value:?}")))?
            }
            "svm_c" => self.svm_c = parse_f64(key, value)?,
            "svm_gamma" => {
                self.svm_gamma = match value {
                    "scale" => GammaSetting::Scale,
                    other => GammaSetting::Fixed(parse_f64(key, other)?),
                }
            }
            "svm_tolerance" => self.svm_tolerance = parse_f64(key, value)?,
            "svm_max_passes" => self.svm_max_passes = parse_usize(key, value)?,
            "cv_folds" => self.cv_folds = parse_usize(key, value)?,
            "train_fraction" => self.train_fraction = parse_f64(key, value)?,
            "dataset_csv" => self.dataset_csv = Some(PathBuf::from(value)),
            other => return Err(config_err(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    fn apply_activity(&mut self, key: &str, rest: &str, value: &str) -> Result<(), CliError> {
        let (name, field) = rest
            .split_once('.')
            .ok_or_else(|| config_err(format!("key {key}: expected activity.<name>.<field>")))?;
        let activity = Activity::from_name(name)
            .ok_or_else(|| config_err(format!("key {key}: unknown activity {name:?}")))?;
        let model = self
            .models
            .iter_mut()
            .find(|m| m.activity == activity)
            .expect("defaults cover every activity");
        match field {
            "baseline_amplitude" => model.baseline_amplitude = parse_f64(key, value)?,
            "modulation_kind" => {
                model.modulation_kind = match value {
                    "transient_dip" => ModulationKind::TransientDip,
                    "transient_rise" => ModulationKind::TransientRise,
                    "quasi_periodic" => ModulationKind::QuasiPeriodic,
                    "low_variance" => ModulationKind::LowVariance,
                    other => {
                        return Err(config_err(format!(
                            "key {key}: unknown modulation kind {other:?}"
                        )))
                    }
                }
            }
            "modulation_depth" => model.modulation_depth = parse_f64(key, value)?,
            "modulation_rate_hz" => model.modulation_rate_hz = parse_f64(key, value)?,
            "event_duration_s" => model.event_duration_s = parse_f64(key, value)?,
            "jitter" => model.jitter = parse_f64(key, value)?,
            other => return Err(config_err(format!("key {key}: unknown field {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.link_budget()
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        if self.wall_material.is_some() && !(self.wall_thickness_m > 0.0) {
            return Err(config_err(format!(
                "wall_thickness_m must be positive, got {}",
                self.wall_thickness_m
            )));
        }
        if let Some(path) = &self.material_db {
            if !path.exists() {
                return Err(config_err(format!(
                    "material_db {} does not exist",
                    path.display()
                )));
            }
        }
        if self.ris_rows == 0 || self.ris_cols == 0 {
            return Err(config_err("ris_rows and ris_cols must be >= 1".to_string()));
        }
        match self.ris_spacing {
            SpacingSpec::Meters(m) if !(m > 0.0) => {
                return Err(config_err(format!("ris_spacing must be positive, got {m}")))
            }
            _ => {}
        }
        if !(self.scan_step_deg > 0.0) || !(self.scan_span_deg >= 0.0) {
            return Err(config_err(format!(
                "scan grid invalid: span {} step {}",
                self.scan_span_deg, self.scan_step_deg
            )));
        }
        if !(self.sampling_rate_hz > 0.0) || !(self.trace_duration_s > 0.0) {
            return Err(config_err(format!(
                "sampling_rate_hz {} and trace_duration_s {} must be positive",
                self.sampling_rate_hz, self.trace_duration_s
            )));
        }
        if self.per_activity_count == 0 {
            return Err(config_err("per_activity_count must be >= 1".to_string()));
        }
        for model in &self.models {
            model
                .validate(self.sampling_rate_hz)
                .map_err(|e| config_err(e.to_string()))?;
        }
        if !(self.svm_c > 0.0) || !(self.svm_tolerance > 0.0) || self.svm_max_passes == 0 {
            return Err(config_err(format!(
                "svm parameters invalid: C {} tolerance {} max_passes {}",
                self.svm_c, self.svm_tolerance, self.svm_max_passes
            )));
        }
        if let GammaSetting::Fixed(g) = self.svm_gamma {
            if !(g > 0.0) {
                return Err(config_err(format!("svm_gamma must be positive, got {g}")));
            }
        }
        if self.cv_folds < 2 {
            return Err(config_err(format!(
                "cv_folds must be >= 2, got {}",
                self.cv_folds
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(config_err(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        // The cascade geometry must be usable as configured.
        self.cascade_geometry()?
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        Ok(())
    }

    pub fn link_budget(&self) -> LinkBudgetConfig {
        LinkBudgetConfig {
            tx_power_dbm: self.tx_power_dbm,
            tx_gain_dbi: self.tx_gain_dbi,
            rx_gain_dbi: self.rx_gain_dbi,
            amplifier_gain_db: self.amplifier_gain_db,
            cable_loss_db: self.cable_loss_db,
            frequency_hz: self.frequency_hz,
            distance_m: self.distance_m,
        }
    }

    /// Built-in materials plus (overriding, by name) the optional database
    /// file.
    pub fn materials(&self) -> Result<Vec<Material>, CliError> {
        let mut by_name: BTreeMap<String, Material> = builtin_materials()
            .into_iter()
            .map(|m| (m.name.clone(), m))
            .collect();
        if let Some(path) = &self.material_db {
            let text = std::fs::read_to_string(path).map_err(|e| {
                config_err(format!("cannot read material_db {}: {e}", path.display()))
            })?;
            for material in parse_material_db(&text).map_err(|e| config_err(e.to_string()))? {
                by_name.insert(material.name.clone(), material);
            }
        }
        Ok(by_name.into_values().collect())
    }

    /// The configured wall, if any.
    pub fn wall(&self) -> Result<Option<Obstruction>, CliError> {
        let Some(name) = &self.wall_material else {
            return Ok(None);
        };
        let material = self
            .materials()?
            .into_iter()
            .find(|m| &m.name == name)
            .ok_or_else(|| config_err(format!("wall material {name:?} not found")))?;
        let wall = Obstruction::new(material, self.wall_thickness_m)
            .map_err(|e| config_err(e.to_string()))?;
        Ok(Some(wall))
    }

    pub fn element_spacing_m(&self) -> f64 {
        match self.ris_spacing {
            SpacingSpec::HalfWave => {
                twsense_core::propagation::SPEED_OF_LIGHT / self.frequency_hz / 2.0
            }
            SpacingSpec::Footprint => 0.31 / 16.0,
            SpacingSpec::Meters(m) => m,
        }
    }

    pub fn ris_array(&self) -> Result<RisArray, CliError> {
        RisArray::new(
            self.ris_rows,
            self.ris_cols,
            self.element_spacing_m(),
            self.frequency_hz,
            self.ris_center,
            normalize(self.ris_normal),
        )
        .map_err(|e| config_err(e.to_string()))
    }

    pub fn cascade_geometry(&self) -> Result<CascadeGeometry, CliError> {
        let obstructions = match self.wall()? {
            Some(wall) => vec![wall],
            None => vec![],
        };
        Ok(CascadeGeometry {
            tx_position: self.tx_position,
            rx_position: self.rx_position,
            ris: self.ris_array()?,
            tx_side_obstructions: obstructions,
        })
    }

    pub fn codebook(&self) -> Vec<SteeringDirection> {
        grid_codebook(self.scan_span_deg, self.scan_step_deg)
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            c: self.svm_c,
            gamma: self.svm_gamma,
            tolerance: self.svm_tolerance,
            max_passes: self.svm_max_passes,
            seed: self.seed,
        }
    }

    /// Canonical serialization of every effective setting, used for the
    /// provenance hash.
    pub fn canonical_string(&self) -> String {
        let mut lines: Vec<String> = vec![
            format!("amplifier_gain_db = {}", self.amplifier_gain_db),
            format!("cable_loss_db = {}", self.cable_loss_db),
            format!(
                "cv_folds = {}",
                self.cv_folds
            ),
            format!(
                "dataset_csv = {}",
                self.dataset_csv
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "none".to_string())
            ),
            format!("distance_m = {}", self.distance_m),
            format!("frequency_hz = {}", self.frequency_hz),
            format!(
                "material_db = {}",
                self.material_db
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "none".to_string())
            ),
            format!(
                "noise_floor = {}",
                match self.noise_floor {
                    NoiseFloorSpec::AutoWithRis => "auto_with_ris".to_string(),
                    NoiseFloorSpec::AutoWithoutRis => "auto_without_ris".to_string(),
                    NoiseFloorSpec::Fixed(v) => v.to_string(),
                }
            ),
            format!("noise_reference_dbm = {}", self.noise_reference_dbm),
            format!("per_activity_count = {}", self.per_activity_count),
            format!("ris_center = {:?}", self.ris_center),
            format!("ris_cols = {}", self.ris_cols),
            format!("ris_normal = {:?}", self.ris_normal),
            format!("ris_rows = {}", self.ris_rows),
            format!(
                "ris_spacing = {}",
                match self.ris_spacing {
                    SpacingSpec::HalfWave => "half_wave".to_string(),
                    SpacingSpec::Footprint => "footprint".to_string(),
                    SpacingSpec::Meters(m) => m.to_string(),
                }
            ),
            format!("rx_gain_dbi = {}", self.rx_gain_dbi),
            format!("rx_position = {:?}", self.rx_position),
            format!("sampling_rate_hz = {}", self.sampling_rate_hz),
            format!("scan_bits = {}", self.scan_bits),
            format!("scan_span_deg = {}", self.scan_span_deg),
            format!("scan_step_deg = {}", self.scan_step_deg),
            format!("seed = {}", self.seed),
            format!(
                "svm_gamma = {}",
                match self.svm_gamma {
                    GammaSetting::Scale => "scale".to_string(),
                    GammaSetting::Fixed(g) => g.to_string(),
                }
            ),
            format!("svm_c = {}", self.svm_c),
            format!("svm_max_passes = {}", self.svm_max_passes),
            format!("svm_tolerance = {}", self.svm_tolerance),
            format!("trace_duration_s = {}", self.trace_duration_s),
            format!("train_fraction = {}", self.train_fraction),
            format!("tx_gain_dbi = {}", self.tx_gain_dbi),
            format!("tx_position = {:?}", self.tx_position),
            format!("tx_power_dbm = {}", self.tx_power_dbm),
            format!(
                "wall_material = {}",
                self.wall_material.clone().unwrap_or_else(|| "none".to_string())
            ),
            format!("wall_thickness_m = {}", self.wall_thickness_m),
        ];
        for model in &self.models {
            let name = model.activity.name();
            lines.push(format!(
                "activity.{name}.baseline_amplitude = {}",
                model.baseline_amplitude
            ));
            lines.push(format!(
                "activity.{name}.event_duration_s = {}",
                model.event_duration_s
            ));
            lines.push(format!("activity.{name}.jitter = {}", model.jitter));
            lines.push(format!(
                "activity.{name}.modulation_depth = {}",
                model.modulation_depth
            ));
            lines.push(format!(
                "activity.{name}.modulation_kind = {:?}",
                model.modulation_kind
            ));
            lines.push(format!(
                "activity.{name}.modulation_rate_hz = {}",
                model.modulation_rate_hz
            ));
        }
        lines.sort();
        lines.join("\n")
    }

    /// FNV-1a 64 hash of the canonical serialization, hex-encoded.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.canonical_string().as_bytes() {
            h ^= *byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_overrides_and_hash_changes() {
        let a = RunConfig::parse("seed = 7\n").unwrap();
        let b = RunConfig::parse("seed = 8\n").unwrap();
        assert_eq!(a.seed, 7);
        assert_ne!(a.hash(), b.hash());
        let c = RunConfig::parse("seed = 7  # comment\n\n# full comment\n").unwrap();
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(RunConfig::parse("frequency = 1\n").is_err());
    }

    #[test]
    fn activity_override_applies() {
        let config =
            RunConfig::parse("activity.walking.modulation_rate_hz = 2.5\n").unwrap();
        let walking = config
            .models
            .iter()
            .find(|m| m.activity == Activity::Walking)
            .unwrap();
        assert_eq!(walking.modulation_rate_hz, 2.5);
    }

    #[test]
    fn k_below_two_fails_validation() {
        let config = RunConfig::parse("cv_folds = 1\n").unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn bad_geometry_fails_validation() {
        let config = RunConfig::parse("rx_position = -1,0,0\n").unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn wall_none_disables_obstruction() {
        let config = RunConfig::parse("wall_material = none\n").unwrap();
        assert!(config.wall().unwrap().is_none());
    }

    #[test]
    fn spacing_presets() {
        let half = RunConfig::parse("ris_spacing = half_wave\n").unwrap();
        assert!((half.element_spacing_m() - 0.02584).abs() < 1e-4);
        let footprint = RunConfig::parse("ris_spacing = footprint\n").unwrap();
        assert!((footprint.element_spacing_m() - 0.019375).abs() < 1e-12);
        let meters = RunConfig::parse("ris_spacing = 0.02\n").unwrap();
        assert_eq!(meters.element_spacing_m(), 0.02);
    }
}
