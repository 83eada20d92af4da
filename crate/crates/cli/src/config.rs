//! Scenario configuration: TOML files with an `include` list, deep-merged so
//! that the including file overrides its presets.

use std::path::{Path, PathBuf};

use rotip_core::bench::{BenchParams, PlaneSweep};
use rotip_core::calibration::{CalibrationParams, CaptureParams};
use rotip_core::contact::{ContactMethod, ContactParams, ContactSetup, Misalignment};
use rotip_core::control::{ControlGains, ControllerConfig};
use rotip_core::counting::TrackParams;
use rotip_core::edges::DetectorParams;
use rotip_core::feed::{FeedParams, Material};
use rotip_core::oracle::MaskNoiseParams;
use rotip_core::plane::{RansacParams, FORCE_NOISE_DEG, VISION_NOISE_DEG};
use rotip_core::sensor::{CameraIntrinsics, SensorGeometry};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    pub material: String,
    pub tilt_deg: f64,
    /// Stack size for feeding runs.
    pub sheets: u32,
    /// Number of seeds `0..seeds` when `seed_list` is empty.
    pub seeds: u64,
    pub seed_list: Vec<u64>,
    /// Grasp-bench grid.
    pub tilts: Vec<f64>,
    pub materials: Vec<String>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            name: "default".into(),
            material: "print_paper".into(),
            tilt_deg: 0.0,
            sheets: 15,
            seeds: 10,
            seed_list: Vec::new(),
            tilts: vec![0.0, 30.0, 60.0],
            materials: Material::ALL.iter().map(|m| m.label().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Recalls {
    pub print_paper: f64,
    pub coated_paper: f64,
    pub plastic_sheet: f64,
}

impl Default for Recalls {
    fn default() -> Self {
        Self {
            print_paper: Material::PrintPaper.preset().recall,
            coated_paper: Material::CoatedPaper.preset().recall,
            plastic_sheet: Material::PlasticSheet.preset().recall,
        }
    }
}

impl Recalls {
    pub fn get(&self, m: Material) -> f64 {
        match m {
            Material::PrintPaper => self.print_paper,
            Material::CoatedPaper => self.coated_paper,
            Material::PlasticSheet => self.plastic_sheet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub mask: MaskNoiseParams,
    pub vision_deg: f64,
    pub force_deg: f64,
    pub recalls: Recalls,
    /// Initial target error of the contact trials.
    pub misalignment: Misalignment,
    /// Turns off feed-speed and force-decay spread.
    pub feed_noiseless: bool,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            mask: MaskNoiseParams::default(),
            vision_deg: VISION_NOISE_DEG,
            force_deg: FORCE_NOISE_DEG,
            recalls: Recalls::default(),
            misalignment: Misalignment::Uniform { max_deg: 20.0 },
            feed_noiseless: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub min_deg: f64,
    pub max_deg: f64,
    pub step_deg: f64,
    pub press: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { min_deg: -45.0, max_deg: 45.0, step_deg: 1.0, press: rotip_core::oracle::ESTIMATION_PRESS }
    }
}

impl SweepSection {
    pub fn angles(&self) -> Vec<f64> {
        let n = ((self.max_deg - self.min_deg) / self.step_deg + 1e-9).floor() as usize;
        (0..=n).map(|i| self.min_deg + i as f64 * self.step_deg).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactTrialsSection {
    pub methods: Vec<String>,
}

impl Default for ContactTrialsSection {
    fn default() -> Self {
        Self { methods: ContactMethod::ALL.iter().map(|m| m.label().to_string()).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSection {
    /// Finger spacing the sheet arches across, mm.
    pub span: f64,
    /// Apex deflection as a fraction of the span.
    pub delta_ratio: f64,
    /// Friction overrides; the material preset values apply when absent.
    pub mu_s1: Option<f64>,
    pub mu_k2: Option<f64>,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self { span: 20.0, delta_ratio: 0.05, mu_s1: None, mu_k2: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub solver: CalibrationParams,
    pub capture: CaptureParams,
    /// True offsets are drawn uniformly within this bound, mm.
    pub max_offset: f64,
    /// Run with the mask-noise preset instead of clean masks.
    pub noisy: bool,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self { solver: CalibrationParams::default(), capture: CaptureParams::default(), max_offset: 2.0, noisy: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub geometry: SensorGeometry,
    pub intrinsics: CameraIntrinsics,
    pub gains: ControlGains,
    pub controller: ControllerConfig,
    pub contact: ContactParams,
    pub ransac: RansacParams,
    pub noise: NoiseSection,
    pub sweep: SweepSection,
    pub contact_trials: ContactTrialsSection,
    pub feed: FeedParams,
    pub detector: DetectorParams,
    pub tracking: TrackParams,
    pub bench: BenchParams,
    pub beam: BeamSection,
    pub calibration: CalibrationSection,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config(format!("{field}: {}", message.into()))
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.geometry.validate().map_err(|e| invalid("geometry", e.to_string()))?;
        self.intrinsics.validate().map_err(|e| invalid("intrinsics", e.to_string()))?;
        self.material()?;
        for m in &self.scenario.materials {
            Material::from_label(m).ok_or_else(|| invalid("scenario.materials", format!("unknown material preset `{m}`")))?;
        }
        for m in &self.contact_trials.methods {
            ContactMethod::from_label(m)
                .ok_or_else(|| invalid("contact_trials.methods", format!("unknown method `{m}`")))?;
        }
        if self.scenario.seed_list.is_empty() && self.scenario.seeds == 0 {
            return Err(invalid("scenario.seeds", "seed list is empty"));
        }
        if self.scenario.sheets == 0 {
            return Err(invalid("scenario.sheets", "must be at least 1"));
        }
        if self.bench.target == 0 {
            return Err(invalid("bench.target", "must be at least 1"));
        }
        if !(self.sweep.step_deg > 0.0 && self.sweep.max_deg >= self.sweep.min_deg) {
            return Err(invalid("sweep", "step must be positive and max >= min"));
        }
        if !(self.ransac.iters > 0 && self.ransac.tol > 0.0) {
            return Err(invalid("ransac", "iters and tol must be positive"));
        }
        let r = &self.noise.recalls;
        for (name, v) in [("print_paper", r.print_paper), ("coated_paper", r.coated_paper), ("plastic_sheet", r.plastic_sheet)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(&format!("noise.recalls.{name}"), "must lie in [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.detector.false_positive_rate) {
            return Err(invalid("detector.false_positive_rate", "must lie in [0, 1]"));
        }
        if !(self.beam.span > 0.0 && self.beam.delta_ratio > 0.0) {
            return Err(invalid("beam", "span and delta_ratio must be positive"));
        }
        if !(self.calibration.max_offset >= 0.0 && self.calibration.max_offset < self.geometry.r) {
            return Err(invalid("calibration.max_offset", "must lie in [0, r)"));
        }
        Ok(())
    }

    pub fn material(&self) -> Result<Material, CliError> {
        Material::from_label(&self.scenario.material)
            .ok_or_else(|| invalid("scenario.material", format!("unknown material preset `{}`", self.scenario.material)))
    }

    pub fn materials(&self) -> Vec<Material> {
        self.scenario.materials.iter().filter_map(|m| Material::from_label(m)).collect()
    }

    pub fn methods(&self) -> Vec<ContactMethod> {
        self.contact_trials.methods.iter().filter_map(|m| ContactMethod::from_label(m)).collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.scenario.seed_list.is_empty() {
            (0..self.scenario.seeds).collect()
        } else {
            self.scenario.seed_list.clone()
        }
    }

    pub fn feed_params(&self) -> FeedParams {
        let mut f = self.feed;
        f.finger_radius = self.geometry.r;
        if self.noise.feed_noiseless {
            f = f.noiseless();
        }
        f
    }

    pub fn detector_for(&self, m: Material) -> DetectorParams {
        self.detector.with_recall(self.noise.recalls.get(m))
    }

    pub fn contact_setup(&self) -> ContactSetup {
        ContactSetup {
            intrinsics: self.intrinsics,
            geometry: self.geometry,
            gains: self.gains,
            controller: self.controller,
            params: self.contact,
            ransac: self.ransac,
            mask_noise: self.noise.mask,
            misalignment: self.noise.misalignment,
            force_noise_deg: self.noise.force_deg,
            object_tilt_deg: self.scenario.tilt_deg,
        }
    }

    pub fn plane_sweep(&self) -> PlaneSweep {
        PlaneSweep {
            press: self.sweep.press,
            indentation: self.contact.indentation,
            mask_noise: self.noise.mask,
            ransac: self.ransac,
            vision_deg: self.noise.vision_deg,
            force_deg: self.noise.force_deg,
        }
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

fn read_table(path: &Path, stack: &mut Vec<PathBuf>) -> Result<toml::Table, CliError> {
    let canonical = path
        .canonicalize()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if stack.contains(&canonical) {
        return Err(CliError::Config(format!("{}: include cycle", path.display())));
    }
    let text = std::fs::read_to_string(&canonical).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut table: toml::Table =
        text.parse().map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))?;
    stack.push(canonical.clone());
    let includes = match table.remove("include") {
        None => Vec::new(),
        Some(toml::Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                toml::Value::String(s) => Ok(s),
                other => Err(CliError::Config(format!("{}: include entries must be strings, got {other}", path.display()))),
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(toml::Value::String(s)) => vec![s],
        Some(other) => {
            return Err(CliError::Config(format!("{}: include must be a string or list, got {other}", path.display())))
        }
    };
    let dir = canonical.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut merged = toml::Table::new();
    for inc in includes {
        let sub = read_table(&dir.join(inc), stack)?;
        merge(&mut merged, sub);
    }
    merge(&mut merged, table);
    stack.pop();
    Ok(merged)
}

/// Recursive table merge; values in `over` win.
pub fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Loads a configuration file, resolving includes relative to each file.
pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    let table = read_table(path, &mut Vec::new())?;
    let cfg: ScenarioConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}
