//! Quasi-static multi-sheet feeding: stack state, contact-force decay,
//! feed kinematics and the success-rate / pages-per-minute metrics.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{continuous_adjust, TICK_DT};
use crate::rng::{derive, seeded, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeedError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    PrintPaper,
    CoatedPaper,
    PlasticSheet,
}

impl Material {
    pub const ALL: [Material; 3] = [Material::PrintPaper, Material::CoatedPaper, Material::PlasticSheet];

    pub fn label(self) -> &'static str {
        match self {
            Material::PrintPaper => "print_paper",
            Material::CoatedPaper => "coated_paper",
            Material::PlasticSheet => "plastic_sheet",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == s)
    }

    pub fn preset(self) -> MaterialPreset {
        match self {
            Material::PrintPaper => MaterialPreset {
                thickness: 0.10,
                mu_s1: 0.5,
                mu_k2: 0.1,
                recall: 0.919,
                youngs_modulus: 828.0,
                density: 1.2e-9,
                poisson: 0.3,
            },
            Material::CoatedPaper => MaterialPreset {
                thickness: 0.06,
                mu_s1: 0.45,
                mu_k2: 0.12,
                recall: 0.878,
                youngs_modulus: 828.0,
                density: 1.2e-9,
                poisson: 0.3,
            },
            Material::PlasticSheet => MaterialPreset {
                thickness: 0.16,
                mu_s1: 0.4,
                mu_k2: 0.15,
                recall: 0.954,
                youngs_modulus: 2500.0,
                density: 1.4e-9,
                poisson: 0.38,
            },
        }
    }
}

/// Per-material constants. Thicknesses and the non-paper friction and
/// stiffness values are configuration defaults, not measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialPreset {
    /// Sheet thickness, mm.
    pub thickness: f64,
    /// Static friction between finger and top sheet.
    pub mu_s1: f64,
    /// Kinetic friction between sheets.
    pub mu_k2: f64,
    /// Per-frame edge detection recall.
    pub recall: f64,
    /// MPa.
    pub youngs_modulus: f64,
    /// t/mm^3.
    pub density: f64,
    /// Recorded for completeness; the beam model does not use it.
    pub poisson: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeedPolicy {
    WithCA,
    WithoutCA,
}

impl FeedPolicy {
    pub fn label(self) -> &'static str {
        match self {
            FeedPolicy::WithCA => "with_ca",
            FeedPolicy::WithoutCA => "without_ca",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "with_ca" => Some(FeedPolicy::WithCA),
            "without_ca" => Some(FeedPolicy::WithoutCA),
            _ => None,
        }
    }
}

/// Feed kinematics and the phenomenological contact-force model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedParams {
    /// Active finger rotation speed, deg/s.
    pub omega_deg_s: f64,
    /// Rolling radius of the fingertip, mm.
    pub finger_radius: f64,
    /// Travel needed to feed one sheet, mm.
    pub l_c: f64,
    /// Finger spacing used by the continuous adjustment, mm.
    pub finger_spacing: f64,
    /// Initial normal force per finger, N.
    pub f0: f64,
    /// Force lost per mm of accumulated stack without adjustment, N/mm.
    pub decay_c: f64,
    /// Relative per-trial spread of `decay_c`.
    pub decay_sd: f64,
    /// Below this normal force the finger loses the sheet, N.
    pub f_contact_min: f64,
    /// Slow-down of the feed as the normal force drops below `f0`.
    pub kappa: f64,
    /// Relative per-sheet speed spread.
    pub speed_cv: f64,
    /// Relative per-trial speed spread.
    pub trial_speed_sd: f64,
    /// Relative slow-down per unit sin(tilt) of the supporting surface.
    pub tilt_gain: f64,
    /// Minimal squeeze force from the beam model at the grasp location, N.
    pub min_squeeze_force: f64,
    /// Per-sheet time after which the feed is declared stuck, s.
    pub max_sheet_time: f64,
}

impl Default for FeedParams {
    fn default() -> Self {
        Self {
            omega_deg_s: 90.0,
            finger_radius: 8.0,
            l_c: 11.31,
            finger_spacing: 20.0,
            f0: 4.0,
            decay_c: 4.5,
            decay_sd: 0.05,
            f_contact_min: 1.5,
            kappa: 2.37,
            speed_cv: 0.08,
            trial_speed_sd: 0.07,
            tilt_gain: 0.05,
            min_squeeze_force: 0.0,
            max_sheet_time: 10.0,
        }
    }
}

impl FeedParams {
    /// Surface speed of the active finger, `omega * r`, mm/s.
    pub fn v_feed(&self) -> f64 {
        self.omega_deg_s.to_radians() * self.finger_radius
    }

    /// Nominal time per sheet, s.
    pub fn nominal_sheet_time(&self) -> f64 {
        self.l_c / self.v_feed()
    }

    pub fn noiseless(mut self) -> Self {
        self.decay_sd = 0.0;
        self.speed_cv = 0.0;
        self.trial_speed_sd = 0.0;
        self
    }
}

/// Everything `simulate_feed` needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedScenario {
    pub sheets: u32,
    pub material: Material,
    pub preset: MaterialPreset,
    pub params: FeedParams,
    /// Tilt of the supporting surface, degrees.
    pub tilt_deg: f64,
    /// Multiplier on the finger speed (below 1 while counting).
    pub speed_scale: f64,
}

impl FeedScenario {
    pub fn new(sheets: u32, material: Material) -> Self {
        Self {
            sheets,
            material,
            preset: material.preset(),
            params: FeedParams::default(),
            tilt_deg: 0.0,
            speed_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), FeedError> {
        let bad = |m: &str| Err(FeedError::InvalidScenario(m.to_string()));
        let p = &self.params;
        if self.sheets == 0 {
            return bad("sheets must be at least 1");
        }
        if !(self.preset.thickness > 0.0) {
            return bad("sheet thickness must be positive");
        }
        if !(p.omega_deg_s > 0.0 && p.finger_radius > 0.0 && p.l_c > 0.0 && p.finger_spacing > 0.0) {
            return bad("speed, radius, l_c and finger spacing must be positive");
        }
        if !(p.f0 > 0.0 && p.f_contact_min >= 0.0 && p.decay_c >= 0.0 && p.kappa >= 0.0) {
            return bad("force model constants must be non-negative (f0 positive)");
        }
        if !(p.speed_cv >= 0.0 && p.trial_speed_sd >= 0.0 && p.decay_sd >= 0.0) {
            return bad("noise levels must be non-negative");
        }
        if !(self.speed_scale > 0.0 && p.max_sheet_time > 0.0) {
            return bad("speed scale and max sheet time must be positive");
        }
        Ok(())
    }
}

/// State of the stack at one control tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedTick {
    pub tick: u64,
    /// Time at the end of the tick, s.
    pub time: f64,
    /// 1-based index of the sheet being fed at the end of the tick.
    pub sheet: u32,
    /// Travel of that sheet, mm.
    pub progress: f64,
    /// Normal force of the active finger, N.
    pub force: f64,
    pub fed: u32,
}

/// Ground-truth completion of one sheet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheetEvent {
    pub sheet: u32,
    pub tick: u64,
    pub time: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeedOutcome {
    AllFed,
    ContactLost { sheet: u32 },
    Grasped { count: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedLog {
    pub policy: FeedPolicy,
    pub seed: u64,
    pub total_sheets: u32,
    pub l_c: f64,
    pub ticks: Vec<FeedTick>,
    pub sheets: Vec<SheetEvent>,
    pub outcome: FeedOutcome,
}

impl FeedLog {
    pub fn sheet_times(&self) -> Vec<f64> {
        self.sheets.iter().map(|s| s.duration).collect()
    }

    pub fn fed(&self) -> u32 {
        self.sheets.len() as u32
    }

    /// JSON-lines: one record per tick, per sheet and a closing outcome line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.ticks {
            out.push_str(&serde_json::json!({"kind": "tick", "tick": t.tick, "time": t.time, "sheet": t.sheet, "progress": t.progress, "force": t.force, "fed": t.fed}).to_string());
            out.push('\n');
        }
        for s in &self.sheets {
            out.push_str(&serde_json::json!({"kind": "sheet", "sheet": s.sheet, "tick": s.tick, "time": s.time, "duration": s.duration}).to_string());
            out.push('\n');
        }
        out.push_str(
            &serde_json::json!({"kind": "outcome", "policy": self.policy.label(), "seed": self.seed, "total_sheets": self.total_sheets, "fed": self.fed(), "outcome": self.outcome})
                .to_string(),
        );
        out.push('\n');
        out
    }
}

/// Tick-by-tick feeding simulation; `simulate_feed` runs it to completion.
#[derive(Debug, Clone)]
pub struct FeedSim {
    scenario: FeedScenario,
    policy: FeedPolicy,
    seed: u64,
    rng: SimRng,
    trial_factor: f64,
    decay_c: f64,
    sheet_factor: f64,
    fed: u32,
    progress: f64,
    time: f64,
    sheet_start: f64,
    tick: u64,
    force: f64,
    ticks: Vec<FeedTick>,
    sheets: Vec<SheetEvent>,
    outcome: Option<FeedOutcome>,
}

impl FeedSim {
    pub fn new(scenario: &FeedScenario, policy: FeedPolicy, seed: u64) -> Result<Self, FeedError> {
        scenario.validate()?;
        let p = &scenario.params;
        let mut rng = seeded(derive(seed, 11));
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let trial_factor = (1.0 + p.trial_speed_sd * z1).max(0.3);
        let decay_c = p.decay_c * (1.0 + p.decay_sd * z2).max(0.0);
        let mut sim = Self {
            scenario: *scenario,
            policy,
            seed,
            rng,
            trial_factor,
            decay_c,
            sheet_factor: 1.0,
            fed: 0,
            progress: 0.0,
            time: 0.0,
            sheet_start: 0.0,
            tick: 0,
            force: p.f0,
            ticks: Vec::new(),
            sheets: Vec::new(),
            outcome: None,
        };
        sim.start_sheet();
        Ok(sim)
    }

    pub fn fed(&self) -> u32 {
        self.fed
    }

    pub fn progress(&self) -> f64 {
        self.progress
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn is_finished(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn outcome(&self) -> Option<FeedOutcome> {
        self.outcome
    }

    /// Normal force on the sheet about to be fed, after `fed` sheets.
    fn contact_force(&self) -> Option<f64> {
        let p = &self.scenario.params;
        let h = self.scenario.preset.thickness;
        match self.policy {
            FeedPolicy::WithCA => continuous_adjust(self.fed, h, p.finger_spacing).ok().map(|_| p.f0),
            FeedPolicy::WithoutCA => Some((p.f0 - self.decay_c * self.fed as f64 * h).max(0.0)),
        }
    }

    fn start_sheet(&mut self) {
        if self.fed >= self.scenario.sheets {
            self.outcome = Some(FeedOutcome::AllFed);
            return;
        }
        let p = self.scenario.params;
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.sheet_factor = (1.0 + p.speed_cv * z).max(0.3);
        self.progress = 0.0;
        self.sheet_start = self.time;
        let required = p.f_contact_min.max(p.min_squeeze_force);
        match self.contact_force() {
            Some(f) if f >= required => self.force = f,
            other => {
                self.force = other.unwrap_or(0.0);
                self.outcome = Some(FeedOutcome::ContactLost { sheet: self.fed + 1 });
            }
        }
    }

    /// Current sheet speed, mm/s.
    fn speed(&self) -> f64 {
        let p = &self.scenario.params;
        let slow = 1.0 + p.kappa * (p.f0 - self.force).max(0.0) / p.f0;
        let tilt = 1.0 + p.tilt_gain * self.scenario.tilt_deg.to_radians().sin().abs();
        p.v_feed() * self.scenario.speed_scale * self.trial_factor * self.sheet_factor / (slow * tilt)
    }

    /// Advances one control tick; `None` once the feed has ended.
    pub fn step(&mut self) -> Option<FeedTick> {
        if self.outcome.is_some() {
            return None;
        }
        let l_c = self.scenario.params.l_c;
        let mut remaining = TICK_DT;
        while remaining > 0.0 && self.outcome.is_none() {
            let v = self.speed();
            let to_go = l_c - self.progress;
            if v * remaining < to_go {
                self.progress += v * remaining;
                self.time += remaining;
                remaining = 0.0;
            } else {
                let dt = to_go / v;
                self.time += dt;
                remaining -= dt;
                self.fed += 1;
                self.sheets.push(SheetEvent {
                    sheet: self.fed,
                    tick: self.tick + 1,
                    time: self.time,
                    duration: self.time - self.sheet_start,
                });
                self.start_sheet();
            }
            if self.outcome.is_none() && self.time - self.sheet_start > self.scenario.params.max_sheet_time {
                self.outcome = Some(FeedOutcome::ContactLost { sheet: self.fed + 1 });
            }
        }
        self.tick += 1;
        let rec = FeedTick {
            tick: self.tick,
            time: self.time,
            sheet: (self.fed + 1).min(self.scenario.sheets),
            progress: if self.fed >= self.scenario.sheets { l_c } else { self.progress },
            force: self.force,
            fed: self.fed,
        };
        self.ticks.push(rec);
        Some(rec)
    }

    /// Stops feeding early, recording how many sheets end up in the grasp.
    pub fn stop(&mut self, grasped: u32) {
        if self.outcome.is_none() {
            self.outcome = Some(FeedOutcome::Grasped { count: grasped });
        }
    }

    pub fn into_log(self) -> FeedLog {
        FeedLog {
            policy: self.policy,
            seed: self.seed,
            total_sheets: self.scenario.sheets,
            l_c: self.scenario.params.l_c,
            ticks: self.ticks,
            sheets: self.sheets,
            outcome: self.outcome.unwrap_or(FeedOutcome::Grasped { count: self.fed }),
        }
    }
}

/// Feeds the whole stack (or until contact is lost).
pub fn simulate_feed(scenario: &FeedScenario, policy: FeedPolicy, seed: u64) -> Result<FeedLog, FeedError> {
    let mut sim = FeedSim::new(scenario, policy, seed)?;
    while sim.step().is_some() {}
    Ok(sim.into_log())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspResult {
    pub grasped: u32,
    pub target: u32,
    /// Seconds.
    pub elapsed: f64,
}

/// `1 - |grasped - target| / target`, clamped to `[0, 1]`.
pub fn sr_metric(g: &GraspResult) -> f64 {
    assert!(g.target >= 1, "target must be at least 1");
    let diff = (g.grasped as f64 - g.target as f64).abs();
    (1.0 - diff / g.target as f64).max(0.0)
}

/// Pages per minute.
pub fn ppm_metric(g: &GraspResult) -> f64 {
    assert!(g.elapsed > 0.0, "elapsed must be positive");
    g.grasped as f64 * 60.0 / g.elapsed
}

/// Fixed-time baseline: `n_desired * l_c / v_feed`.
pub fn estimate_total_time(n_desired: u32, l_c: f64, v_feed: f64) -> f64 {
    n_desired as f64 * (l_c / v_feed)
}

/// Mean and sample standard deviation; `(0, 0)` for empty input.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(sheets: u32) -> FeedScenario {
        let mut s = FeedScenario::new(sheets, Material::PrintPaper);
        s.params = s.params.noiseless();
        s
    }

    #[test]
    fn single_sheet_time_is_kinematic() {
        let s = noiseless(1);
        let log = simulate_feed(&s, FeedPolicy::WithCA, 0).unwrap();
        assert_eq!(log.outcome, FeedOutcome::AllFed);
        let expected = s.params.l_c / s.params.v_feed();
        assert!((log.sheets[0].duration - expected).abs() < 1e-12);
    }

    #[test]
    fn noiseless_without_ca_loses_sheet_seven() {
        // F(n) = 4 - 4.5 * 0.1 * n drops below 1.5 N once n = 6 sheets are stacked
        let log = simulate_feed(&noiseless(15), FeedPolicy::WithoutCA, 0).unwrap();
        assert_eq!(log.outcome, FeedOutcome::ContactLost { sheet: 7 });
        assert_eq!(log.fed(), 6);
    }

    #[test]
    fn metrics_examples() {
        let g = |grasped, target, elapsed| GraspResult { grasped, target, elapsed };
        assert_eq!(sr_metric(&g(10, 10, 1.0)), 1.0);
        assert!((sr_metric(&g(8, 10, 1.0)) - 0.8).abs() < 1e-15);
        assert_eq!(sr_metric(&g(25, 10, 1.0)), 0.0);
        assert_eq!(sr_metric(&g(12, 10, 1.0)), 0.8);
        assert_eq!(ppm_metric(&g(10, 10, 60.0)), 10.0);
        assert!((ppm_metric(&g(10, 10, 56.6)) - 10.6).abs() < 0.01);
        assert_eq!(ppm_metric(&g(0, 10, 60.0)), 0.0);
        assert_eq!(estimate_total_time(1, 100.0, 100.0), 1.0);
        assert!((estimate_total_time(10, 0.9, 1.0) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_scenarios() {
        let mut s = FeedScenario::new(0, Material::PrintPaper);
        assert!(simulate_feed(&s, FeedPolicy::WithCA, 0).is_err());
        s.sheets = 3;
        s.params.l_c = -1.0;
        assert!(simulate_feed(&s, FeedPolicy::WithCA, 0).is_err());
    }

    #[test]
    fn mean_std_matches_hand_values() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
