//! End-to-end trials: contact, feeding with or without tactile counting,
//! and grasp closure, scored with SR and PPM.

use serde::{Deserialize, Serialize};

use crate::contact::{run_contact_trial, ContactMethod, ContactSetup, ContactWorld};
use crate::counting::{count_frames, count_step, CounterState, TrackParams};
use crate::edges::{detect_frame, edge_event_stream, frames, DetectorParams};
use crate::feed::{
    estimate_total_time, ppm_metric, simulate_feed, sr_metric, FeedError, FeedParams, FeedPolicy, FeedScenario, FeedSim,
    GraspResult, Material,
};
use crate::geometry::angle_error;
use crate::oracle::{
    boundary_coords, corrupt_mask, render_with_grid, tilted_normal, ContactMask, ContactScene, MaskNoiseParams, DEFAULT_INDENTATION,
    ESTIMATION_PRESS,
};
use crate::plane::{
    force_plane_baseline, ransac_plane_toward, vision_plane_baseline, Plane, RansacParams, FORCE_NOISE_DEG,
    VISION_NOISE_DEG,
};
use crate::rng::derive;
use crate::sensor::{backproject_contour, SurfaceGrid};
use nalgebra::Vector3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchParams {
    pub target: u32,
    /// Sheets in the stack beyond the target.
    pub extra_sheets: u32,
    /// Finger speed multiplier while counting.
    pub counting_speed: f64,
    /// Arm motion outside contact and feeding (reach, lift, place), s.
    pub overhead_s: f64,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self { target: 10, extra_sheets: 10, counting_speed: 0.75, overhead_s: 43.5 }
    }
}

/// Everything one grasp-bench configuration needs.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspBench {
    pub contact: ContactSetup,
    pub material: Material,
    pub feed: FeedParams,
    pub detector: DetectorParams,
    pub tracking: TrackParams,
    pub bench: BenchParams,
    pub tilt_deg: f64,
}

impl GraspBench {
    pub fn new(material: Material, tilt_deg: f64) -> Self {
        Self {
            contact: ContactSetup::default(),
            material,
            feed: FeedParams::default(),
            detector: DetectorParams::default().with_recall(material.preset().recall),
            tracking: TrackParams::default(),
            bench: BenchParams::default(),
            tilt_deg,
        }
    }

    /// No segmentation, feed or detector noise.
    pub fn noiseless(mut self) -> Self {
        self.contact.mask_noise = crate::oracle::MaskNoiseParams::NONE;
        self.feed = self.feed.noiseless();
        self.detector = self.detector.noiseless();
        self
    }

    fn scenario(&self, with_counting: bool) -> FeedScenario {
        let mut s = FeedScenario::new(self.bench.target + self.bench.extra_sheets, self.material);
        s.params = self.feed;
        s.tilt_deg = self.tilt_deg;
        s.speed_scale = if with_counting { self.bench.counting_speed } else { 1.0 };
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspTrial {
    pub seed: u64,
    pub with_counting: bool,
    pub two_finger: bool,
    pub contact_time: f64,
    pub feed_time: f64,
    pub fed: u32,
    /// Travel of the sheet in progress when the fingers closed, mm.
    pub partial: f64,
    pub counted: Option<u32>,
    pub result: GraspResult,
    pub sr: f64,
    pub ppm: f64,
}

/// One pick: tactile two-finger contact, feeding until the count (or the
/// fixed-time estimate) says the target is reached, then closing. A sheet
/// that has travelled at least half of `l_c` ends up in the grasp.
pub fn run_grasp_trial(
    cfg: &GraspBench,
    world: &ContactWorld,
    with_counting: bool,
    seed: u64,
) -> Result<GraspTrial, FeedError> {
    let contact = run_contact_trial(&cfg.contact, world, ContactMethod::VisionForceTactile, derive(seed, 1), false);
    let contact_time = contact.elapsed();
    let target = cfg.bench.target;
    let (fed, partial, feed_time, counted) = if !contact.two_finger {
        (0, 0.0, 0.0, None)
    } else {
        let scenario = cfg.scenario(with_counting);
        let l_c = scenario.params.l_c;
        let mut sim = FeedSim::new(&scenario, FeedPolicy::WithCA, derive(seed, 2))?;
        let det_seed = derive(seed, 3);
        let mut counter = CounterState::new();
        let deadline = estimate_total_time(target, l_c, scenario.params.v_feed());
        loop {
            if !with_counting && sim.time() >= deadline {
                break;
            }
            let Some(tick) = sim.step() else { break };
            if with_counting {
                let visible = (tick.fed < scenario.sheets).then_some(tick.progress);
                let dets = detect_frame(tick.tick, visible, l_c, &cfg.detector, det_seed);
                counter = count_step(&counter, tick.tick, &dets, &cfg.tracking);
                if counter.count >= target && counter.newest_settled() {
                    break;
                }
            }
        }
        let partial = if sim.is_finished() { 0.0 } else { sim.progress() };
        let fed = sim.fed();
        let time = sim.time();
        sim.stop(fed + u32::from(partial >= 0.5 * l_c));
        (fed, partial, time, with_counting.then_some(counter.count))
    };
    let grasped = if contact.two_finger { fed + u32::from(partial >= 0.5 * cfg.feed.l_c) } else { 0 };
    let result = GraspResult { grasped, target, elapsed: cfg.bench.overhead_s + contact_time + feed_time };
    Ok(GraspTrial {
        seed,
        with_counting,
        two_finger: contact.two_finger,
        contact_time,
        feed_time,
        fed,
        partial,
        counted,
        result,
        sr: sr_metric(&result),
        ppm: ppm_metric(&result),
    })
}

/// Counts a full feed of `sheets` from its detection stream; returns
/// `(final count, sheets fed)`.
pub fn run_count_trial(
    sheets: u32,
    material: Material,
    feed: &FeedParams,
    speed_scale: f64,
    detector: &DetectorParams,
    tracking: &TrackParams,
    seed: u64,
) -> Result<(u32, u32), FeedError> {
    let mut scenario = FeedScenario::new(sheets, material);
    scenario.params = *feed;
    scenario.speed_scale = speed_scale;
    let log = simulate_feed(&scenario, FeedPolicy::WithCA, derive(seed, 2))?;
    let dets = edge_event_stream(&log, detector, derive(seed, 3));
    let last = log.ticks.last().map_or(0, |t| t.tick);
    let state = count_frames(&frames(&dets, 1, last), 1, tracking);
    Ok((state.count, log.fed()))
}

/// Plane-estimation sweep settings shared by all angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaneSweep {
    pub press: f64,
    pub indentation: f64,
    pub mask_noise: MaskNoiseParams,
    pub ransac: RansacParams,
    pub vision_deg: f64,
    pub force_deg: f64,
}

impl Default for PlaneSweep {
    fn default() -> Self {
        Self {
            press: ESTIMATION_PRESS,
            indentation: DEFAULT_INDENTATION,
            mask_noise: MaskNoiseParams::default(),
            ransac: RansacParams::default(),
            vision_deg: VISION_NOISE_DEG,
            force_deg: FORCE_NOISE_DEG,
        }
    }
}

/// Angle errors, degrees, of the three estimators for one tilt and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneErrors {
    pub tactile: f64,
    pub vision: f64,
    pub force: f64,
}

/// The corrupted contact mask `plane_errors` fits for this tilt and seed.
pub fn plane_mask(grid: &SurfaceGrid, sweep: &PlaneSweep, angle_deg: f64, seed: u64) -> Result<ContactMask, String> {
    let truth = tilted_normal(angle_deg.to_radians());
    let scene = ContactScene::pressed(grid.geometry(), truth, sweep.press, sweep.indentation).map_err(|e| e.to_string())?;
    Ok(corrupt_mask(&render_with_grid(&scene, grid), &sweep.mask_noise, derive(seed, 1)))
}

/// Tactile estimate (render, corrupt, boundary, back-project, RANSAC) and
/// both baselines for a plane tilted by `angle_deg` about the sensor y axis.
pub fn plane_errors(grid: &SurfaceGrid, sweep: &PlaneSweep, angle_deg: f64, seed: u64) -> Result<PlaneErrors, String> {
    let truth = tilted_normal(angle_deg.to_radians());
    let g = grid.geometry();
    let mask = plane_mask(grid, sweep, angle_deg, seed)?;
    let contour = boundary_coords(&mask).map_err(|e| e.to_string())?;
    let cloud = backproject_contour(&contour, grid.intrinsics(), g).map_err(|e| e.to_string())?;
    let est = ransac_plane_toward(&cloud, &sweep.ransac, derive(seed, 2), &Vector3::zeros()).map_err(|e| e.to_string())?;
    let plane = Plane::new(truth, 0.0);
    Ok(PlaneErrors {
        tactile: angle_error(&est.normal, &truth),
        vision: angle_error(&vision_plane_baseline(&plane, sweep.vision_deg, derive(seed, 3)).normal, &truth),
        force: angle_error(&force_plane_baseline(&plane, sweep.force_deg, derive(seed, 4)).normal, &truth),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_pick_is_exact() {
        let cfg = GraspBench::new(Material::PrintPaper, 0.0).noiseless();
        let world = ContactWorld::new(&cfg.contact);
        for counting in [true, false] {
            let t = run_grasp_trial(&cfg, &world, counting, 4).unwrap();
            assert!(t.two_finger);
            assert_eq!(t.result.grasped, 10, "{t:?}");
            assert_eq!(t.sr, 1.0);
        }
    }

    #[test]
    fn noiseless_count_matches_feed() {
        let feed = FeedParams::default().noiseless();
        let det = DetectorParams::default().noiseless();
        let (c, fed) = run_count_trial(10, Material::PrintPaper, &feed, 0.75, &det, &TrackParams::default(), 0).unwrap();
        assert_eq!((c, fed), (10, 10));
    }
}
