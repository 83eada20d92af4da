//! Closed-loop two-finger contact trials: a kinematic gripper with two
//! downward-facing fingertip sensors approaching a flat object.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::{
    control_step, ControlError, ControlGains, ControllerConfig, ControllerState, Observation, Phase, TICK_DT,
};
use crate::geometry::{rodrigues_align, RigidTransform, UnitVector3};
use crate::oracle::{boundary_coords, contact_pixel_count, corrupt_mask, render_with_grid, ContactScene, MaskNoiseParams};
use crate::plane::{force_plane_baseline, perturb_normal, ransac_plane_toward, Plane, RansacParams};
use crate::rng::{derive, seeded};
use crate::sensor::{backproject_contour, CameraIntrinsics, SensorGeometry, SurfaceGrid};

/// Plant and perception parameters of the contact stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactParams {
    /// Penetration threshold of the contact oracle, mm.
    pub indentation: f64,
    /// Classifier threshold on the contact area, pixels.
    pub pixel_threshold: usize,
    /// Fingertip penetration at which the force limit stops motion, mm.
    pub halt_press: f64,
    /// Penetration that triggers an emergency stop, mm.
    pub estop_press: f64,
    /// Distance between the two fingertip axes, mm.
    pub finger_spacing: f64,
    /// Start height of the tool point above the grasp point, mm.
    pub start_height: f64,
    /// Standard deviation of the vision target offset along the normal, mm.
    pub vision_offset_sd: f64,
    pub max_ticks: u64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            indentation: 0.2,
            pixel_threshold: 2000,
            halt_press: 0.6,
            estop_press: 3.0,
            finger_spacing: 20.0,
            start_height: 60.0,
            vision_offset_sd: 1.5,
            max_ticks: 3000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContactMethod {
    Vision,
    VisionForceWA,
    VisionForce,
    VisionForceTactile,
}

impl ContactMethod {
    pub const ALL: [ContactMethod; 4] = [
        ContactMethod::Vision,
        ContactMethod::VisionForceWA,
        ContactMethod::VisionForce,
        ContactMethod::VisionForceTactile,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ContactMethod::Vision => "vision",
            ContactMethod::VisionForceWA => "vision_force_wa",
            ContactMethod::VisionForce => "vision_force",
            ContactMethod::VisionForceTactile => "vision_force_tactile",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == s)
    }

    fn controller(self, base: &ControllerConfig) -> ControllerConfig {
        let mut c = *base;
        match self {
            ContactMethod::Vision => {
                c.use_precontact = false;
                c.feedforward = false;
                c.adjust = false;
            }
            ContactMethod::VisionForceWA | ContactMethod::VisionForce => c.adjust = false,
            ContactMethod::VisionForceTactile => {}
        }
        c
    }
}

/// How the initial target orientation deviates from the true object normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Misalignment {
    /// Folded-normal vision error with the given mean, degrees.
    Vision { mean_deg: f64 },
    /// Tilt drawn uniformly in `[-max_deg, max_deg]` about a random horizontal axis.
    Uniform { max_deg: f64 },
}

/// Everything a trial needs besides its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSetup {
    pub intrinsics: CameraIntrinsics,
    pub geometry: SensorGeometry,
    pub gains: ControlGains,
    pub controller: ControllerConfig,
    pub params: ContactParams,
    pub ransac: RansacParams,
    pub mask_noise: MaskNoiseParams,
    pub misalignment: Misalignment,
    pub force_noise_deg: f64,
    /// Tilt of the object surface about the world y axis, degrees.
    pub object_tilt_deg: f64,
}

impl Default for ContactSetup {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::default(),
            geometry: SensorGeometry::default(),
            gains: ControlGains::default(),
            controller: ControllerConfig::default(),
            params: ContactParams::default(),
            ransac: RansacParams::default(),
            mask_noise: MaskNoiseParams::NONE,
            misalignment: Misalignment::Vision { mean_deg: crate::plane::VISION_NOISE_DEG },
            force_noise_deg: crate::plane::FORCE_NOISE_DEG,
            object_tilt_deg: 0.0,
        }
    }
}

/// One JSON-lines row of the controller trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tick: u64,
    pub phase: Phase,
    pub error: [f64; 6],
    pub n: u8,
    pub command: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactOutcome {
    pub method: ContactMethod,
    pub seed: u64,
    pub one_finger: bool,
    pub two_finger: bool,
    pub rounds: u32,
    pub ticks: u64,
    pub estop: bool,
    pub failure: Option<String>,
    /// Initial angle between the target z axis and the object normal, degrees.
    pub initial_misalignment_deg: f64,
    pub final_pose: [[f64; 4]; 4],
    pub trace: Vec<TraceRow>,
}

impl ContactOutcome {
    pub fn elapsed(&self) -> f64 {
        self.ticks as f64 * TICK_DT
    }
}

/// Sensor frame of finger `i` (0 or 1) in the end-effector frame: fingertips
/// point along the end-effector -z with their apexes at the tool-point level.
pub fn finger_mount(i: usize, spacing: f64, g: &SensorGeometry) -> RigidTransform {
    let x = if i == 0 { -spacing / 2.0 } else { spacing / 2.0 };
    RigidTransform::from_translation(Vector3::new(x - g.ox, g.oy, g.oz + g.r)).compose(&RigidTransform::rot_x(std::f64::consts::PI))
}

/// Deepest penetration of the fingertip surface into the plane, mm (<= 0 when apart).
pub fn finger_press(scene: &ContactScene, grid: &SurfaceGrid) -> f64 {
    let plane = scene.plane_in_sensor();
    let g = grid.geometry();
    let n = plane.normal.as_vector();
    if n.z < 0.0 {
        return -(n.dot(&g.center()) - g.r - plane.offset);
    }
    -grid
        .points()
        .iter()
        .flatten()
        .map(|p| plane.signed_distance(p))
        .fold(f64::INFINITY, f64::min)
}

/// Orientation whose z axis is `n` and whose x axis stays close to world x.
fn frame_with_z(n: &UnitVector3) -> RigidTransform {
    RigidTransform::from_rotation(rodrigues_align(&UnitVector3::Z, n)).expect("rotation")
}

fn random_horizontal_tilt(n: &UnitVector3, angle: f64, azimuth: f64) -> UnitVector3 {
    let axis = UnitVector3::from_xyz(azimuth.cos(), azimuth.sin(), 0.0).expect("unit");
    let base = frame_with_z(n);
    // rotate about an axis horizontal in the object's own frame
    n.rotated(&(base.rotation() * RigidTransform::from_axis_angle(&axis, angle).rotation() * base.rotation().transpose()))
}

/// Pre-built per-geometry grids shared across trials.
pub struct ContactWorld {
    pub grid: SurfaceGrid,
}

impl ContactWorld {
    pub fn new(setup: &ContactSetup) -> Self {
        Self {
            grid: SurfaceGrid::new(&setup.intrinsics, &setup.geometry),
        }
    }
}

/// Runs one contact trial.
pub fn run_contact_trial(setup: &ContactSetup, world: &ContactWorld, method: ContactMethod, seed: u64, record_trace: bool) -> ContactOutcome {
    let p = &setup.params;
    let tilt = setup.object_tilt_deg.to_radians();
    let n_obj = UnitVector3::from_xyz(tilt.sin(), 0.0, tilt.cos()).expect("unit");
    let object = Plane::new(n_obj, 0.0);

    // Target generation shares its random draws across methods for a given seed.
    let mut rng = seeded(derive(seed, 1));
    let n_vision = match setup.misalignment {
        Misalignment::Vision { mean_deg } => perturb_normal(&n_obj, mean_deg, derive(seed, 2)),
        Misalignment::Uniform { max_deg } => {
            let a = rng.random_range(-max_deg..=max_deg).to_radians();
            let az = rng.random_range(0.0..std::f64::consts::PI);
            random_horizontal_tilt(&n_obj, a, az)
        }
    };
    let offset = if p.vision_offset_sd > 0.0 {
        Normal::new(0.0, p.vision_offset_sd).expect("finite").sample(&mut rng)
    } else {
        0.0
    };
    let n_target = match method {
        ContactMethod::VisionForce => force_plane_baseline(&object, setup.force_noise_deg, derive(seed, 3)).normal,
        _ => n_vision,
    };
    let grasp_point = n_obj.as_vector() * offset;
    let target = RigidTransform::from_translation(grasp_point).compose(&frame_with_z(&n_target));
    let initial_misalignment_deg = crate::geometry::angle_error(&n_target, &n_obj);

    let mut pose = RigidTransform::from_translation(Vector3::new(0.0, 0.0, p.start_height));
    let cfg = method.controller(&setup.controller);
    let mut state = ControllerState::new(target, &cfg);
    let mounts = [0, 1].map(|i| finger_mount(i, p.finger_spacing, &setup.geometry));
    let tactile = method == ContactMethod::VisionForceTactile;
    let force_halt = method != ContactMethod::Vision;

    let mut trace = Vec::new();
    let mut estop = false;
    let mut failure = None;
    let mut last_pixels: [usize; 2];
    loop {
        let scenes = mounts.map(|m| ContactScene {
            sensor_pose: pose.compose(&m),
            plane: object,
            indentation: p.indentation,
        });
        let press = scenes.map(|s| finger_press(&s, &world.grid));
        let pixels = scenes.map(|s| contact_pixel_count(&s, &world.grid));
        last_pixels = pixels;
        if press.iter().any(|x| *x >= p.estop_press) {
            estop = true;
            failure = Some("emergency stop".to_string());
            break;
        }
        let halted = force_halt && press.iter().any(|x| *x >= p.halt_press);
        let touching: Vec<usize> = (0..2).filter(|&i| pixels[i] >= p.pixel_threshold).collect();
        let contact_normal = if tactile && halted && touching.len() == 1 {
            let i = touching[0];
            estimate_normal(setup, world, &scenes[i], &mounts[i], derive(seed, 100 + state.tick))
        } else {
            None
        };
        let obs = Observation {
            pose,
            finger_pixels: pixels,
            pixel_threshold: p.pixel_threshold,
            halted,
            contact_normal,
        };
        let (next, cmd) = match control_step(&state, &setup.gains, &cfg, &obs) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e.to_string());
                state.phase = Phase::Failed;
                break;
            }
        };
        if record_trace {
            trace.push(TraceRow {
                tick: next.tick,
                phase: next.phase,
                error: next.last_error.to_array(),
                n: next.contact_count,
                command: cmd.twist.into(),
            });
        }
        state = next;
        if matches!(state.phase, Phase::Feeding | Phase::Done | Phase::Failed) {
            break;
        }
        if state.tick >= p.max_ticks {
            failure = Some(ControlError::StallDetected { tick: state.tick, reason: "tick budget exhausted".into() }.to_string());
            state.phase = Phase::Failed;
            break;
        }
        pose = if force_halt {
            guarded_move(&pose, &cmd.twist, &mounts, &object, world, p)
        } else {
            pose.compose(&RigidTransform::exp(&cmd.twist))
        };
    }
    if state.phase == Phase::Failed && failure.is_none() {
        failure = Some("adjustment rounds exhausted".to_string());
    }

    let n = last_pixels.iter().filter(|x| **x >= p.pixel_threshold).count();
    let ok = !estop && state.phase != Phase::Failed;
    let h = pose.to_homogeneous();
    let mut final_pose = [[0.0; 4]; 4];
    for (r, row) in final_pose.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = h[(r, c)];
        }
    }
    ContactOutcome {
        method,
        seed,
        one_finger: ok && n >= 1,
        two_finger: ok && n >= 2,
        rounds: state.rounds,
        ticks: state.tick,
        estop,
        failure,
        initial_misalignment_deg,
        final_pose,
        trace,
    }
}

fn max_press(pose: &RigidTransform, mounts: &[RigidTransform; 2], object: &Plane, world: &ContactWorld, p: &ContactParams) -> f64 {
    mounts
        .iter()
        .map(|m| {
            let scene = ContactScene {
                sensor_pose: pose.compose(m),
                plane: *object,
                indentation: p.indentation,
            };
            finger_press(&scene, &world.grid)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Applies `twist`, stopping part-way if a fingertip reaches the force limit.
fn guarded_move(
    pose: &RigidTransform,
    twist: &nalgebra::Vector6<f64>,
    mounts: &[RigidTransform; 2],
    object: &Plane,
    world: &ContactWorld,
    p: &ContactParams,
) -> RigidTransform {
    let at = |s: f64| pose.compose(&RigidTransform::exp(&(twist * s)));
    let full = at(1.0);
    if max_press(&full, mounts, object, world, p) <= p.halt_press
        || max_press(pose, mounts, object, world, p) >= p.halt_press
    {
        return full;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if max_press(&at(mid), mounts, object, world, p) < p.halt_press {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(hi)
}

/// Tactile plane estimate of one finger, as a normal in the end-effector frame.
fn estimate_normal(
    setup: &ContactSetup,
    world: &ContactWorld,
    scene: &ContactScene,
    mount: &RigidTransform,
    seed: u64,
) -> Option<UnitVector3> {
    let clean = render_with_grid(scene, &world.grid);
    let mask = corrupt_mask(&clean, &setup.mask_noise, derive(seed, 1));
    let contour = boundary_coords(&mask).ok()?;
    let cloud = backproject_contour(&contour, &setup.intrinsics, &setup.geometry).ok()?;
    let est = ransac_plane_toward(&cloud, &setup.ransac, derive(seed, 2), &Vector3::zeros()).ok()?;
    Some(est.normal.rotated(mount.rotation()))
}

/// One- and two-finger success rates of a batch.
pub fn success_rates(outcomes: &[ContactOutcome]) -> (f64, f64) {
    if outcomes.is_empty() {
        return (0.0, 0.0);
    }
    let n = outcomes.len() as f64;
    let one = outcomes.iter().filter(|o| o.one_finger).count() as f64 / n;
    let two = outcomes.iter().filter(|o| o.two_finger).count() as f64 / n;
    (one, two)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{tilted_normal, DEFAULT_INDENTATION};

    #[test]
    fn finger_apex_sits_at_tool_point() {
        let g = SensorGeometry::default();
        for i in 0..2 {
            let m = finger_mount(i, 20.0, &g);
            let apex = m.transform_point(&g.apex());
            assert!((apex.z).abs() < 1e-12);
            assert!((apex.x.abs() - 10.0).abs() < 1e-12);
            // sensor z points down the end-effector -z
            assert!((m.transform_vector(&Vector3::z()) + Vector3::z()).amax() < 1e-12);
        }
    }

    #[test]
    fn press_matches_construction() {
        let k = CameraIntrinsics::default();
        let g = SensorGeometry::default();
        let grid = SurfaceGrid::new(&k, &g);
        for (tilt, press) in [(0.0, 0.5), (0.3, 0.8), (-0.5, 0.1)] {
            let s = ContactScene::pressed(&g, tilted_normal(tilt), press, DEFAULT_INDENTATION).unwrap();
            assert!((finger_press(&s, &grid) - press).abs() < 1e-12);
        }
    }

    #[test]
    fn default_threshold_registers_a_shallow_press() {
        // 0.2 mm of indentation beyond the oracle threshold must register
        let k = CameraIntrinsics::default();
        let g = SensorGeometry::default();
        let grid = SurfaceGrid::new(&k, &g);
        let p = ContactParams::default();
        let s = ContactScene::pressed(&g, tilted_normal(0.0), p.indentation + 0.2, p.indentation).unwrap();
        assert!(contact_pixel_count(&s, &grid) >= p.pixel_threshold);
        let s = ContactScene::pressed(&g, tilted_normal(0.0), p.indentation + 0.02, p.indentation).unwrap();
        assert!(contact_pixel_count(&s, &grid) < p.pixel_threshold);
    }

    #[test]
    fn noiseless_tactile_trial_reaches_two_fingers() {
        let setup = ContactSetup {
            misalignment: Misalignment::Uniform { max_deg: 20.0 },
            ..Default::default()
        };
        let world = ContactWorld::new(&setup);
        for seed in 0..5 {
            let o = run_contact_trial(&setup, &world, ContactMethod::VisionForceTactile, seed, true);
            assert!(o.two_finger, "seed {seed}: {o:?}");
            assert!(o.rounds <= 2);
            assert!(!o.trace.is_empty());
        }
    }
}
