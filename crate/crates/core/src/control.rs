//! Two-finger contact state machine, the per-sheet continuous adjustment and
//! local pose corrections.

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{pose_error, rodrigues_align, rotation_y, PoseError, RigidTransform, UnitVector3};

/// Control period matching the 30 Hz tactile stream, seconds.
pub const TICK_DT: f64 = 1.0 / 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("approach stalled at tick {tick}: {reason}")]
    StallDetected { tick: u64, reason: String },
    #[error("stack too thick: n*h = {nh} mm >= finger spacing {l} mm")]
    InfeasibleStack { nh: f64, l: f64 },
    #[error("one-finger contact reported without a plane estimate")]
    MissingNormal,
    #[error("invalid control parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Approach,
    PreContact,
    AdjustPose,
    Feeding,
    Grasp,
    Done,
    Failed,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GripperCommand {
    Hold,
    Close,
}

/// Body twist for one tick (mm, rad) and gripper state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub twist: Vector6<f64>,
    pub gripper: GripperCommand,
}

impl Command {
    pub fn hold() -> Self {
        Self {
            twist: Vector6::zeros(),
            gripper: GripperCommand::Hold,
        }
    }
}

/// Diagonal PD gains, the approach threshold and the feedforward twist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlGains {
    pub kp: [f64; 6],
    pub kd: [f64; 6],
    /// Threshold on the translational error norm, mm.
    pub epsilon: f64,
    /// Feedforward body twist per tick (mm, rad).
    pub v_ff: [f64; 6],
}

impl Default for ControlGains {
    fn default() -> Self {
        Self {
            kp: [1.0; 6],
            kd: [0.1; 6],
            epsilon: 0.02,
            v_ff: [0.0, 0.0, -0.4, 0.0, 0.0, 0.0],
        }
    }
}

impl ControlGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        if self.kp.iter().chain(&self.kd).any(|g| !(*g > 0.0)) {
            return Err(ControlError::InvalidParams("gains must be positive".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(ControlError::InvalidParams("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Behaviour switches and limits of the contact controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Offset of the pre-contact pose along the target's local +z, mm.
    pub precontact_offset: f64,
    /// Start from the pre-contact pose instead of heading straight for the target.
    pub use_precontact: bool,
    /// Switch to feedforward once within epsilon of the target.
    pub feedforward: bool,
    /// Re-orient the target from the tactile plane estimate on one-finger contact.
    pub adjust: bool,
    /// Adjustment rounds allowed before giving up.
    pub max_rounds: u32,
    /// Largest commanded translation per tick, mm.
    pub max_linear: f64,
    /// Largest commanded rotation per tick, rad.
    pub max_angular: f64,
    /// Rotational error accepted at the pre-contact pose, rad.
    pub rot_epsilon: f64,
    /// Feedforward travel after which the approach is declared stalled, mm.
    pub ff_limit: f64,
    /// Ticks over which the PD branch must make progress.
    pub stall_window: u32,
    /// Required reduction of the translational error over the window, mm.
    pub stall_min_progress: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            precontact_offset: 20.0,
            use_precontact: true,
            feedforward: true,
            adjust: true,
            max_rounds: 5,
            max_linear: 5.0,
            max_angular: 3f64.to_radians(),
            rot_epsilon: 1e-4,
            ff_limit: 60.0,
            stall_window: 60,
            stall_min_progress: 1e-3,
        }
    }
}

/// What the controller sees each tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Current end-effector pose in the world frame.
    pub pose: RigidTransform,
    /// Contact-area pixel count of each fingertip.
    pub finger_pixels: [usize; 2],
    /// Contact pixel threshold of the classifier.
    pub pixel_threshold: usize,
    /// Motion stopped by the contact-force limit.
    pub halted: bool,
    /// Contact plane normal estimated by the touching finger, end-effector frame.
    pub contact_normal: Option<UnitVector3>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub phase: Phase,
    /// Reference pose; advanced along with feedforward motion.
    pub target: RigidTransform,
    pub contact_count: u8,
    pub last_error: PoseError,
    prev_error: Option<PoseError>,
    pub rounds: u32,
    pub ff_travel: f64,
    pub tick: u64,
    window_start: (u64, f64),
}

impl ControllerState {
    pub fn new(target: RigidTransform, cfg: &ControllerConfig) -> Self {
        Self {
            phase: if cfg.use_precontact { Phase::PreContact } else { Phase::Approach },
            target,
            contact_count: 0,
            last_error: PoseError::zero(),
            prev_error: None,
            rounds: 0,
            ff_travel: 0.0,
            tick: 0,
            window_start: (0, f64::INFINITY),
        }
    }

    /// Pose the pre-contact phase drives to.
    pub fn precontact_pose(&self, cfg: &ControllerConfig) -> RigidTransform {
        self.target
            .compose(&RigidTransform::from_translation(Vector3::new(0.0, 0.0, cfg.precontact_offset)))
    }

    /// Hands a fed stack over to the closing stage.
    pub fn begin_grasp(&mut self) {
        if self.phase == Phase::Feeding {
            self.phase = Phase::Grasp;
        }
    }

    pub fn finish(&mut self) {
        if !self.phase.is_terminal() {
            self.phase = Phase::Done;
        }
    }

    fn reset_motion(&mut self) {
        self.prev_error = None;
        self.window_start = (self.tick, f64::INFINITY);
    }
}

/// True iff the contact area reaches the threshold (inclusive).
pub fn contact_classifier(mask_pixels: usize, threshold: usize) -> bool {
    mask_pixels >= threshold
}

fn clamp_twist(u: Vector6<f64>, cfg: &ControllerConfig) -> Vector6<f64> {
    let lin = Vector3::new(u[0], u[1], u[2]).norm();
    let ang = Vector3::new(u[3], u[4], u[5]).norm();
    let scale = [lin / cfg.max_linear, ang / cfg.max_angular, 1.0]
        .into_iter()
        .fold(0.0, f64::max);
    u / scale
}

fn pd(gains: &ControlGains, e: &PoseError, prev: Option<&PoseError>) -> Vector6<f64> {
    let de = prev.map(|p| e.0 - p.0).unwrap_or_else(Vector6::zeros);
    let kp = Vector6::from(gains.kp);
    let kd = Vector6::from(gains.kd);
    kp.component_mul(&e.0) + kd.component_mul(&de)
}

/// One tick of the contact controller.
///
/// With no sufficient contact the PD law tracks the reference while the
/// translational error exceeds epsilon, and the feedforward twist is applied
/// (the reference moving with it) once inside. One-finger contact after the
/// force halt re-orients the reference by the Rodrigues rotation aligning the
/// end-effector z axis with the estimated contact normal; two-finger contact
/// moves on to feeding.
pub fn control_step(
    state: &ControllerState,
    gains: &ControlGains,
    cfg: &ControllerConfig,
    obs: &Observation,
) -> Result<(ControllerState, Command), ControlError> {
    let mut s = *state;
    s.tick += 1;
    if matches!(s.phase, Phase::Feeding | Phase::Grasp | Phase::Done | Phase::Failed) {
        let cmd = Command {
            twist: Vector6::zeros(),
            gripper: if s.phase == Phase::Grasp { GripperCommand::Close } else { GripperCommand::Hold },
        };
        return Ok((s, cmd));
    }

    let n = obs
        .finger_pixels
        .iter()
        .filter(|p| contact_classifier(**p, obs.pixel_threshold))
        .count() as u8;
    s.contact_count = n;

    if s.phase == Phase::PreContact {
        let goal = s.precontact_pose(cfg);
        let e = pose_error(&obs.pose, &goal);
        if e.translational_norm() > gains.epsilon || e.rotational().norm() > cfg.rot_epsilon {
            s.last_error = e;
            let u = clamp_twist(pd(gains, &e, s.prev_error.as_ref()), cfg);
            s.prev_error = Some(e);
            check_stall(&mut s, cfg, e.translational_norm())?;
            return Ok((s, Command { twist: u, gripper: GripperCommand::Hold }));
        }
        s.phase = Phase::Approach;
        s.reset_motion();
    }

    // Approach
    if n >= 2 {
        s.phase = Phase::Feeding;
        return Ok((s, Command::hold()));
    }
    if obs.halted {
        if n == 1 && cfg.adjust {
            s.phase = Phase::AdjustPose;
            s.rounds += 1;
            if s.rounds > cfg.max_rounds {
                s.phase = Phase::Failed;
                return Ok((s, Command::hold()));
            }
            let n2 = obs.contact_normal.ok_or(ControlError::MissingNormal)?;
            let r = rodrigues_align(&UnitVector3::Z, &n2);
            let rot = RigidTransform::from_rotation(r).expect("Rodrigues output is a rotation");
            s.target = s.target.compose(&rot).renormalized();
            s.phase = Phase::PreContact;
            s.ff_travel = 0.0;
            s.reset_motion();
            return Ok((s, Command::hold()));
        }
        s.phase = Phase::Done;
        return Ok((s, Command::hold()));
    }

    let e = pose_error(&obs.pose, &s.target);
    s.last_error = e;
    if e.translational_norm() > gains.epsilon {
        let u = clamp_twist(pd(gains, &e, s.prev_error.as_ref()), cfg);
        s.prev_error = Some(e);
        check_stall(&mut s, cfg, e.translational_norm())?;
        return Ok((s, Command { twist: u, gripper: GripperCommand::Hold }));
    }
    if !cfg.feedforward {
        s.phase = Phase::Done;
        return Ok((s, Command::hold()));
    }
    let v = Vector6::from(gains.v_ff);
    s.target = s.target.compose(&RigidTransform::exp(&v));
    s.ff_travel += Vector3::new(v[0], v[1], v[2]).norm();
    s.prev_error = None;
    if s.ff_travel > cfg.ff_limit {
        return Err(ControlError::StallDetected {
            tick: s.tick,
            reason: format!("no contact after {:.1} mm of feedforward travel", s.ff_travel),
        });
    }
    Ok((s, Command { twist: v, gripper: GripperCommand::Hold }))
}

fn check_stall(s: &mut ControllerState, cfg: &ControllerConfig, err: f64) -> Result<(), ControlError> {
    let (start, best) = s.window_start;
    if err < best - cfg.stall_min_progress {
        s.window_start = (s.tick, err);
        return Ok(());
    }
    if s.tick - start > cfg.stall_window as u64 {
        return Err(ControlError::StallDetected {
            tick: s.tick,
            reason: format!("error {err:.4} mm not reduced in {} ticks", cfg.stall_window),
        });
    }
    Ok(())
}

/// Pose correction for a stack of `n` fed sheets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    pub beta: f64,
    pub dx: f64,
    pub dz: f64,
}

/// `beta = asin(n h / l)`, `dx = -(l/2)(1 - cos beta)`, `dz = -(l/2) sin beta`.
pub fn continuous_adjust(n: u32, h: f64, l: f64) -> Result<Adjustment, ControlError> {
    if !(h > 0.0 && l > 0.0) {
        return Err(ControlError::InvalidParams(format!("h = {h}, l = {l}")));
    }
    let nh = n as f64 * h;
    if nh >= l {
        return Err(ControlError::InfeasibleStack { nh, l });
    }
    let beta = (nh / l).asin();
    Ok(Adjustment {
        beta,
        dx: -(l / 2.0) * (1.0 - beta.cos()),
        dz: -(l / 2.0) * beta.sin(),
    })
}

/// `pose * [Ry(beta), (dx, 0, dz)]`: the correction applied in the local frame.
pub fn apply_local_adjustment(pose: &RigidTransform, adj: &Adjustment) -> RigidTransform {
    let local = RigidTransform::new(rotation_y(adj.beta), Vector3::new(adj.dx, 0.0, adj.dz))
        .expect("rotation_y is orthonormal");
    pose.compose(&local)
}
