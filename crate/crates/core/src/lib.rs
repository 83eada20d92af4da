//! Simulation core for a rotating-fingertip tactile gripper: contact geometry,
//! plane estimation, grasp control, sheet feeding, counting, beam forces and
//! sensor offset calibration.

pub mod beam;
pub mod bench;
pub mod calibration;
pub mod contact;
pub mod counting;
pub mod edges;
pub mod feed;
pub mod control;
pub mod geometry;
pub mod oracle;
pub mod plane;
pub mod rng;
pub mod sensor;
