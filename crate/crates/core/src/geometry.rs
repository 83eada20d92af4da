//! Rigid-body transforms, pose error and normal alignment.
//!
//! Conventions used across the crate:
//!
//! - lengths in millimetres, angles in radians (degrees only at I/O boundaries)
//! - `a.compose(&b)` is the homogeneous product `a * b`, so a frame chain
//!   `T_W^T = T_W^E * T_E^C * T_C^M * T_M^T` is composed left to right
//! - twists are `[v_x, v_y, v_z, w_x, w_y, w_z]`: translational part first, body frame

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `R^T R - I` and `det R - 1` accepted at construction.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Below this rotation angle the series expansions are used.
const SMALL_ANGLE: f64 = 1e-8;

/// Above `PI - NEAR_PI` the rotation log extracts the axis from the symmetric part.
const NEAR_PI: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("rotation matrix is not orthonormal (max deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("rotation matrix has determinant {0:.6}, expected +1")]
    Reflection(f64),
    #[error("cannot normalise a zero-length vector")]
    ZeroVector,
    #[error("non-finite component")]
    NonFinite,
}

/// A vector of unit Euclidean length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct UnitVector3(Vector3<f64>);

impl UnitVector3 {
    pub const Z: UnitVector3 = UnitVector3(Vector3::new(0.0, 0.0, 1.0));
    pub const X: UnitVector3 = UnitVector3(Vector3::new(1.0, 0.0, 0.0));
    pub const Y: UnitVector3 = UnitVector3(Vector3::new(0.0, 1.0, 0.0));

    /// Normalises `v`.
    pub fn new(v: Vector3<f64>) -> Result<Self, GeometryError> {
        if !v.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let n = v.norm();
        if n < 1e-300 {
            return Err(GeometryError::ZeroVector);
        }
        Ok(Self(v / n))
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        Self::new(Vector3::new(x, y, z))
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Vector3<f64> {
        self.0
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn dot(&self, other: &UnitVector3) -> f64 {
        self.0.dot(&other.0)
    }

    /// Applies a rotation; the result is renormalised to absorb rounding.
    pub fn rotated(&self, rotation: &Matrix3<f64>) -> UnitVector3 {
        let v = rotation * self.0;
        UnitVector3(v / v.norm())
    }
}

impl std::ops::Neg for UnitVector3 {
    type Output = UnitVector3;

    fn neg(self) -> UnitVector3 {
        UnitVector3(-self.0)
    }
}

impl TryFrom<[f64; 3]> for UnitVector3 {
    type Error = GeometryError;

    fn try_from(v: [f64; 3]) -> Result<Self, Self::Error> {
        UnitVector3::new(Vector3::from(v))
    }
}

impl From<UnitVector3> for [f64; 3] {
    fn from(v: UnitVector3) -> [f64; 3] {
        [v.0.x, v.0.y, v.0.z]
    }
}

/// SE(3) element: rotation followed by translation, `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        validate_rotation(&rotation)?;
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Result<Self, GeometryError> {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::unchecked(rotation_x(angle), Vector3::zeros())
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::unchecked(rotation_y(angle), Vector3::zeros())
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::unchecked(rotation_z(angle), Vector3::zeros())
    }

    /// Rotation about a unit axis through the origin.
    pub fn from_axis_angle(axis: &UnitVector3, angle: f64) -> Self {
        Self::unchecked(so3_exp(&(axis.as_vector() * angle)), Vector3::zeros())
    }

    pub(crate) fn unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `self * other`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Result<Self, GeometryError> {
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        let t: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into_owned();
        Self::new(r, t)
    }

    /// SE(3) exponential of a body twist.
    pub fn exp(twist: &Vector6<f64>) -> RigidTransform {
        let v = Vector3::new(twist[0], twist[1], twist[2]);
        let w = Vector3::new(twist[3], twist[4], twist[5]);
        let rotation = so3_exp(&w);
        let translation = left_jacobian(&w) * v;
        RigidTransform {
            rotation,
            translation,
        }
    }

    /// SE(3) logarithm; inverse of [`RigidTransform::exp`] away from the
    /// rotation branch cut at `PI`.
    pub fn log(&self) -> Vector6<f64> {
        let w = so3_log(&self.rotation);
        let v = left_jacobian_inverse(&w) * self.translation;
        Vector6::new(v.x, v.y, v.z, w.x, w.y, w.z)
    }

    /// Projects the rotation back onto SO(3) (polar decomposition via SVD).
    pub fn renormalized(&self) -> RigidTransform {
        let svd = self.rotation.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut u2 = u;
            u2.column_mut(2).neg_mut();
            r = u2 * vt;
        }
        RigidTransform {
            rotation: r,
            translation: self.translation,
        }
    }

    /// Unit z-axis of this frame expressed in the parent frame.
    pub fn z_axis(&self) -> UnitVector3 {
        UnitVector3(self.rotation.column(2).into_owned())
    }

    pub fn approx_eq(&self, other: &RigidTransform, tol: f64) -> bool {
        (self.rotation - other.rotation).amax() <= tol
            && (self.translation - other.translation).amax() <= tol
    }
}

/// `a * b`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

/// Composes a frame chain left to right; empty chains give the identity.
pub fn compose_chain(chain: &[RigidTransform]) -> RigidTransform {
    chain
        .iter()
        .fold(RigidTransform::identity(), |acc, t| acc.compose(t))
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

fn validate_rotation(r: &Matrix3<f64>) -> Result<(), GeometryError> {
    if !r.iter().all(|c| c.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let dev = (r.transpose() * r - Matrix3::identity()).amax();
    if dev > ORTHONORMAL_TOL {
        return Err(GeometryError::NotOrthonormal(dev));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ORTHONORMAL_TOL {
        return Err(GeometryError::Reflection(det));
    }
    Ok(())
}

/// Body-frame pose error `log(current^-1 * target)`: millimetres then radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseError(pub Vector6<f64>);

impl PoseError {
    pub fn zero() -> Self {
        Self(Vector6::zeros())
    }

    pub fn twist(&self) -> &Vector6<f64> {
        &self.0
    }

    pub fn translational(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn rotational(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[4], self.0[5])
    }

    /// `||e[0:3]||`, the quantity compared against the approach threshold.
    pub fn translational_norm(&self) -> f64 {
        self.translational().norm()
    }

    pub fn to_array(&self) -> [f64; 6] {
        let mut out = [0.0; 6];
        out.copy_from_slice(self.0.as_slice());
        out
    }
}

pub fn pose_error(current: &RigidTransform, target: &RigidTransform) -> PoseError {
    PoseError(current.inverse().compose(target).log())
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

pub fn rotation_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rotation_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rotation_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rodrigues' formula `I + sin(t) A + (1 - cos(t)) A^2` for a rotation vector.
pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = skew(w);
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta * theta / 6.0, 0.5 - theta * theta / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Rotation vector of `r`. At exactly `PI` the axis sign is fixed by taking the
/// largest diagonal entry of `R + I` as the positive component.
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let antisym = vee(&(r - r.transpose())) * 0.5; // sin(theta) * axis
    let sin_theta = antisym.norm();
    let theta = sin_theta.atan2(cos_theta);

    if theta < SMALL_ANGLE {
        return antisym * (1.0 + theta * theta / 6.0);
    }
    if theta < PI - NEAR_PI {
        return antisym * (theta / sin_theta);
    }

    // Near PI: (R + R^T)/2 - cos(t) I = (1 - cos(t)) a a^T.
    let b = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos_theta;
    let scale = 1.0 - cos_theta;
    let diag = b.diagonal();
    let i = (0..3)
        .max_by(|&p, &q| diag[p].total_cmp(&diag[q]).then(q.cmp(&p)))
        .unwrap();
    let ai = (diag[i] / scale).max(0.0).sqrt();
    let mut axis = Vector3::zeros();
    for j in 0..3 {
        axis[j] = if j == i { ai } else { b[(i, j)] / (scale * ai) };
    }
    axis /= axis.norm();
    if axis.dot(&antisym) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

fn left_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = skew(w);
    let (a, b) = if theta < 1e-5 {
        (0.5 - theta * theta / 24.0, 1.0 / 6.0 - theta * theta / 120.0)
    } else {
        let t2 = theta * theta;
        ((1.0 - theta.cos()) / t2, (theta - theta.sin()) / (t2 * theta))
    };
    Matrix3::identity() + k * a + k * k * b
}

fn left_jacobian_inverse(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = skew(w);
    let c = if theta < 1e-5 {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        let half = theta * 0.5;
        (1.0 - half * half.cos() / half.sin()) / (theta * theta)
    };
    Matrix3::identity() - k * 0.5 + k * k * c
}

/// Axis and angle of the rotation carrying `n1` onto `n2`.
///
/// The axis is `n1 x n2` normalised. When the vectors are antiparallel
/// (`n1 . n2 < -1 + 1e-9`) the axis is the projection of `(1,0,0)` onto the
/// plane orthogonal to `n1`, or of `(0,1,0)` if that projection vanishes, and
/// the angle is `PI`. The returned flag marks that fallback.
pub fn alignment_axis_angle(n1: &UnitVector3, n2: &UnitVector3) -> (UnitVector3, f64, bool) {
    let dot = n1.dot(n2).clamp(-1.0, 1.0);
    if dot < -1.0 + 1e-9 {
        let axis = [Vector3::x(), Vector3::y()]
            .iter()
            .map(|e| e - n1.as_vector() * n1.as_vector().dot(e))
            .find(|p| p.norm() > 1e-6)
            .expect("x and y cannot both be parallel to a unit vector");
        return (UnitVector3(axis.normalize()), PI, true);
    }
    let cross = n1.as_vector().cross(n2.as_vector());
    let s = cross.norm();
    if s < 1e-15 {
        return (UnitVector3::Z, 0.0, false);
    }
    (UnitVector3(cross / s), s.atan2(dot), false)
}

/// Rotation matrix aligning `n1` with `n2` by Rodrigues' formula.
pub fn rodrigues_align(n1: &UnitVector3, n2: &UnitVector3) -> Matrix3<f64> {
    let (axis, theta, _) = alignment_axis_angle(n1, n2);
    if theta == 0.0 {
        return Matrix3::identity();
    }
    let a = skew(axis.as_vector());
    Matrix3::identity() + a * theta.sin() + a * a * (1.0 - theta.cos())
}

/// Angle between two unit vectors in degrees, in `[0, 180]`.
pub fn angle_error(estimated: &UnitVector3, truth: &UnitVector3) -> f64 {
    let (a, b) = (estimated.as_vector(), truth.as_vector());
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn rz_t(angle_deg: f64, t: [f64; 3]) -> RigidTransform {
        RigidTransform::new(rotation_z(angle_deg.to_radians()), Vector3::from(t)).unwrap()
    }

    #[test]
    fn compose_identity_and_inverse() {
        let t = rz_t(37.0, [1.0, -2.0, 3.5]);
        assert!(compose(&RigidTransform::identity(), &t).approx_eq(&t, 0.0));
        assert!(compose(&t, &invert(&t)).approx_eq(&RigidTransform::identity(), 1e-12));
        assert!(compose(&invert(&t), &t).approx_eq(&RigidTransform::identity(), 1e-12));
    }

    #[test]
    fn compose_matches_homogeneous_product() {
        // Oracle: explicit 4x4 matrices built from cos/sin by hand.
        let a = rz_t(30.0, [1.0, 0.0, 0.0]);
        let b = rz_t(60.0, [0.0, 1.0, 0.0]);
        let (c30, s30) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
        let (c60, s60) = (60f64.to_radians().cos(), 60f64.to_radians().sin());
        #[rustfmt::skip]
        let ma = Matrix4::new(c30, -s30, 0.0, 1.0,
                              s30,  c30, 0.0, 0.0,
                              0.0,  0.0, 1.0, 0.0,
                              0.0,  0.0, 0.0, 1.0);
        #[rustfmt::skip]
        let mb = Matrix4::new(c60, -s60, 0.0, 0.0,
                              s60,  c60, 0.0, 1.0,
                              0.0,  0.0, 1.0, 0.0,
                              0.0,  0.0, 0.0, 1.0);
        let expected = ma * mb;
        let got = compose(&a, &b).to_homogeneous();
        assert!((expected - got).amax() < 1e-12);
        // Rz(30)Rz(60) = Rz(90); translation = (1,0,0) + Rz(30)(0,1,0) = (1 - 1/2, sqrt(3)/2, 0)
        assert!(close(got[(0, 0)], 0.0, 1e-12));
        assert!(close(got[(0, 3)], 0.5, 1e-12));
        assert!(close(got[(1, 3)], 3f64.sqrt() / 2.0, 1e-12));
    }

    #[test]
    fn frame_chain_composes_left_to_right() {
        let w_e = rz_t(10.0, [100.0, 0.0, 50.0]);
        let e_c = RigidTransform::rot_x(PI).compose(&RigidTransform::from_translation(Vector3::new(0.0, 0.0, 30.0)));
        let c_m = rz_t(-25.0, [5.0, 5.0, 200.0]);
        let m_t = RigidTransform::from_translation(Vector3::new(-10.0, 0.0, 0.0));
        let chain = compose_chain(&[w_e, e_c, c_m, m_t]);
        let manual = w_e.to_homogeneous() * e_c.to_homogeneous() * c_m.to_homogeneous() * m_t.to_homogeneous();
        assert!((chain.to_homogeneous() - manual).amax() < 1e-9);
        assert_eq!(compose_chain(&[]), RigidTransform::identity());
    }

    #[test]
    fn construction_rejects_invalid_rotation() {
        let bad = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(RigidTransform::new(bad, Vector3::zeros()), Err(GeometryError::NotOrthonormal(_))));
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(RigidTransform::new(reflect, Vector3::zeros()), Err(GeometryError::Reflection(_))));
        let t = Vector3::new(f64::NAN, 0.0, 0.0);
        assert!(matches!(RigidTransform::new(Matrix3::identity(), t), Err(GeometryError::NonFinite)));
    }

    #[test]
    fn pose_error_examples() {
        let t = rz_t(12.0, [3.0, 4.0, 5.0]);
        assert!(pose_error(&t, &t).0.amax() < 1e-15);

        let e = pose_error(&RigidTransform::identity(), &RigidTransform::from_translation(Vector3::new(5.0, 0.0, 0.0)));
        assert!((e.0 - Vector6::new(5.0, 0.0, 0.0, 0.0, 0.0, 0.0)).amax() < 1e-15);

        // Axis-angle oracle: Rz(0.3) has axis z and angle 0.3.
        let e = pose_error(&RigidTransform::identity(), &RigidTransform::rot_z(0.3));
        assert!((e.rotational() - Vector3::new(0.0, 0.0, 0.3)).amax() < 1e-9);
        assert!(e.translational_norm() < 1e-15);
    }

    #[test]
    fn pose_error_is_body_frame() {
        // current is rotated 90 deg about z; a world +x offset appears as body -y.
        let current = RigidTransform::rot_z(PI / 2.0);
        let target = RigidTransform::from_translation(Vector3::new(2.0, 0.0, 0.0)).compose(&current);
        let e = pose_error(&current, &target);
        assert!((e.translational() - Vector3::new(0.0, -2.0, 0.0)).amax() < 1e-12);
    }

    #[test]
    fn log_at_pi_is_deterministic() {
        for axis in [Vector3::x(), Vector3::y(), Vector3::z(), Vector3::new(1.0, 1.0, 0.0).normalize(), Vector3::new(-1.0, 2.0, 2.0) / 3.0] {
            let r = so3_exp(&(axis * PI));
            let w1 = so3_log(&r);
            let w2 = so3_log(&r);
            assert_eq!(w1, w2);
            assert!(close(w1.norm(), PI, 1e-9));
            // the recovered rotation is the same element of SO(3)
            assert!((so3_exp(&w1) - r).amax() < 1e-9);
            // branch choice: largest-diagonal component is positive
            let d = (r + Matrix3::identity()).diagonal();
            let i = (0..3).max_by(|&p, &q| d[p].total_cmp(&d[q]).then(q.cmp(&p))).unwrap();
            assert!(w1[i] > 0.0);
        }
    }

    #[test]
    fn log_near_pi_keeps_sign() {
        let axis = Vector3::new(0.2, -0.5, 0.8).normalize();
        for theta in [PI - 5e-4, PI - 1e-6, PI - 2e-3] {
            let w = so3_log(&so3_exp(&(axis * theta)));
            assert!((w - axis * theta).amax() < 1e-7, "theta={theta} w={w:?}");
        }
    }

    #[test]
    fn rodrigues_examples() {
        let n = UnitVector3::from_xyz(0.3, -0.2, 0.9).unwrap();
        assert!((rodrigues_align(&n, &n) - Matrix3::identity()).amax() < 1e-15);

        // z -> x: 90 deg about y (axis z x x = y).
        let r = rodrigues_align(&UnitVector3::Z, &UnitVector3::X);
        assert!((r - rotation_y(PI / 2.0)).amax() < 1e-12);
        assert!((r * Vector3::z() - Vector3::x()).amax() < 1e-12);

        // antiparallel: fallback axis (1,0,0), angle pi
        let (axis, theta, fallback) = alignment_axis_angle(&UnitVector3::Z, &-UnitVector3::Z);
        assert!(fallback);
        assert_eq!(axis.into_inner(), Vector3::x());
        assert!(close(theta, PI, 0.0));
        let r = rodrigues_align(&UnitVector3::Z, &-UnitVector3::Z);
        assert!((r * Vector3::z() + Vector3::z()).amax() < 1e-12);
        assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
        assert!(close(r.determinant(), 1.0, 1e-12));
    }

    #[test]
    fn antiparallel_along_x_uses_y_fallback() {
        let (axis, _, fallback) = alignment_axis_angle(&UnitVector3::X, &-UnitVector3::X);
        assert!(fallback);
        assert!((axis.into_inner() - Vector3::y()).amax() < 1e-15);
    }

    #[test]
    fn angle_error_examples() {
        let z = UnitVector3::Z;
        assert_eq!(angle_error(&z, &z), 0.0);
        assert!(close(angle_error(&z, &UnitVector3::X), 90.0, 1e-12));
        let a = 1.51f64.to_radians();
        let tilted = UnitVector3::from_xyz(a.sin(), 0.0, a.cos()).unwrap();
        assert!(close(angle_error(&z, &tilted), 1.51, 1e-9));
        assert!(close(angle_error(&z, &-z), 180.0, 1e-12));
    }

    #[test]
    fn unit_vector_rejects_zero() {
        assert_eq!(UnitVector3::new(Vector3::zeros()), Err(GeometryError::ZeroVector));
        let u = UnitVector3::from_xyz(3.0, 4.0, 0.0).unwrap();
        assert!(close(u.as_vector().norm(), 1.0, 1e-12));
    }

    #[test]
    fn renormalize_restores_orthonormality() {
        let mut t = rz_t(17.0, [1.0, 2.0, 3.0]);
        for _ in 0..10_000 {
            t = t.compose(&RigidTransform::exp(&Vector6::new(0.0, 0.0, 0.0, 1e-3, -2e-3, 5e-4)));
        }
        let r = t.renormalized();
        assert!((r.rotation().transpose() * r.rotation() - Matrix3::identity()).amax() < 1e-14);
        assert!(r.approx_eq(&t, 1e-9));
    }
}
