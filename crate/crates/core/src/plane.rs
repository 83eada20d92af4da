//! RANSAC plane fitting and the simulated vision / force normal baselines.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, RigidTransform, UnitVector3};
use crate::rng::seeded;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlaneError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("points are collinear within tolerance")]
    DegenerateCloud,
    #[error("invalid RANSAC parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointFrame {
    Sensor,
    World,
}

/// 3D points in millimetres with an explicit frame tag.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPointCloud {
    pub points: Vec<Vector3<f64>>,
    pub frame: PointFrame,
    /// Contour pixels whose ray missed the surface.
    pub dropped: usize,
}

impl ContactPointCloud {
    pub fn new(points: Vec<Vector3<f64>>, frame: PointFrame) -> Self {
        Self {
            points,
            frame,
            dropped: 0,
        }
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        Some(self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64)
    }

    /// Maps every point through `t`, retagging the frame.
    pub fn transformed(&self, t: &RigidTransform, frame: PointFrame) -> ContactPointCloud {
        ContactPointCloud {
            points: self.points.iter().map(|p| t.transform_point(p)).collect(),
            frame,
            dropped: self.dropped,
        }
    }
}

/// Plane `normal . p = offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: UnitVector3,
    pub offset: f64,
}

impl Plane {
    pub fn new(normal: UnitVector3, offset: f64) -> Self {
        Self { normal, offset }
    }

    /// Plane with the given normal passing through `point`.
    pub fn through(normal: UnitVector3, point: &Vector3<f64>) -> Self {
        Self {
            normal,
            offset: normal.as_vector().dot(point),
        }
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.as_vector().dot(p) - self.offset
    }

    pub fn transformed(&self, t: &RigidTransform) -> Plane {
        let n = self.normal.rotated(t.rotation());
        let foot = t.transform_point(&(self.normal.as_vector() * self.offset));
        Plane::through(n, &foot)
    }

    pub fn flipped(&self) -> Plane {
        Plane {
            normal: -self.normal,
            offset: -self.offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneEstimate {
    pub normal: UnitVector3,
    pub offset: f64,
    pub inlier_count: usize,
    pub rms_residual: f64,
}

impl PlaneEstimate {
    pub fn plane(&self) -> Plane {
        Plane::new(self.normal, self.offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacParams {
    pub iters: usize,
    /// Inlier distance threshold, mm.
    pub tol: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iters: 200,
            tol: 0.15,
        }
    }
}

/// Total least squares fit; the normal is the smallest principal direction.
pub fn fit_plane_lsq(points: &[Vector3<f64>]) -> Result<(UnitVector3, f64), PlaneError> {
    if points.len() < 3 {
        return Err(PlaneError::TooFewPoints(points.len()));
    }
    let c = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let i = eig.eigenvalues.imin();
    let n = UnitVector3::new(eig.eigenvectors.column(i).into_owned())?;
    Ok((n, n.as_vector().dot(&c)))
}

/// Largest distance of any point from the principal line of the cloud.
fn max_line_distance(points: &[Vector3<f64>]) -> f64 {
    let c = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let dir = eig.eigenvectors.column(eig.eigenvalues.imax()).into_owned();
    points
        .iter()
        .map(|p| {
            let d = p - c;
            (d - dir * dir.dot(&d)).norm()
        })
        .fold(0.0, f64::max)
}

/// RANSAC over the cloud with the normal oriented toward the frame origin
/// (the camera centre for sensor-frame clouds).
pub fn ransac_plane(
    cloud: &ContactPointCloud,
    iters: usize,
    tol: f64,
    seed: u64,
) -> Result<PlaneEstimate, PlaneError> {
    ransac_plane_toward(cloud, &RansacParams { iters, tol }, seed, &Vector3::zeros())
}

/// RANSAC with an explicit viewpoint for normal orientation.
pub fn ransac_plane_toward(
    cloud: &ContactPointCloud,
    params: &RansacParams,
    seed: u64,
    viewpoint: &Vector3<f64>,
) -> Result<PlaneEstimate, PlaneError> {
    let pts = &cloud.points;
    if params.iters == 0 || !(params.tol > 0.0) {
        return Err(PlaneError::InvalidParams(format!(
            "iters = {}, tol = {}",
            params.iters, params.tol
        )));
    }
    if pts.len() < 3 {
        return Err(PlaneError::TooFewPoints(pts.len()));
    }
    if max_line_distance(pts) <= params.tol {
        return Err(PlaneError::DegenerateCloud);
    }

    let mut rng = seeded(seed);
    let n_pts = pts.len();
    let mut best: Option<(usize, Vector3<f64>, f64)> = None;
    for _ in 0..params.iters {
        let i = rng.random_range(0..n_pts);
        let mut j = rng.random_range(0..n_pts - 1);
        if j >= i {
            j += 1;
        }
        let mut k = rng.random_range(0..n_pts - 2);
        for idx in [i.min(j), i.max(j)] {
            if k >= idx {
                k += 1;
            }
        }
        let normal = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
        let len = normal.norm();
        if len < 1e-12 {
            continue;
        }
        let n = normal / len;
        let d = n.dot(&pts[i]);
        let count = pts.iter().filter(|p| (n.dot(p) - d).abs() <= params.tol).count();
        if best.is_none_or(|(c, _, _)| count > c) {
            best = Some((count, n, d));
        }
    }

    let (n0, d0) = match best {
        Some((_, n, d)) => (n, d),
        None => {
            let (n, d) = fit_plane_lsq(pts)?;
            (n.into_inner(), d)
        }
    };

    // Refit on inliers until the consensus set stops changing.
    let mut inliers: Vec<usize> = consensus(pts, &n0, d0, params.tol);
    let (mut n, mut d) = (n0, d0);
    for _ in 0..5 {
        if inliers.len() < 3 {
            break;
        }
        let sel: Vec<Vector3<f64>> = inliers.iter().map(|&i| pts[i]).collect();
        let (nn, dd) = fit_plane_lsq(&sel)?;
        n = nn.into_inner();
        d = dd;
        let next = consensus(pts, &n, d, params.tol);
        if next == inliers {
            break;
        }
        inliers = next;
    }

    let centroid = pts.iter().sum::<Vector3<f64>>() / n_pts as f64;
    if n.dot(&(viewpoint - centroid)) < 0.0 {
        n = -n;
        d = -d;
    }
    let rms = if inliers.is_empty() {
        0.0
    } else {
        (inliers.iter().map(|&i| (n.dot(&pts[i]) - d).powi(2)).sum::<f64>() / inliers.len() as f64).sqrt()
    };
    Ok(PlaneEstimate {
        normal: UnitVector3::new(n)?,
        offset: d,
        inlier_count: inliers.len(),
        rms_residual: rms,
    })
}

fn consensus(pts: &[Vector3<f64>], n: &Vector3<f64>, d: f64, tol: f64) -> Vec<usize> {
    pts.iter()
        .enumerate()
        .filter(|(_, p)| (n.dot(p) - d).abs() <= tol)
        .map(|(i, _)| i)
        .collect()
}

/// Scale of the half-normal tilt distribution whose mean is `mean_deg`.
pub fn folded_normal_sigma(mean_deg: f64) -> f64 {
    mean_deg * (std::f64::consts::PI / 2.0).sqrt()
}

/// Tilts `n` by `|N(0, sigma)|` degrees toward a uniformly random azimuth.
pub fn perturb_normal(n: &UnitVector3, mean_deg: f64, seed: u64) -> UnitVector3 {
    if mean_deg <= 0.0 {
        return *n;
    }
    let mut rng = seeded(seed);
    let sigma = folded_normal_sigma(mean_deg).to_radians();
    let tilt = Normal::new(0.0, sigma).expect("sigma is finite").sample(&mut rng).abs();
    let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
    // orthonormal basis (e1, e2) of the plane perpendicular to n
    let v = n.as_vector();
    let helper = if v.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = (helper - v * v.dot(&helper)).normalize();
    let e2 = v.cross(&e1);
    let dir = e1 * azimuth.cos() + e2 * azimuth.sin();
    UnitVector3::new(v * tilt.cos() + dir * tilt.sin()).expect("unit combination")
}

fn baseline(truth: &Plane, noise_deg: f64, seed: u64) -> PlaneEstimate {
    let normal = perturb_normal(&truth.normal, noise_deg, seed);
    let foot = truth.normal.as_vector() * truth.offset;
    PlaneEstimate {
        normal,
        offset: normal.as_vector().dot(&foot),
        inlier_count: 0,
        rms_residual: 0.0,
    }
}

/// Simulated camera-based normal estimate (folded-normal perturbation model).
pub fn vision_plane_baseline(truth: &Plane, noise_deg: f64, seed: u64) -> PlaneEstimate {
    baseline(truth, noise_deg, seed)
}

/// Simulated wrist force-sensing normal estimate (folded-normal perturbation model).
pub fn force_plane_baseline(truth: &Plane, noise_deg: f64, seed: u64) -> PlaneEstimate {
    baseline(truth, noise_deg, seed ^ 0x5f0c_e5e7_a11d_0001)
}

/// Mean tilt of the vision baseline, degrees.
pub const VISION_NOISE_DEG: f64 = 7.82;
/// Mean tilt of the force baseline, degrees.
pub const FORCE_NOISE_DEG: f64 = 11.14;
