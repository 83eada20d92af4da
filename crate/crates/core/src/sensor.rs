//! Fingertip surface model and pinhole back-projection.
//!
//! The sensor frame has the camera at the origin looking along `+z`. The
//! elastomer is an open cylinder of radius `r` around the axis through
//! `(o_x, o_y)`, capped by a hemisphere centred at `(o_x, o_y, o_z)`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::UnitVector3;
use crate::plane::{ContactPointCloud, PointFrame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("pixel ({u}, {v}) lies outside the {width}x{height} image")]
    OutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("ray does not point into the fingertip (z component {0})")]
    RayBehindCamera(f64),
    #[error("ray misses the sensor surface")]
    NoIntersection,
    #[error("point lies at or behind the camera plane (z = {0})")]
    BehindCamera(f64),
    #[error("contour is empty")]
    EmptyContour,
    #[error("no contour pixel intersects the surface")]
    EmptyResult,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid sensor geometry: {0}")]
    InvalidGeometry(String),
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, SensorError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |m: &str| Err(SensorError::InvalidIntrinsics(m.to_string()));
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return bad("focal lengths must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be non-zero");
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return bad("c_x must lie in [0, width)");
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad("c_y must lie in [0, height)");
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn in_bounds(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width - 1) as f64 && v <= (self.height - 1) as f64
    }
}

/// Surface radius and axis offsets, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorGeometry {
    pub r: f64,
    pub ox: f64,
    pub oy: f64,
    pub oz: f64,
}

impl Default for SensorGeometry {
    fn default() -> Self {
        Self {
            r: 8.0,
            ox: 0.0,
            oy: 0.0,
            oz: 10.0,
        }
    }
}

impl SensorGeometry {
    pub fn new(r: f64, ox: f64, oy: f64, oz: f64) -> Result<Self, SensorError> {
        let g = Self { r, ox, oy, oz };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |m: &str| Err(SensorError::InvalidGeometry(m.to_string()));
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad("r must be positive");
        }
        if !(self.oz >= 0.0 && self.oz.is_finite()) {
            return bad("o_z must be non-negative");
        }
        if !(self.ox.abs() < self.r && self.oy.abs() < self.r) {
            return bad("|o_x| and |o_y| must be smaller than r");
        }
        Ok(())
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(self.ox, self.oy, self.oz)
    }

    /// Top of the hemisphere.
    pub fn apex(&self) -> Vector3<f64> {
        Vector3::new(self.ox, self.oy, self.oz + self.r)
    }

    pub fn with_offsets(&self, ox: f64, oy: f64, oz: f64) -> SensorGeometry {
        SensorGeometry { r: self.r, ox, oy, oz }
    }

    /// Residual of the piecewise surface equation for the branch chosen by `z`.
    pub fn surface_residual(&self, p: &Vector3<f64>) -> f64 {
        let dx = p.x - self.ox;
        let dy = p.y - self.oy;
        if p.z > self.oz {
            let dz = p.z - self.oz;
            (dx * dx + dy * dy + dz * dz).sqrt() - self.r
        } else {
            (dx * dx + dy * dy).sqrt() - self.r
        }
    }

    pub fn region_of(&self, p: &Vector3<f64>) -> SurfaceRegion {
        if p.z > self.oz {
            SurfaceRegion::Hemisphere
        } else {
            SurfaceRegion::Cylinder
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurfaceRegion {
    Hemisphere,
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub position: Vector3<f64>,
    pub region: SurfaceRegion,
}

/// Viewing ray through pixel `(u, v)`.
pub fn pixel_to_ray(u: f64, v: f64, k: &CameraIntrinsics) -> Result<UnitVector3, SensorError> {
    if !k.in_bounds(u, v) {
        return Err(SensorError::OutOfBounds {
            u,
            v,
            width: k.width,
            height: k.height,
        });
    }
    Ok(ray_unchecked(u, v, k))
}

fn ray_unchecked(u: f64, v: f64, k: &CameraIntrinsics) -> UnitVector3 {
    let xi = (u - k.cx) / k.fx;
    let yi = (v - k.cy) / k.fy;
    UnitVector3::new(Vector3::new(xi, yi, 1.0)).expect("z component is 1")
}

/// Both roots of `a t^2 - 2 b t + c = 0`, computed without cancellation.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    if a <= 0.0 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let q = b + b.signum() * disc.sqrt();
    if q == 0.0 {
        return Some((0.0, 0.0));
    }
    let (t1, t2) = (q / a, c / q);
    Some((t1.min(t2), t1.max(t2)))
}

/// First point of the surface hit by `ray` leaving the camera.
///
/// Candidates are roots of both pieces of the surface equation kept only on
/// their own branch (`z > o_z` sphere, `z <= o_z` cylinder); the smallest
/// positive one wins.
pub fn ray_surface_intersect(ray: &UnitVector3, g: &SensorGeometry) -> Result<SurfacePoint, SensorError> {
    let d = ray.as_vector();
    if d.z <= 0.0 {
        return Err(SensorError::RayBehindCamera(d.z));
    }
    let o = g.center();
    let mut best: Option<(f64, SurfaceRegion)> = None;
    let mut consider = |t: f64, region: SurfaceRegion| {
        if t > 0.0 && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, region));
        }
    };

    // Cylinder first so that the shared rim (z == o_z) is tagged Cylinder.
    let a_cyl = d.x * d.x + d.y * d.y;
    let b_cyl = d.x * o.x + d.y * o.y;
    let c_cyl = o.x * o.x + o.y * o.y - g.r * g.r;
    if let Some((t1, t2)) = quadratic_roots(a_cyl, b_cyl, c_cyl) {
        for t in [t1, t2] {
            if t * d.z <= g.oz {
                consider(t, SurfaceRegion::Cylinder);
            }
        }
    }
    if let Some((t1, t2)) = quadratic_roots(1.0, d.dot(&o), o.norm_squared() - g.r * g.r) {
        for t in [t1, t2] {
            if t * d.z > g.oz {
                consider(t, SurfaceRegion::Hemisphere);
            }
        }
    }
    let (t, region) = best.ok_or(SensorError::NoIntersection)?;
    Ok(SurfacePoint {
        position: d * t,
        region,
    })
}

/// Back-projects a contour of (possibly sub-pixel) coordinates to the surface.
///
/// Pixels whose ray misses the surface are dropped and counted in the cloud.
pub fn backproject_contour(
    contour: &[(f64, f64)],
    k: &CameraIntrinsics,
    g: &SensorGeometry,
) -> Result<ContactPointCloud, SensorError> {
    if contour.is_empty() {
        return Err(SensorError::EmptyContour);
    }
    let mut points = Vec::with_capacity(contour.len());
    let mut dropped = 0;
    for &(u, v) in contour {
        let ray = pixel_to_ray(u, v, k)?;
        match ray_surface_intersect(&ray, g) {
            Ok(p) => points.push(p.position),
            Err(SensorError::NoIntersection) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if points.is_empty() {
        return Err(SensorError::EmptyResult);
    }
    Ok(ContactPointCloud {
        points,
        frame: PointFrame::Sensor,
        dropped,
    })
}

/// Pinhole projection of a point in the sensor frame.
pub fn project_point(p: &Vector3<f64>, k: &CameraIntrinsics) -> Result<(f64, f64), SensorError> {
    if p.z <= 0.0 {
        return Err(SensorError::BehindCamera(p.z));
    }
    Ok((k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

/// Surface point seen by every pixel centre, computed once per (intrinsics, geometry).
#[derive(Debug, Clone)]
pub struct SurfaceGrid {
    intrinsics: CameraIntrinsics,
    geometry: SensorGeometry,
    points: Vec<Option<Vector3<f64>>>,
    bound_center: Vector3<f64>,
    bound_radius: f64,
}

impl SurfaceGrid {
    pub fn new(k: &CameraIntrinsics, g: &SensorGeometry) -> SurfaceGrid {
        let (w, h) = (k.width as usize, k.height as usize);
        let mut points = Vec::with_capacity(w * h);
        for v in 0..h {
            for u in 0..w {
                let ray = ray_unchecked(u as f64, v as f64, k);
                points.push(ray_surface_intersect(&ray, g).ok().map(|p| p.position));
            }
        }
        let hits: Vec<&Vector3<f64>> = points.iter().flatten().collect();
        let bound_center = if hits.is_empty() {
            g.apex()
        } else {
            hits.iter().fold(Vector3::zeros(), |acc, p| acc + *p) / hits.len() as f64
        };
        let bound_radius = hits
            .iter()
            .map(|p| (*p - bound_center).norm())
            .fold(0.0, f64::max);
        SurfaceGrid {
            intrinsics: *k,
            geometry: *g,
            points,
            bound_center,
            bound_radius,
        }
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn geometry(&self) -> &SensorGeometry {
        &self.geometry
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width as usize
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height as usize
    }

    /// Surface point at integer pixel `(u, v)`, `None` if its ray misses.
    pub fn point(&self, u: usize, v: usize) -> Option<&Vector3<f64>> {
        self.points[v * self.width() + u].as_ref()
    }

    pub fn points(&self) -> &[Option<Vector3<f64>>] {
        &self.points
    }

    /// Sphere enclosing every visible surface point.
    pub fn bounding_sphere(&self) -> (Vector3<f64>, f64) {
        (self.bound_center, self.bound_radius)
    }
}
