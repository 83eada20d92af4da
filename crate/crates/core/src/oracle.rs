//! Analytic contact oracle: ground-truth masks from geometry, boundary
//! extraction and a seeded segmentation-noise model.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{RigidTransform, UnitVector3};
use crate::plane::Plane;
use crate::rng::seeded;
use crate::sensor::{pixel_to_ray, ray_surface_intersect, CameraIntrinsics, SensorGeometry, SurfaceGrid};

/// Default penetration threshold, mm.
pub const DEFAULT_INDENTATION: f64 = 0.2;

/// Press depth used for plane-estimation and calibration scenes, mm.
pub const ESTIMATION_PRESS: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("mask is empty")]
    EmptyMask,
    #[error("indentation must be positive, got {0}")]
    InvalidIndentation(f64),
    #[error("object normal does not face the fingertip")]
    NotFacing,
    #[error("mask size {0}x{1} does not match intrinsics {2}x{3}")]
    SizeMismatch(usize, usize, u32, u32),
}

/// Binary tactile image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ContactMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn for_intrinsics(k: &CameraIntrinsics) -> Self {
        Self::empty(k.width as usize, k.height as usize)
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::empty(width, height);
        for v in 0..height {
            for u in 0..width {
                m.bits[v * width + u] = f(u, v);
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[v * self.width + u]
    }

    /// Out-of-image coordinates read as unset.
    pub fn get_signed(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && (u as usize) < self.width && (v as usize) < self.height && self.get(u as usize, v as usize)
    }

    pub fn set(&mut self, u: usize, v: usize, value: bool) {
        self.bits[v * self.width + u] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Mean pixel coordinate of set pixels.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
        for v in 0..self.height {
            for u in 0..self.width {
                if self.get(u, v) {
                    su += u as f64;
                    sv += v as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (su / n as f64, sv / n as f64))
    }

    /// Intersection over union; two empty masks count as identical.
    pub fn iou(&self, other: &ContactMask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += (*a && *b) as usize;
            union += (*a || *b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Binary PGM (P5), set pixels white.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.bits.iter().map(|b| if *b { 255u8 } else { 0u8 }));
        out
    }

    pub fn check_size(&self, k: &CameraIntrinsics) -> Result<(), OracleError> {
        if self.width != k.width as usize || self.height != k.height as usize {
            return Err(OracleError::SizeMismatch(self.width, self.height, k.width, k.height));
        }
        Ok(())
    }
}

/// A fingertip pressed against a plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactScene {
    /// Sensor frame expressed in the world frame.
    pub sensor_pose: RigidTransform,
    /// Object surface in the world frame; the normal points out of the object.
    pub plane: Plane,
    /// Penetration depth a pixel needs to count as contact, mm.
    pub indentation: f64,
}

impl ContactScene {
    pub fn new(sensor_pose: RigidTransform, plane: Plane, indentation: f64) -> Result<Self, OracleError> {
        if !(indentation > 0.0) {
            return Err(OracleError::InvalidIndentation(indentation));
        }
        Ok(Self {
            sensor_pose,
            plane,
            indentation,
        })
    }

    /// Scene whose plane, with outward `normal` given in the sensor frame,
    /// penetrates the hemisphere by `press` mm at its deepest point. The
    /// sensor frame coincides with the world frame.
    pub fn pressed(g: &SensorGeometry, normal: UnitVector3, press: f64, indentation: f64) -> Result<Self, OracleError> {
        let n = normal.as_vector();
        if n.z >= 0.0 {
            return Err(OracleError::NotFacing);
        }
        let support = g.center() - n * g.r;
        let plane = Plane::new(normal, n.dot(&support) + press);
        Self::new(RigidTransform::identity(), plane, indentation)
    }

    /// Object plane expressed in the sensor frame.
    pub fn plane_in_sensor(&self) -> Plane {
        self.plane.transformed(&self.sensor_pose.inverse())
    }
}

/// Outward plane normal in the sensor frame for a plane tilted by `tilt` rad
/// about the sensor y axis (zero tilt faces the apex head on).
pub fn tilted_normal(tilt: f64) -> UnitVector3 {
    UnitVector3::from_xyz(-tilt.sin(), 0.0, -tilt.cos()).expect("non-zero")
}

fn penetrates(plane: &Plane, indentation: f64, p: &Vector3<f64>) -> bool {
    plane.signed_distance(p) <= -indentation
}

/// True if no visible surface point can reach the indentation threshold.
fn quick_reject(plane: &Plane, indentation: f64, grid: &SurfaceGrid) -> bool {
    let (c, rad) = grid.bounding_sphere();
    plane.signed_distance(&c) - rad > -indentation
}

/// Renders the ground-truth mask using a precomputed surface grid.
pub fn render_with_grid(scene: &ContactScene, grid: &SurfaceGrid) -> ContactMask {
    let mut mask = ContactMask::empty(grid.width(), grid.height());
    let plane = scene.plane_in_sensor();
    if quick_reject(&plane, scene.indentation, grid) {
        return mask;
    }
    for (bit, p) in mask.bits.iter_mut().zip(grid.points()) {
        if let Some(p) = p {
            *bit = penetrates(&plane, scene.indentation, p);
        }
    }
    mask
}

/// Number of contact pixels, without materialising the mask.
pub fn contact_pixel_count(scene: &ContactScene, grid: &SurfaceGrid) -> usize {
    let plane = scene.plane_in_sensor();
    if quick_reject(&plane, scene.indentation, grid) {
        return 0;
    }
    grid.points()
        .iter()
        .flatten()
        .filter(|p| penetrates(&plane, scene.indentation, p))
        .count()
}

/// Renders the ground-truth contact mask by evaluating every pixel.
pub fn render_contact_mask(scene: &ContactScene, k: &CameraIntrinsics, g: &SensorGeometry) -> ContactMask {
    render_with_grid(scene, &SurfaceGrid::new(k, g))
}

/// Set pixels 4-adjacent to an unset or out-of-image pixel, ordered by angle
/// around the mask centroid (ties by distance, then row-major index).
pub fn mask_boundary(m: &ContactMask) -> Result<Vec<(usize, usize)>, OracleError> {
    let (cu, cv) = m.centroid().ok_or(OracleError::EmptyMask)?;
    let mut pts = Vec::new();
    for v in 0..m.height {
        for u in 0..m.width {
            if !m.get(u, v) {
                continue;
            }
            let (iu, iv) = (u as i64, v as i64);
            let edge = !m.get_signed(iu - 1, iv)
                || !m.get_signed(iu + 1, iv)
                || !m.get_signed(iu, iv - 1)
                || !m.get_signed(iu, iv + 1);
            if edge {
                pts.push((u, v));
            }
        }
    }
    let key = |&(u, v): &(usize, usize)| {
        let (du, dv) = (u as f64 - cu, v as f64 - cv);
        (dv.atan2(du), du.hypot(dv), v * m.width + u)
    };
    pts.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(ka.2.cmp(&kb.2))
    });
    Ok(pts)
}

/// Boundary pixels as floating-point coordinates, ready for back-projection.
pub fn boundary_coords(m: &ContactMask) -> Result<Vec<(f64, f64)>, OracleError> {
    Ok(mask_boundary(m)?.into_iter().map(|(u, v)| (u as f64, v as f64)).collect())
}

/// Signed penetration margin at a sub-pixel location; negative inside contact.
fn margin(plane: &Plane, indentation: f64, k: &CameraIntrinsics, g: &SensorGeometry, u: f64, v: f64) -> Option<f64> {
    let ray = pixel_to_ray(u, v, k).ok()?;
    let p = ray_surface_intersect(&ray, g).ok()?;
    Some(plane.signed_distance(&p.position) + indentation)
}

/// Exact contact contour: `samples` sub-pixel points where the penetration
/// equals the indentation threshold, found by bisection along rays in the
/// image from the deepest contact pixel. Empty if there is no contact.
pub fn contact_contour(
    scene: &ContactScene,
    k: &CameraIntrinsics,
    g: &SensorGeometry,
    samples: usize,
) -> Vec<(f64, f64)> {
    let grid = SurfaceGrid::new(k, g);
    let plane = scene.plane_in_sensor();
    let mut deepest: Option<(f64, usize, usize)> = None;
    for v in 0..grid.height() {
        for u in 0..grid.width() {
            if let Some(p) = grid.point(u, v) {
                let m = plane.signed_distance(p) + scene.indentation;
                if m <= 0.0 && deepest.is_none_or(|(b, _, _)| m < b) {
                    deepest = Some((m, u, v));
                }
            }
        }
    }
    let Some((_, u0, v0)) = deepest else {
        return Vec::new();
    };
    let (u0, v0) = (u0 as f64, v0 as f64);
    let f = |u: f64, v: f64| margin(&plane, scene.indentation, k, g, u, v);
    let mut out = Vec::with_capacity(samples);
    for i in 0..samples {
        let phi = TAU * i as f64 / samples as f64;
        let (du, dv) = (phi.cos(), phi.sin());
        let (mut lo, mut hi) = (0.0, None);
        let mut s = 1.0;
        while hi.is_none() {
            match f(u0 + s * du, v0 + s * dv) {
                Some(m) if m <= 0.0 => {
                    lo = s;
                    s += 1.0;
                }
                Some(_) => hi = Some(s),
                None => break,
            }
        }
        let Some(mut hi) = hi else { continue };
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            match f(u0 + mid * du, v0 + mid * dv) {
                Some(m) if m <= 0.0 => lo = mid,
                _ => hi = mid,
            }
        }
        let s = 0.5 * (lo + hi);
        out.push((u0 + s * du, v0 + s * dv));
    }
    out
}

/// Segmentation noise: a smooth random warp of the boundary plus seeded flips
/// of pixels along it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskNoiseParams {
    /// Probability of flipping a pixel in the band around the warped boundary.
    pub flip_rate: f64,
    /// Scale of the low-frequency boundary displacement, pixels.
    pub warp_px: f64,
    /// Number of angular harmonics in the warp (1 = rigid shift).
    pub harmonics: u32,
}

impl MaskNoiseParams {
    pub const NONE: MaskNoiseParams = MaskNoiseParams {
        flip_rate: 0.0,
        warp_px: 0.0,
        harmonics: 0,
    };

    pub fn is_noiseless(&self) -> bool {
        self.flip_rate <= 0.0 && (self.warp_px <= 0.0 || self.harmonics == 0)
    }
}

impl Default for MaskNoiseParams {
    /// Preset matched to a mean IoU of about 0.97 against the clean mask.
    fn default() -> Self {
        Self {
            flip_rate: 0.05,
            warp_px: 3.5,
            harmonics: 1,
        }
    }
}

/// Two-pass chamfer distance from every pixel to the nearest pixel whose
/// value differs from `target`.
fn chamfer_distance(m: &ContactMask, target: bool) -> Vec<f64> {
    let (w, h) = (m.width, m.height);
    let big = (w + h) as f64 * 2.0;
    let mut d: Vec<f64> = m.bits.iter().map(|&b| if b == target { big } else { 0.0 }).collect();
    let diag = std::f64::consts::SQRT_2;
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            let mut best = d[i];
            if u > 0 {
                best = best.min(d[i - 1] + 1.0);
            }
            if v > 0 {
                best = best.min(d[i - w] + 1.0);
                if u > 0 {
                    best = best.min(d[i - w - 1] + diag);
                }
                if u + 1 < w {
                    best = best.min(d[i - w + 1] + diag);
                }
            }
            d[i] = best;
        }
    }
    for v in (0..h).rev() {
        for u in (0..w).rev() {
            let i = v * w + u;
            let mut best = d[i];
            if u + 1 < w {
                best = best.min(d[i + 1] + 1.0);
            }
            if v + 1 < h {
                best = best.min(d[i + w] + 1.0);
                if u + 1 < w {
                    best = best.min(d[i + w + 1] + diag);
                }
                if u > 0 {
                    best = best.min(d[i + w - 1] + diag);
                }
            }
            d[i] = best;
        }
    }
    d
}

/// Seeded segmentation corruption of a mask.
///
/// Only pixels within reach of the warped boundary are visited, in row-major
/// order with one draw each, so the output depends only on the mask and seed.
pub fn corrupt_mask(m: &ContactMask, noise: &MaskNoiseParams, seed: u64) -> ContactMask {
    let Some((cu, cv)) = m.centroid() else {
        return m.clone();
    };
    if noise.is_noiseless() {
        return m.clone();
    }
    let mut rng = seeded(seed);
    let harmonics: Vec<(f64, f64)> = (1..=noise.harmonics)
        .map(|k| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let phase = rng.random_range(0.0..TAU);
            (noise.warp_px * z / k as f64, phase)
        })
        .collect();
    let reach = harmonics.iter().map(|(a, _)| a.abs()).sum::<f64>().ceil() as usize + 3;

    let (mut u0, mut v0, mut u1, mut v1) = (usize::MAX, usize::MAX, 0, 0);
    for v in 0..m.height {
        for u in 0..m.width {
            if m.get(u, v) {
                u0 = u0.min(u);
                v0 = v0.min(v);
                u1 = u1.max(u);
                v1 = v1.max(v);
            }
        }
    }
    let u0 = u0.saturating_sub(reach);
    let v0 = v0.saturating_sub(reach);
    let u1 = (u1 + reach).min(m.width - 1);
    let v1 = (v1 + reach).min(m.height - 1);
    let sub = ContactMask::from_fn(u1 - u0 + 1, v1 - v0 + 1, |u, v| m.get(u + u0, v + v0));
    let inside = chamfer_distance(&sub, true);
    let outside = chamfer_distance(&sub, false);

    let mut out = ContactMask::empty(m.width, m.height);
    for sv in 0..sub.height {
        for su in 0..sub.width {
            let i = sv * sub.width + su;
            let (u, v) = (su + u0, sv + v0);
            let sd = if sub.bits[i] { inside[i] - 0.5 } else { 0.5 - outside[i] };
            let phi = (v as f64 - cv).atan2(u as f64 - cu);
            let warp: f64 = harmonics
                .iter()
                .enumerate()
                .map(|(k, (a, p))| a * ((k + 1) as f64 * phi + p).cos())
                .sum();
            let s = sd + warp;
            let flip_draw: f64 = rng.random();
            let mut bit = s > 0.0;
            if s.abs() < 1.0 && flip_draw < noise.flip_rate {
                bit = !bit;
            }
            out.set(u, v, bit);
        }
    }
    out
}
