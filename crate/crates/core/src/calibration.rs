//! Recovery of the surface offsets `(o_x, o_y, o_z)` from contact masks:
//! flat vertical presses fix `o_x, o_y`, presses at ±45° fix `o_z`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_error, UnitVector3};
use crate::oracle::{
    boundary_coords, corrupt_mask, render_with_grid, tilted_normal, ContactMask, ContactScene, MaskNoiseParams,
    DEFAULT_INDENTATION, ESTIMATION_PRESS,
};
use crate::plane::{ransac_plane_toward, RansacParams};
use crate::rng::derive;
use crate::sensor::{backproject_contour, CameraIntrinsics, SensorGeometry, SurfaceGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("no vertical contact masks")]
    MissingVertical,
    #[error("no contact mask tilted to {0:+} degrees")]
    MissingTilt(f64),
    #[error("{stage} search did not converge in {iterations} iterations")]
    NoConvergence { stage: &'static str, iterations: usize },
    #[error("o_z objective flat within {tol} over more than 0.5 mm around {o_z}")]
    AmbiguousMinimum { o_z: f64, tol: f64 },
    #[error("invalid calibration parameters: {0}")]
    InvalidParams(String),
}

/// Contact masks from one sensor. `true_geometry` is only used for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    pub vertical_masks: Vec<ContactMask>,
    /// Tilt in degrees and the mask observed at that tilt.
    pub tilted_masks: Vec<(f64, ContactMask)>,
    pub true_geometry: Option<SensorGeometry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationParams {
    /// Half width of the search interval around the initial offsets, mm.
    pub search_half_width: f64,
    /// Interval length at which a golden-section search stops, mm.
    pub tol: f64,
    pub max_iterations: usize,
    /// Alternations between the xy and z stages.
    pub max_passes: usize,
    pub ransac: RansacParams,
    pub seed: u64,
    /// Objective change (degrees) below which the o_z objective counts as flat.
    pub flat_tol: f64,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self {
            search_half_width: 3.0,
            tol: 0.01,
            max_iterations: 200,
            max_passes: 6,
            ransac: RansacParams::default(),
            seed: 0,
            flat_tol: 1e-4,
        }
    }
}

/// How the synthetic calibration images are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptureParams {
    pub vertical_count: usize,
    /// Masks per tilt direction.
    pub tilted_count: usize,
    pub tilt_deg: f64,
    pub press: f64,
    pub indentation: f64,
}

impl Default for CaptureParams {
    fn default() -> Self {
        Self { vertical_count: 3, tilted_count: 3, tilt_deg: 45.0, press: ESTIMATION_PRESS, indentation: DEFAULT_INDENTATION }
    }
}

/// Renders a calibration set for a sensor with geometry `truth`.
pub fn synthesize_set(
    k: &CameraIntrinsics,
    truth: &SensorGeometry,
    capture: &CaptureParams,
    noise: &MaskNoiseParams,
    seed: u64,
) -> CalibrationSet {
    let grid = SurfaceGrid::new(k, truth);
    let shot = |normal: UnitVector3, stream: u64| {
        let scene = ContactScene::pressed(truth, normal, capture.press, capture.indentation).expect("plane faces the sensor");
        corrupt_mask(&render_with_grid(&scene, &grid), noise, derive(seed, stream))
    };
    let vertical_masks = (0..capture.vertical_count).map(|i| shot(tilted_normal(0.0), i as u64)).collect();
    let mut tilted_masks = Vec::new();
    for (j, sign) in [1.0, -1.0].into_iter().enumerate() {
        let deg = sign * capture.tilt_deg;
        for i in 0..capture.tilted_count {
            let stream = 1000 * (j as u64 + 1) + i as u64;
            tilted_masks.push((deg, shot(tilted_normal(deg.to_radians()), stream)));
        }
    }
    CalibrationSet { vertical_masks, tilted_masks, true_geometry: Some(*truth) }
}

/// Golden-section minimisation of `f` on `[lo, hi]` down to an interval of `tol`.
/// Returns the minimiser, its value and the number of evaluations.
pub fn golden_section(
    f: &mut dyn FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iterations: usize,
) -> Option<(f64, f64, usize)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evals = 2;
    let mut it = 0;
    while b - a > tol {
        if it >= max_iterations {
            return None;
        }
        it += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        evals += 1;
    }
    let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    Some((x, fx, evals))
}

type Contour = Vec<(f64, f64)>;

/// Mask boundary without the pixels on the image border: where a contact
/// patch is clipped by the image, those pixels lie inside the patch rather
/// than on the contact edge.
fn interior_boundary(m: &ContactMask) -> Option<Contour> {
    let (w, h) = (m.width() as f64 - 1.0, m.height() as f64 - 1.0);
    let c: Contour = boundary_coords(m).ok()?.into_iter().filter(|&(u, v)| u > 0.0 && v > 0.0 && u < w && v < h).collect();
    (!c.is_empty()).then_some(c)
}

/// Boundaries of the set's masks, extracted once per calibration.
struct Prepared {
    vertical: Vec<Contour>,
    tilted: Vec<(f64, Contour)>,
}

impl Prepared {
    fn new(set: &CalibrationSet) -> Self {
        Self {
            vertical: set.vertical_masks.iter().filter_map(interior_boundary).collect(),
            tilted: set.tilted_masks.iter().filter_map(|(d, m)| interior_boundary(m).map(|c| (*d, c))).collect(),
        }
    }

    fn xy(&self, k: &CameraIntrinsics, g: &SensorGeometry) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for contour in &self.vertical {
            let Ok(cloud) = backproject_contour(contour, k, g) else { continue };
            let c = cloud.centroid().expect("non-empty cloud");
            total += ((c.x - g.ox).powi(2) + (c.y - g.oy).powi(2)).sqrt();
            n += 1;
        }
        if n == 0 {
            f64::INFINITY
        } else {
            total / n as f64
        }
    }

    fn z(&self, k: &CameraIntrinsics, g: &SensorGeometry, params: &CalibrationParams) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for (i, (deg, contour)) in self.tilted.iter().enumerate() {
            let truth = tilted_normal(deg.to_radians());
            let Ok(cloud) = backproject_contour(contour, k, g) else { continue };
            let Ok(est) = ransac_plane_toward(&cloud, &params.ransac, derive(params.seed, i as u64), &Vector3::zeros())
            else {
                continue;
            };
            total += angle_error(&est.normal, &truth);
            n += 1;
        }
        if n == 0 {
            f64::INFINITY
        } else {
            total / n as f64
        }
    }
}

/// Mean horizontal distance between the 3D centroid of each back-projected
/// vertical boundary and the apex of the candidate surface.
pub fn xy_objective(set: &CalibrationSet, k: &CameraIntrinsics, g: &SensorGeometry) -> f64 {
    Prepared::new(set).xy(k, g)
}

/// Mean angle error, degrees, between the plane fitted under the candidate
/// geometry and the known tilted plane.
pub fn z_objective(set: &CalibrationSet, k: &CameraIntrinsics, g: &SensorGeometry, params: &CalibrationParams) -> f64 {
    Prepared::new(set).z(k, g, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XyResult {
    pub ox: f64,
    pub oy: f64,
    /// Objective at the solution, mm.
    pub residual: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZResult {
    pub oz: f64,
    /// Mean plane error at the solution, degrees.
    pub residual_deg: f64,
    pub evaluations: usize,
}

fn check_tilts(set: &CalibrationSet) -> Result<(), CalibrationError> {
    for sign in [1.0, -1.0] {
        if !set.tilted_masks.iter().any(|(d, _)| d * sign > 0.0) {
            return Err(CalibrationError::MissingTilt(sign * 45.0));
        }
    }
    Ok(())
}

fn check_params(p: &CalibrationParams) -> Result<(), CalibrationError> {
    if !(p.search_half_width > 0.0 && p.tol > 0.0 && p.max_iterations > 0 && p.max_passes > 0) {
        return Err(CalibrationError::InvalidParams("search width, tol, iterations and passes must be positive".into()));
    }
    Ok(())
}

/// Coordinate descent over `(o_x, o_y)` with golden-section line searches in
/// a box of `search_half_width` around `g0`. `o_z` is held at `g0.oz`.
pub fn calibrate_xy(
    set: &CalibrationSet,
    k: &CameraIntrinsics,
    g0: &SensorGeometry,
    params: &CalibrationParams,
) -> Result<XyResult, CalibrationError> {
    check_params(params)?;
    if set.vertical_masks.is_empty() {
        return Err(CalibrationError::MissingVertical);
    }
    search_xy(&Prepared::new(set), k, g0, params)
}

fn search_xy(
    prep: &Prepared,
    k: &CameraIntrinsics,
    g0: &SensorGeometry,
    params: &CalibrationParams,
) -> Result<XyResult, CalibrationError> {
    let lim = params.search_half_width.min(g0.r - 1e-6);
    let (mut ox, mut oy) = (g0.ox, g0.oy);
    let mut evals = 0;
    for _ in 0..params.max_iterations {
        let (px, py) = (ox, oy);
        let lo = (g0.ox - lim).max(-g0.r + 1e-6);
        let hi = (g0.ox + lim).min(g0.r - 1e-6);
        let mut fx = |x: f64| prep.xy(k, &g0.with_offsets(x, oy, g0.oz));
        let (x, _, e) = golden_section(&mut fx, lo, hi, params.tol * 0.1, params.max_iterations)
            .ok_or(CalibrationError::NoConvergence { stage: "o_x", iterations: params.max_iterations })?;
        ox = x;
        evals += e;
        let lo = (g0.oy - lim).max(-g0.r + 1e-6);
        let hi = (g0.oy + lim).min(g0.r - 1e-6);
        let mut fy = |y: f64| prep.xy(k, &g0.with_offsets(ox, y, g0.oz));
        let (y, fy_min, e) = golden_section(&mut fy, lo, hi, params.tol * 0.1, params.max_iterations)
            .ok_or(CalibrationError::NoConvergence { stage: "o_y", iterations: params.max_iterations })?;
        oy = y;
        evals += e;
        if (ox - px).abs() < params.tol && (oy - py).abs() < params.tol {
            return Ok(XyResult { ox, oy, residual: fy_min, evaluations: evals });
        }
    }
    Err(CalibrationError::NoConvergence { stage: "xy", iterations: params.max_iterations })
}

const Z_SCAN_STEP: f64 = 0.25;

/// Search for `o_z` with `o_x, o_y` taken from `g_xy`.
pub fn calibrate_z(
    set: &CalibrationSet,
    k: &CameraIntrinsics,
    g_xy: &SensorGeometry,
    params: &CalibrationParams,
) -> Result<ZResult, CalibrationError> {
    check_params(params)?;
    check_tilts(set)?;
    search_z(&Prepared::new(set), k, g_xy, params)
}

/// Scan at `Z_SCAN_STEP` to pick the basin, then golden-section inside it;
/// the objective goes through RANSAC and is not unimodal far from the truth.
fn search_z(
    prep: &Prepared,
    k: &CameraIntrinsics,
    g_xy: &SensorGeometry,
    params: &CalibrationParams,
) -> Result<ZResult, CalibrationError> {
    let lo = (g_xy.oz - params.search_half_width).max(0.0);
    let hi = g_xy.oz + params.search_half_width;
    let obj = |z: f64| prep.z(k, &g_xy.with_offsets(g_xy.ox, g_xy.oy, z), params);
    let steps = ((hi - lo) / Z_SCAN_STEP).ceil() as usize;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=steps {
        let z = (lo + i as f64 * Z_SCAN_STEP).min(hi);
        let f = obj(z);
        if f < best.1 {
            best = (z, f);
        }
    }
    let mut evals = steps + 1;
    let a = (best.0 - Z_SCAN_STEP).max(lo);
    let b = (best.0 + Z_SCAN_STEP).min(hi);
    let mut f = obj;
    let (oz, residual_deg, e) = golden_section(&mut f, a, b, params.tol * 0.1, params.max_iterations)
        .ok_or(CalibrationError::NoConvergence { stage: "o_z", iterations: params.max_iterations })?;
    evals += e;
    let left = obj((oz - 0.25).max(lo));
    let right = obj((oz + 0.25).min(hi));
    evals += 2;
    if (left - residual_deg).abs() < params.flat_tol && (right - residual_deg).abs() < params.flat_tol {
        return Err(CalibrationError::AmbiguousMinimum { o_z: oz, tol: params.flat_tol });
    }
    Ok(ZResult { oz, residual_deg, evaluations: evals })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub ox: f64,
    pub oy: f64,
    pub oz: f64,
    pub xy_residual: f64,
    pub z_residual_deg: f64,
    pub passes: usize,
    pub evaluations: usize,
    /// Largest absolute offset error when the true geometry is known, mm.
    pub max_error: Option<f64>,
}

impl CalibrationReport {
    pub fn geometry(&self, r: f64) -> SensorGeometry {
        SensorGeometry { r, ox: self.ox, oy: self.oy, oz: self.oz }
    }
}

/// Both stages, alternated until the offsets move less than `tol`. A
/// single xy-then-z pass leaves a bias in `o_x` proportional to the `o_z`
/// error, because the vertical presses only see the apex through the
/// perspective ray.
pub fn calibrate(
    set: &CalibrationSet,
    k: &CameraIntrinsics,
    g0: &SensorGeometry,
    params: &CalibrationParams,
) -> Result<CalibrationReport, CalibrationError> {
    check_params(params)?;
    if set.vertical_masks.is_empty() {
        return Err(CalibrationError::MissingVertical);
    }
    check_tilts(set)?;
    let prep = Prepared::new(set);
    let mut g = *g0;
    let mut evals = 0;
    for pass in 1..=params.max_passes {
        let prev = g;
        let xy = search_xy(&prep, k, &SensorGeometry { ox: g0.ox, oy: g0.oy, ..g }, params)?;
        g.ox = xy.ox;
        g.oy = xy.oy;
        let z = search_z(&prep, k, &SensorGeometry { oz: g0.oz, ..g }, params)?;
        g.oz = z.oz;
        evals += xy.evaluations + z.evaluations;
        let moved = (g.ox - prev.ox).abs().max((g.oy - prev.oy).abs()).max((g.oz - prev.oz).abs());
        if moved < params.tol || pass == params.max_passes {
            let max_error = set
                .true_geometry
                .map(|t| (t.ox - g.ox).abs().max((t.oy - g.oy).abs()).max((t.oz - g.oz).abs()));
            if moved >= params.tol {
                return Err(CalibrationError::NoConvergence { stage: "alternation", iterations: pass });
            }
            return Ok(CalibrationReport {
                ox: g.ox,
                oy: g.oy,
                oz: g.oz,
                xy_residual: xy.residual,
                z_residual_deg: z.residual_deg,
                passes: pass,
                evaluations: evals,
                max_error,
            });
        }
    }
    unreachable!("loop returns on the last pass")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let mut f = |x: f64| (x - 1.234).powi(2);
        let (x, _, _) = golden_section(&mut f, -3.0, 3.0, 1e-6, 200).unwrap();
        assert!((x - 1.234).abs() < 1e-6);
    }

    #[test]
    fn missing_data_is_rejected() {
        let k = CameraIntrinsics::default();
        let g = SensorGeometry::default();
        let empty = CalibrationSet { vertical_masks: vec![], tilted_masks: vec![], true_geometry: None };
        let p = CalibrationParams::default();
        assert_eq!(calibrate_xy(&empty, &k, &g, &p), Err(CalibrationError::MissingVertical));
        let mut set = synthesize_set(&k, &g, &CaptureParams { vertical_count: 1, tilted_count: 1, ..Default::default() }, &MaskNoiseParams::NONE, 0);
        set.tilted_masks.retain(|(d, _)| *d > 0.0);
        assert_eq!(calibrate_z(&set, &k, &g, &p), Err(CalibrationError::MissingTilt(-45.0)));
    }

    #[test]
    fn zero_offset_round_trip() {
        let k = CameraIntrinsics::default();
        let g = SensorGeometry::default();
        let set = synthesize_set(&k, &g, &CaptureParams::default(), &MaskNoiseParams::NONE, 1);
        let rep = calibrate(&set, &k, &g, &CalibrationParams::default()).unwrap();
        assert!(rep.max_error.unwrap() < 0.05, "{rep:?}");
    }
}
