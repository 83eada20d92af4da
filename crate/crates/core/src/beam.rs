//! Squeezing a thin sheet between the fingers: Coulomb feasibility, bending
//! moment of the arched sheet and the minimal squeeze force per location.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feed::MaterialPreset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamError {
    #[error("infeasible: mu_s1 = {mu_s1} must exceed mu_k2 = {mu_k2}")]
    Infeasible { mu_s1: f64, mu_k2: f64 },
    #[error("slope derivative vanishes at x = {x}")]
    SingularSlope { x: f64 },
    #[error("x = {x} outside [0, {l}]")]
    OutOfSpan { x: f64, l: f64 },
    #[error("invalid beam spec: {0}")]
    InvalidSpec(String),
}

pub const GRAVITY: f64 = 9.81;

/// Width of the squeezed region along the span, mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WidthProfile {
    Constant { w0: f64 },
    /// `w(x) = slope * x`, optionally capped at the sheet width.
    CornerLinear { slope: f64, cap: Option<f64> },
    /// Piecewise-linear samples `(x, w)`, sorted by `x`.
    Tabulated { points: Vec<(f64, f64)> },
}

impl WidthProfile {
    pub fn width(&self, x: f64) -> f64 {
        match self {
            WidthProfile::Constant { w0 } => *w0,
            WidthProfile::CornerLinear { slope, cap } => {
                let w = slope * x;
                cap.map_or(w, |c| w.min(c))
            }
            WidthProfile::Tabulated { points } => {
                if points.is_empty() {
                    return 0.0;
                }
                if x <= points[0].0 {
                    return points[0].1;
                }
                for p in points.windows(2) {
                    let ((x0, w0), (x1, w1)) = (p[0], p[1]);
                    if x <= x1 {
                        let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 1.0 };
                        return w0 + t * (w1 - w0);
                    }
                }
                points[points.len() - 1].1
            }
        }
    }

    /// `∫_0^l w(x) dx`.
    pub fn integral(&self, l: f64) -> f64 {
        match self {
            WidthProfile::Constant { w0 } => w0 * l,
            WidthProfile::CornerLinear { slope, cap } => match cap {
                Some(c) if *slope > 0.0 && c / slope < l => {
                    let xc = c / slope;
                    0.5 * slope * xc * xc + c * (l - xc)
                }
                _ => 0.5 * slope * l * l,
            },
            WidthProfile::Tabulated { .. } => adaptive_simpson(&|x| self.width(x), 0.0, l, 1e-8),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        match self {
            WidthProfile::Constant { w0 } => WidthProfile::Constant { w0: w0 * k },
            WidthProfile::CornerLinear { slope, cap } => {
                WidthProfile::CornerLinear { slope: slope * k, cap: cap.map(|c| c * k) }
            }
            WidthProfile::Tabulated { points } => {
                WidthProfile::Tabulated { points: points.iter().map(|&(x, w)| (x, w * k)).collect() }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    /// Elastic modulus, MPa.
    pub e: f64,
    /// Thickness, mm.
    pub h: f64,
    /// Span between the fingers, mm.
    pub l: f64,
    pub width: WidthProfile,
    pub mu_s1: f64,
    pub mu_k2: f64,
    /// Load carried by the finger, kg.
    pub m1: f64,
    /// Mass of the sheet, kg.
    pub m2: f64,
    /// Finger radius, mm.
    pub r: f64,
    pub g: f64,
}

impl BeamSpec {
    /// A4 sheet of the given material squeezed with the given profile.
    pub fn a4(material: &MaterialPreset, width: WidthProfile, l: f64, r: f64) -> Self {
        let volume = 210.0 * 297.0 * material.thickness;
        Self {
            e: material.youngs_modulus,
            h: material.thickness,
            l,
            width,
            mu_s1: material.mu_s1,
            mu_k2: material.mu_k2,
            m1: 0.0,
            // t/mm^3 to kg
            m2: material.density * volume * 1000.0,
            r,
            g: GRAVITY,
        }
    }

    pub fn validate(&self) -> Result<(), BeamError> {
        if !(self.e > 0.0 && self.h > 0.0 && self.l > 0.0 && self.r > 0.0) {
            return Err(BeamError::InvalidSpec("E, h, l and r must be positive".into()));
        }
        if !(self.m1 >= 0.0 && self.m2 >= 0.0 && self.g >= 0.0) {
            return Err(BeamError::InvalidSpec("masses and gravity must be non-negative".into()));
        }
        if !(self.mu_s1 >= 0.0 && self.mu_k2 >= 0.0) {
            return Err(BeamError::InvalidSpec("friction coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `I_z = ∫_0^l w(x) h^3 / 12 dx`, mm^5.
pub fn inertia_moment(spec: &BeamSpec) -> f64 {
    spec.width.integral(spec.l) * spec.h.powi(3) / 12.0
}

/// Bent shape of the sheet between the fingers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DeflectionCurve {
    /// `v(x) = delta (1 - cos(2 pi x / l)) / 2`.
    RaisedCosine { l: f64, delta: f64 },
}

impl DeflectionCurve {
    pub fn raised_cosine(l: f64, delta: f64) -> Self {
        DeflectionCurve::RaisedCosine { l, delta }
    }

    pub fn family(&self) -> &'static str {
        match self {
            DeflectionCurve::RaisedCosine { .. } => "raised_cosine",
        }
    }

    pub fn span(&self) -> f64 {
        match *self {
            DeflectionCurve::RaisedCosine { l, .. } => l,
        }
    }

    /// Apex deflection.
    pub fn delta(&self) -> f64 {
        match *self {
            DeflectionCurve::RaisedCosine { delta, .. } => delta,
        }
    }

    pub fn apex(&self) -> f64 {
        0.5 * self.span()
    }

    pub fn v(&self, x: f64) -> f64 {
        match *self {
            DeflectionCurve::RaisedCosine { l, delta } => 0.5 * delta * (1.0 - (std::f64::consts::TAU * x / l).cos()),
        }
    }

    pub fn dv(&self, x: f64) -> f64 {
        match *self {
            DeflectionCurve::RaisedCosine { l, delta } => {
                let k = std::f64::consts::TAU / l;
                0.5 * delta * k * (k * x).sin()
            }
        }
    }

    pub fn d2v(&self, x: f64) -> f64 {
        match *self {
            DeflectionCurve::RaisedCosine { l, delta } => {
                let k = std::f64::consts::TAU / l;
                0.5 * delta * k * k * (k * x).cos()
            }
        }
    }

    /// Slope angle of the tangent.
    pub fn slope_angle(&self, x: f64) -> f64 {
        self.dv(x).atan()
    }

    /// Arc length from `a` to `b` along the curve.
    pub fn arc_length(&self, a: f64, b: f64) -> f64 {
        adaptive_simpson(&|x| (1.0 + self.dv(x).powi(2)).sqrt(), a, b, 1e-14)
    }

    pub fn is_small_deflection(&self) -> bool {
        self.delta() <= self.span() / 10.0
    }
}

/// Rate of change of the slope angle with arc length at `x`, from central
/// differences on the (arc length, slope) parameterization. The step is
/// halved until the relative change drops below 1e-6.
pub fn elastica_curvature(curve: &DeflectionCurve, x: f64) -> Result<f64, BeamError> {
    let l = curve.span();
    let mut step = l / 50.0;
    let eval = |h: f64| -> Result<f64, BeamError> {
        let ds = curve.arc_length(x - h, x + h);
        if !(ds > 0.0) {
            return Err(BeamError::SingularSlope { x });
        }
        Ok((curve.slope_angle(x + h) - curve.slope_angle(x - h)) / ds)
    };
    let mut prev = eval(step)?;
    for _ in 0..40 {
        step *= 0.5;
        let cur = eval(step)?;
        let scale = cur.abs().max(prev.abs());
        if scale < 1e-300 || (cur - prev).abs() <= 1e-6 * scale {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(BeamError::SingularSlope { x })
}

/// Magnitude of the bending moment at `x`, N·mm² per the integral `I_z`
/// convention: `E I_z |v''|` in the small-deflection regime, `E I_z |dθ/ds|`
/// from the elastica parameterization beyond `l/10`.
pub fn bending_moment(curve: &DeflectionCurve, e: f64, i_z: f64, x: f64) -> Result<f64, BeamError> {
    let l = curve.span();
    if !(0.0..=l).contains(&x) {
        return Err(BeamError::OutOfSpan { x, l });
    }
    if curve.delta() == 0.0 {
        return Ok(0.0);
    }
    if curve.is_small_deflection() {
        Ok(e * i_z * curve.d2v(x).abs())
    } else {
        Ok(e * i_z * elastica_curvature(curve, x)?.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeForce {
    /// N.
    pub f_min: f64,
    /// N·mm².
    pub m1: f64,
    pub i_z: f64,
    /// Deflection at the apex, mm.
    pub v_apex: f64,
    /// Largest finger torque that does not slip at `f_min`, N·mm.
    pub torque_bound: f64,
}

/// Smallest vertical force `F >= 0` with
/// `mu_s1 (m1 g + F) >= mu_k2 (m1 g + m2 g + F) + M1 / (v l)`, evaluated at
/// the apex. The moment term is divided by the span because `I_z` integrates
/// the section inertia along it.
pub fn min_squeeze_force(spec: &BeamSpec, curve: &DeflectionCurve) -> Result<SqueezeForce, BeamError> {
    spec.validate()?;
    if spec.mu_s1 <= spec.mu_k2 {
        return Err(BeamError::Infeasible { mu_s1: spec.mu_s1, mu_k2: spec.mu_k2 });
    }
    let i_z = inertia_moment(spec);
    let x = curve.apex();
    let m1 = bending_moment(curve, spec.e, i_z, x)?;
    let v = curve.v(x);
    let bend = if m1 == 0.0 {
        0.0
    } else if v > 0.0 {
        m1 / (v * spec.l)
    } else {
        return Err(BeamError::InvalidSpec("deflection at the apex must be positive".into()));
    };
    let g = spec.g;
    let num = spec.mu_k2 * (spec.m1 + spec.m2) * g - spec.mu_s1 * spec.m1 * g + bend;
    let f_min = (num / (spec.mu_s1 - spec.mu_k2)).max(0.0);
    Ok(SqueezeForce { f_min, m1, i_z, v_apex: v, torque_bound: spec.r * spec.mu_s1 * (spec.m1 * g + f_min) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingVerdict {
    /// Forces strictly decrease in the listed order.
    Strict,
    /// Non-increasing with at least one equal pair.
    Tie,
    Violated,
    Infeasible,
}

impl OrderingVerdict {
    pub fn label(self) -> &'static str {
        match self {
            OrderingVerdict::Strict => "strict",
            OrderingVerdict::Tie => "tie",
            OrderingVerdict::Violated => "violated",
            OrderingVerdict::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationRow {
    pub label: String,
    pub result: Result<SqueezeForce, String>,
    /// First feasible force divided by this one.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationReport {
    pub rows: Vec<LocationRow>,
    pub verdict: OrderingVerdict,
}

impl LocationReport {
    pub fn force(&self, label: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.label == label).and_then(|r| r.result.as_ref().ok()).map(|f| f.f_min)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("location,F_min_N,I_z,M1,feasible\n");
        for r in &self.rows {
            match &r.result {
                Ok(f) => s.push_str(&format!("{},{:.9},{:.9},{:.9},true\n", r.label, f.f_min, f.i_z, f.m1)),
                Err(_) => s.push_str(&format!("{},,,,false\n", r.label)),
            }
        }
        s
    }
}

/// Minimal squeeze force per location under one shared deflection curve.
pub fn location_report(specs: &[(String, BeamSpec)], curve: &DeflectionCurve) -> Result<LocationReport, BeamError> {
    if specs.len() < 2 {
        return Err(BeamError::InvalidSpec("location report needs at least two locations".into()));
    }
    let results: Vec<Result<SqueezeForce, BeamError>> = specs.iter().map(|(_, s)| min_squeeze_force(s, curve)).collect();
    let forces: Vec<Option<f64>> = results.iter().map(|r| r.as_ref().ok().map(|f| f.f_min)).collect();
    let verdict = if forces.iter().any(|f| f.is_none()) {
        OrderingVerdict::Infeasible
    } else {
        let f: Vec<f64> = forces.iter().map(|x| x.unwrap()).collect();
        let tol = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        if f.windows(2).any(|w| w[1] > w[0] && !tol(w[0], w[1])) {
            OrderingVerdict::Violated
        } else if f.windows(2).any(|w| tol(w[0], w[1])) {
            OrderingVerdict::Tie
        } else {
            OrderingVerdict::Strict
        }
    };
    let first = forces.iter().flatten().next().copied();
    let rows = specs
        .iter()
        .zip(results)
        .map(|((label, _), r)| {
            let ratio = match (&r, first) {
                (Ok(f), Some(f0)) if f.f_min > 0.0 => Some(f0 / f.f_min),
                _ => None,
            };
            LocationRow { label: label.clone(), result: r.map_err(|e| e.to_string()), ratio }
        })
        .collect();
    Ok(LocationReport { rows, verdict })
}

/// Squeeze locations on an A4 sheet, from the largest to the smallest
/// participating width: centre, edge, corner along the edge, corner along
/// the bisector.
pub fn default_locations(material: &MaterialPreset, l: f64, r: f64) -> Vec<(String, BeamSpec)> {
    let corner1_slope = (90.0f64 - 15.0).to_radians().tan();
    let profiles = [
        ("center", WidthProfile::Constant { w0: 210.0 }),
        ("edge", WidthProfile::Constant { w0: 105.0 }),
        ("corner_case1", WidthProfile::CornerLinear { slope: corner1_slope, cap: Some(210.0) }),
        ("corner_case2", WidthProfile::CornerLinear { slope: 2.0 * 45f64.to_radians().tan(), cap: Some(210.0) }),
    ];
    profiles.into_iter().map(|(n, w)| (n.to_string(), BeamSpec::a4(material, w, l, r))).collect()
}

/// Default arch: raised cosine with apex `l / 20`.
pub fn default_curve(l: f64) -> DeflectionCurve {
    DeflectionCurve::raised_cosine(l, l / 20.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feed::Material;

    fn spec(width: WidthProfile) -> BeamSpec {
        BeamSpec {
            e: 828.0,
            h: 0.1,
            l: 20.0,
            width,
            mu_s1: 0.5,
            mu_k2: 0.1,
            m1: 0.0,
            m2: 0.0,
            r: 8.0,
            g: GRAVITY,
        }
    }

    #[test]
    fn inertia_examples() {
        let c = inertia_moment(&spec(WidthProfile::Constant { w0: 210.0 }));
        assert!((c - 0.35).abs() < 1e-12);
        let k = inertia_moment(&spec(WidthProfile::CornerLinear { slope: 2.0, cap: None }));
        assert!((k - 400.0 * 1e-3 / 12.0).abs() < 1e-12);
        let mut s = spec(WidthProfile::Constant { w0: 210.0 });
        s.h = 1e-9;
        assert!(inertia_moment(&s) < 1e-20);
    }

    #[test]
    fn tabulated_matches_closed_form() {
        let t = WidthProfile::Tabulated { points: vec![(0.0, 0.0), (20.0, 40.0)] };
        assert!((t.integral(20.0) - 400.0).abs() < 1e-9);
    }

    #[test]
    fn apex_moment_closed_form() {
        let c = DeflectionCurve::raised_cosine(20.0, 1.0);
        let m = bending_moment(&c, 828.0, 0.35, 10.0).unwrap();
        let k = std::f64::consts::TAU / 20.0;
        assert!((m - 828.0 * 0.35 * 1.0 * k * k / 2.0).abs() < 1e-9);
        assert_eq!(bending_moment(&DeflectionCurve::raised_cosine(20.0, 0.0), 828.0, 0.35, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn branches_agree_at_switch() {
        let small = DeflectionCurve::raised_cosine(20.0, 2.0);
        let large = DeflectionCurve::raised_cosine(20.0, 2.0 + 1e-9);
        assert!(small.is_small_deflection() && !large.is_small_deflection());
        for x in [9.0, 10.0, 11.0] {
            let a = bending_moment(&small, 828.0, 0.35, x).unwrap();
            let b = bending_moment(&large, 828.0, 0.35, x).unwrap();
            assert!((a - b).abs() <= 0.05 * a, "x = {x}: {a} vs {b}");
        }
    }

    #[test]
    fn massless_flat_needs_no_force() {
        let f = min_squeeze_force(&spec(WidthProfile::Constant { w0: 210.0 }), &DeflectionCurve::raised_cosine(20.0, 0.0)).unwrap();
        assert_eq!(f.f_min, 0.0);
    }

    #[test]
    fn swapped_friction_is_infeasible() {
        let mut s = spec(WidthProfile::Constant { w0: 210.0 });
        s.mu_s1 = 0.1;
        s.mu_k2 = 0.5;
        assert!(matches!(min_squeeze_force(&s, &default_curve(20.0)), Err(BeamError::Infeasible { .. })));
    }

    #[test]
    fn location_ordering() {
        let locs = default_locations(&Material::PrintPaper.preset(), 20.0, 8.0);
        let rep = location_report(&locs, &default_curve(20.0)).unwrap();
        assert_eq!(rep.verdict, OrderingVerdict::Strict);
        assert!(rep.force("center").unwrap() / rep.force("corner_case2").unwrap() >= 2.0);
        let twin = vec![locs[0].clone(), locs[0].clone()];
        assert_eq!(location_report(&twin, &default_curve(20.0)).unwrap().verdict, OrderingVerdict::Tie);
    }
}
