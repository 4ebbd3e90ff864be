//! Bragg kinematics and experiment planning for a white thermal beam.
//!
//! A reflection `g = m·p` (with `p` the shortest vector on its reciprocal
//! row) reflecting wavelength λ at angle θ is accompanied, at that same
//! angle, by every allowed `j·p` reflecting λ·m/j. Whenever such a
//! wavelength also lies in the incident spectrum the measured intensity is a
//! mixture and the reflection is contaminated there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    classify, q_over_4pi, structure_factor_magnitude, CrystalSpec, Reflection, ReflectionClass, ScatteringModel,
};

/// Overlaps shorter than this (degrees) count as touching, not overlapping.
const OVERLAP_EPS_DEG: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumWindow {
    /// Å
    pub lambda_min: f64,
    /// Å
    pub lambda_max: f64,
    /// Å, peak of the thermal spectrum.
    pub lambda_peak: f64,
    /// degrees
    pub two_theta_min: f64,
    /// degrees
    pub two_theta_max: f64,
}

impl Default for SpectrumWindow {
    fn default() -> Self {
        Self {
            lambda_min: 0.8,
            lambda_max: 2.5,
            lambda_peak: 1.2,
            // the detector reaches 0°, but the lowest usable angle in practice is 15°
            two_theta_min: 15.0,
            two_theta_max: 110.0,
        }
    }
}

impl SpectrumWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0 && self.lambda_min < self.lambda_max && self.lambda_max.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "need 0 < lambda_min < lambda_max, got [{}, {}]",
                self.lambda_min, self.lambda_max
            )));
        }
        if !(self.two_theta_min >= 0.0 && self.two_theta_min < self.two_theta_max && self.two_theta_max <= 180.0) {
            return Err(Error::InvalidInput(format!(
                "need 0 ≤ two_theta_min < two_theta_max ≤ 180, got [{}, {}]",
                self.two_theta_min, self.two_theta_max
            )));
        }
        Ok(())
    }

    /// Wavelengths reflected by `r` anywhere on the detector arc, ignoring the spectrum.
    fn detector_lambda_range(&self, two_d: f64) -> (f64, f64) {
        let s = |two_theta: f64| (two_theta.min(180.0).to_radians() / 2.0).sin();
        (two_d * s(self.two_theta_min), two_d * s(self.two_theta_max))
    }
}

/// 2d = 1/(Q/4π), in Å.
fn two_d_spacing(crystal: &CrystalSpec, r: Reflection) -> f64 {
    1.0 / q_over_4pi(crystal, r)
}

/// Bragg angle θ in degrees.
pub fn bragg_angle(crystal: &CrystalSpec, r: Reflection, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!(
            "wavelength must be positive, got {lambda}"
        )));
    }
    if r.is_origin() {
        return Err(Error::InvalidInput("(000) is not a reflection".into()));
    }
    let sin_theta = lambda * q_over_4pi(crystal, r);
    if sin_theta > 1.0 {
        return Err(Error::NoReflection {
            reflection: r,
            lambda,
            sin_theta,
        });
    }
    Ok(sin_theta.asin().to_degrees())
}

/// Scattering angle 2θ (degrees) at which `two_d`-spaced planes reflect λ.
fn two_theta_for(two_d: f64, lambda: f64) -> f64 {
    2.0 * (lambda / two_d).min(1.0).asin().to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionWindow {
    /// Å
    pub lambda: (f64, f64),
    /// degrees
    pub two_theta: (f64, f64),
}

/// Wavelength and 2θ range where `r` is both inside the spectrum and on the detector.
pub fn reflection_window(crystal: &CrystalSpec, r: Reflection, w: &SpectrumWindow) -> Result<ReflectionWindow> {
    if r.is_origin() {
        return Err(Error::EmptyWindow(r));
    }
    let two_d = two_d_spacing(crystal, r);
    let (det_lo, det_hi) = w.detector_lambda_range(two_d);
    let lo = w.lambda_min.max(det_lo);
    let hi = w.lambda_max.min(det_hi);
    if !(hi > lo) {
        return Err(Error::EmptyWindow(r));
    }
    Ok(ReflectionWindow {
        lambda: (lo, hi),
        two_theta: (two_theta_for(two_d, lo), two_theta_for(two_d, hi)),
    })
}

/// A reflection on the same reciprocal row that shares the Bragg angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contaminant {
    pub reflection: Reflection,
    pub class: ReflectionClass,
    /// Harmonic order n = numerator/denominator; the contaminant reflects λ/n.
    pub order_numerator: u32,
    pub order_denominator: u32,
    /// Fundamental wavelengths (Å) for which the contaminant's λ/n is in the spectrum
    /// and the angle is on the detector.
    pub lambda: (f64, f64),
    /// Detector angles (degrees) where the contaminant is present.
    pub two_theta: (f64, f64),
}

impl Contaminant {
    pub fn order(&self) -> f64 {
        self.order_numerator as f64 / self.order_denominator as f64
    }

    /// Length (degrees) of the overlap with a 2θ interval.
    pub fn overlap_deg(&self, two_theta: (f64, f64)) -> f64 {
        (self.two_theta.1.min(two_theta.1) - self.two_theta.0.max(two_theta.0)).max(0.0)
    }
}

/// Every allowed reflection on the row of `r` that appears on the detector
/// with a wavelength inside the spectrum, with the 2θ range where it does.
///
/// Entries may lie outside `r`'s own window; use [`ReflectionPlan::pure`] or
/// [`Contaminant::overlap_deg`] to decide whether `r` itself is affected.
pub fn contamination(crystal: &CrystalSpec, r: Reflection, w: &SpectrumWindow) -> Result<Vec<Contaminant>> {
    if r.is_origin() {
        return Err(Error::InvalidInput("(000) is not a reflection".into()));
    }
    let m = r.multiplicity() as u32;
    let p = r.primitive();
    let two_d = two_d_spacing(crystal, r);
    let (det_lo, det_hi) = w.detector_lambda_range(two_d);
    // j·p needs λ_fund ≥ λ_min·j/m with λ_fund ≤ 2d·sin θ_max
    let j_max = ((det_hi * m as f64) / w.lambda_min).floor() as u32;
    let mut out = Vec::new();
    for j in 1..=j_max {
        if j == m {
            continue;
        }
        let harmonic = p.scaled(j as i32);
        let class = classify(harmonic);
        if !class.is_allowed() {
            continue;
        }
        let ratio = j as f64 / m as f64;
        let lo = det_lo.max(w.lambda_min * ratio);
        let hi = det_hi.min(w.lambda_max * ratio);
        if hi > lo {
            let g = gcd(j, m);
            out.push(Contaminant {
                reflection: harmonic,
                class,
                order_numerator: j / g,
                order_denominator: m / g,
                lambda: (lo, hi),
                two_theta: (two_theta_for(two_d, lo), two_theta_for(two_d, hi)),
            });
        }
    }
    Ok(out)
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionPlan {
    pub reflection: Reflection,
    pub class: ReflectionClass,
    /// Q/4π, Å⁻¹
    pub q_over_4pi: f64,
    /// Form factor at the reflection.
    pub f: f64,
    pub window: ReflectionWindow,
    /// |F|², fm².
    pub f2_fm2: f64,
    pub contaminants: Vec<Contaminant>,
    /// No contaminant overlaps the reflection's own window.
    pub pure: bool,
}

impl ReflectionPlan {
    /// Contaminants that overlap the plan's own 2θ window.
    pub fn active_contaminants(&self) -> impl Iterator<Item = &Contaminant> {
        self.contaminants
            .iter()
            .filter(move |c| c.overlap_deg(self.window.two_theta) > OVERLAP_EPS_DEG)
    }
}

pub fn plan_reflection(
    crystal: &CrystalSpec,
    model: &ScatteringModel,
    r: Reflection,
    w: &SpectrumWindow,
) -> Result<ReflectionPlan> {
    let class = classify(r);
    if !class.is_allowed() {
        return Err(Error::ForbiddenReflection(r));
    }
    let window = reflection_window(crystal, r, w)?;
    let q = q_over_4pi(crystal, r);
    let f = model.form_factor.f_at(q)?;
    let fmag = structure_factor_magnitude(crystal, model, r)?;
    let contaminants = contamination(crystal, r, w)?;
    let pure = !contaminants
        .iter()
        .any(|c| c.overlap_deg(window.two_theta) > OVERLAP_EPS_DEG);
    Ok(ReflectionPlan {
        reflection: r,
        class,
        q_over_4pi: q,
        f,
        window,
        f2_fm2: fmag * fmag,
        contaminants,
        pure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CandidateBounds {
    /// Candidates are limited to h²+k²+l² ≤ that of this reflection.
    pub highest: Reflection,
}

impl Default for CandidateBounds {
    fn default() -> Self {
        Self {
            highest: Reflection::new(6, 4, 2),
        }
    }
}

/// All canonical allowed reflections up to the bound that are reachable
/// inside the window, pure or not, ordered by Q (ties by indices).
pub fn enumerate_candidates(
    crystal: &CrystalSpec,
    model: &ScatteringModel,
    w: &SpectrumWindow,
    bounds: &CandidateBounds,
) -> Result<Vec<ReflectionPlan>> {
    w.validate()?;
    let n_max = bounds.highest.norm_sq();
    let h_max = (n_max as f64).sqrt().floor() as i32;
    let mut reflections = Vec::new();
    for h in 0..=h_max {
        for k in 0..=h {
            for l in 0..=k {
                let r = Reflection::new(h, k, l);
                if r.is_origin() || r.norm_sq() > n_max || !classify(r).is_allowed() {
                    continue;
                }
                reflections.push(r);
            }
        }
    }
    let mut plans = Vec::new();
    for r in reflections {
        match plan_reflection(crystal, model, r, w) {
            Ok(p) => plans.push(p),
            Err(Error::EmptyWindow(_)) => {}
            Err(e) => return Err(e),
        }
    }
    sort_plans(&mut plans);
    Ok(plans)
}

fn sort_plans(plans: &mut [ReflectionPlan]) {
    plans.sort_by(|a, b| {
        a.reflection
            .norm_sq()
            .cmp(&b.reflection.norm_sq())
            .then_with(|| a.reflection.cmp(&b.reflection))
    });
}

/// Contamination-free reflections, ordered by Q.
pub fn enumerate_pure(
    crystal: &CrystalSpec,
    model: &ScatteringModel,
    w: &SpectrumWindow,
    bounds: &CandidateBounds,
) -> Result<Vec<ReflectionPlan>> {
    Ok(enumerate_candidates(crystal, model, w, bounds)?
        .into_iter()
        .filter(|p| p.pure)
        .collect())
}

/// A crystal blade: its face normal and the reflections usable in Laue
/// transmission through it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blade {
    /// Face normal (primitive direction). The blade is cut parallel to these planes.
    pub normal: Reflection,
    pub members: Vec<Reflection>,
}

/// True when some cubic equivalent of `r` lies in the plane of the blade face.
pub fn fits_blade(normal: Reflection, r: Reflection) -> bool {
    r.cubic_equivalents().iter().any(|e| e.dot(&normal) == 0)
}

pub fn blade_members(normal: Reflection, reflections: &[Reflection]) -> Vec<Reflection> {
    reflections.iter().copied().filter(|&r| fits_blade(normal, r)).collect()
}

/// Low-index face normals tried by [`blade_assignment`], lowest index first.
pub fn candidate_blade_normals() -> Vec<Reflection> {
    let mut out = Vec::new();
    for h in 1..=3 {
        for k in 0..=h {
            for l in 0..=k {
                let r = Reflection::new(h, k, l);
                if r.multiplicity() == 1 {
                    out.push(r);
                }
            }
        }
    }
    out.sort_by(|a, b| a.norm_sq().cmp(&b.norm_sq()).then_with(|| a.cmp(b)));
    out
}

/// Greedy set cover of the planned reflections by blade orientations.
pub fn blade_assignment(plans: &[ReflectionPlan]) -> Result<Vec<Blade>> {
    let reflections: Vec<Reflection> = plans.iter().map(|p| p.reflection).collect();
    blade_cover(&reflections)
}

pub fn blade_cover(reflections: &[Reflection]) -> Result<Vec<Blade>> {
    let normals = candidate_blade_normals();
    let mut remaining: Vec<Reflection> = reflections.to_vec();
    let mut blades = Vec::new();
    while !remaining.is_empty() {
        let best = normals
            .iter()
            .map(|&n| (n, blade_members(n, &remaining)))
            .max_by(|a, b| {
                a.1.len()
                    .cmp(&b.1.len())
                    .then_with(|| b.0.norm_sq().cmp(&a.0.norm_sq()))
                    .then_with(|| b.0.cmp(&a.0))
            })
            .filter(|(_, m)| !m.is_empty())
            .ok_or_else(|| {
                Error::DegenerateGeometry(format!("no low-index blade orientation accommodates {}", remaining[0]))
            })?;
        remaining.retain(|r| !best.1.contains(r));
        blades.push(Blade {
            normal: best.0,
            members: best.1,
        });
    }
    Ok(blades)
}
