//! Centre-of-pattern Pendellösung intensity for a flat blade with narrow
//! slits, I(λ) ∝ I₀(λ)·λ²·|F|²·J₀²(t·|F|·λ / (a0³·cos θ)).

mod bessel;

pub use bessel::{bessel_j0, bessel_j0_zero};

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{classify, structure_factor_magnitude, CrystalSpec, Reflection, ScatteringModel};
use crate::planner::{bragg_angle, reflection_window, ReflectionWindow, SpectrumWindow};
use crate::units::{cm_to_angstrom, fm_to_angstrom};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BladeGeometry {
    /// Blade thickness, cm.
    pub thickness_cm: f64,
    /// Orientation of the blade faces, informational.
    pub cut_plane: Option<Reflection>,
}

impl Default for BladeGeometry {
    fn default() -> Self {
        Self {
            thickness_cm: 1.0,
            cut_plane: None,
        }
    }
}

impl BladeGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.thickness_cm > 0.0 && self.thickness_cm.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "blade thickness must be positive, got {} cm",
                self.thickness_cm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum SpectrumShape {
    #[default]
    Flat,
    /// Thermal flux per unit wavelength, ∝ λ⁻⁵·exp(−λ_T²/λ²), peaking at `peak` Å.
    Maxwellian { peak: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BeamSpectrum {
    pub shape: SpectrumShape,
    pub window: SpectrumWindow,
}

impl BeamSpectrum {
    /// Relative incident intensity I₀(λ); 1 at the Maxwellian peak.
    pub fn intensity(&self, lambda: f64) -> f64 {
        match self.shape {
            SpectrumShape::Flat => 1.0,
            SpectrumShape::Maxwellian { peak } => {
                // peak at λ_T·√(2/5)
                let u = peak / lambda;
                u.powi(5) * (2.5 * (1.0 - u * u)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeSample {
    /// Å
    pub lambda: f64,
    /// degrees
    pub two_theta: f64,
    /// radians
    pub argument: f64,
    /// normalized to a maximum of 1
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeProfile {
    pub reflection: Reflection,
    pub thickness_cm: f64,
    pub samples: Vec<FringeSample>,
}

/// |F| in fm, rejecting reflections with a vanishing structure factor.
fn allowed_structure_factor(crystal: &CrystalSpec, model: &ScatteringModel, r: Reflection) -> Result<f64> {
    if !classify(r).is_allowed() || r.is_origin() {
        return Err(Error::ForbiddenReflection(r));
    }
    structure_factor_magnitude(crystal, model, r)
}

/// t·|F|·λ / (a0³·cos θ) with all lengths in Å.
fn argument_with(crystal: &CrystalSpec, r: Reflection, f_mag_fm: f64, thickness_cm: f64, lambda: f64) -> Result<f64> {
    let theta = bragg_angle(crystal, r, lambda)?;
    let cos_theta = theta.to_radians().cos();
    if !(cos_theta > 0.0) {
        return Err(Error::DegenerateGeometry(format!("{r} at grazing exit (θ = 90°)")));
    }
    Ok(cm_to_angstrom(thickness_cm) * fm_to_angstrom(f_mag_fm) * lambda / (crystal.a0.powi(3) * cos_theta))
}

pub fn pendellosung_argument(
    crystal: &CrystalSpec,
    model: &ScatteringModel,
    r: Reflection,
    geom: &BladeGeometry,
    lambda: f64,
) -> Result<f64> {
    let f_mag = allowed_structure_factor(crystal, model, r)?;
    argument_with(crystal, r, f_mag, geom.thickness_cm, lambda)
}

pub fn intensity_profile(
    spectrum: &BeamSpectrum,
    crystal: &CrystalSpec,
    model: &ScatteringModel,
    r: Reflection,
    geom: &BladeGeometry,
    n_samples: usize,
) -> Result<FringeProfile> {
    if n_samples < 2 {
        return Err(Error::InvalidInput("at least two samples are required".into()));
    }
    geom.validate()?;
    let f_mag = allowed_structure_factor(crystal, model, r)?;
    let win = reflection_window(crystal, r, &spectrum.window)?;
    let (lo, hi) = win.lambda;
    let raw: Vec<FringeSample> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let lambda = if i == n_samples - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n_samples - 1) as f64
            };
            let argument = argument_with(crystal, r, f_mag, geom.thickness_cm, lambda)?;
            let j0 = bessel_j0(argument);
            let theta = bragg_angle(crystal, r, lambda)?;
            Ok(FringeSample {
                lambda,
                two_theta: 2.0 * theta,
                argument,
                intensity: spectrum.intensity(lambda) * lambda * lambda * f_mag * f_mag * j0 * j0,
            })
        })
        .collect::<Result<_>>()?;
    let peak = raw.iter().map(|s| s.intensity).fold(0.0, f64::max);
    let samples = raw
        .into_iter()
        .map(|s| FringeSample {
            intensity: if peak > 0.0 { s.intensity / peak } else { 0.0 },
            ..s
        })
        .collect();
    Ok(FringeProfile {
        reflection: r,
        thickness_cm: geom.thickness_cm,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeCount {
    pub window: ReflectionWindow,
    pub argument_range: (f64, f64),
    /// Δarg/(2π), rounded.
    pub periods: u64,
    /// Δarg/π, rounded: intensity maxima of J₀².
    pub maxima: u64,
    /// Zeros of J₀ strictly inside the argument range.
    pub zeros: usize,
}

impl FringeCount {
    pub fn delta_argument(&self) -> f64 {
        self.argument_range.1 - self.argument_range.0
    }
}

/// Number of monotonicity probes along the window.
const MONOTONE_PROBES: usize = 64;

pub fn fringe_count(
    crystal: &CrystalSpec,
    model: &ScatteringModel,
    r: Reflection,
    geom: &BladeGeometry,
    window: &SpectrumWindow,
) -> Result<FringeCount> {
    geom.validate()?;
    let f_mag = allowed_structure_factor(crystal, model, r)?;
    let win = reflection_window(crystal, r, window)?;
    let (lo, hi) = win.lambda;
    let arg = |l: f64| argument_with(crystal, r, f_mag, geom.thickness_cm, l);
    let mut prev = arg(lo)?;
    for i in 1..=MONOTONE_PROBES {
        let a = arg(lo + (hi - lo) * i as f64 / MONOTONE_PROBES as f64)?;
        if !(a > prev) {
            return Err(Error::DegenerateGeometry(format!(
                "Pendellösung argument of {r} is not increasing in λ"
            )));
        }
        prev = a;
    }
    let (a_lo, a_hi) = (arg(lo)?, arg(hi)?);
    let delta = a_hi - a_lo;
    Ok(FringeCount {
        window: win,
        argument_range: (a_lo, a_hi),
        periods: (delta / (2.0 * PI)).round() as u64,
        maxima: (delta / PI).round() as u64,
        zeros: j0_zeros_between(a_lo, a_hi).len(),
    })
}

/// Zeros of J₀ in the open interval (lo, hi).
pub fn j0_zeros_between(lo: f64, hi: f64) -> Vec<f64> {
    // j_{0,k} ≈ (k − 1/4)π
    let mut k = ((lo / PI + 0.25).floor() as usize).saturating_sub(1).max(1);
    let mut out = Vec::new();
    loop {
        let z = bessel_j0_zero(k);
        if z >= hi {
            break;
        }
        if z > lo {
            out.push(z);
        }
        k += 1;
    }
    out
}

/// Wavelengths inside the reflection window where the intensity vanishes.
pub fn intensity_zero_wavelengths(
    crystal: &CrystalSpec,
    model: &ScatteringModel,
    r: Reflection,
    geom: &BladeGeometry,
    window: &SpectrumWindow,
) -> Result<Vec<f64>> {
    let count = fringe_count(crystal, model, r, geom, window)?;
    let f_mag = allowed_structure_factor(crystal, model, r)?;
    let (lo, hi) = count.window.lambda;
    let arg = |l: f64| argument_with(crystal, r, f_mag, geom.thickness_cm, l);
    j0_zeros_between(count.argument_range.0, count.argument_range.1)
        .into_iter()
        .map(|target| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if arg(mid)? < target {
                    a = mid;
                } else {
                    b = mid;
                }
                if b - a < 1e-15 * b {
                    break;
                }
            }
            Ok(0.5 * (a + b))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{b_meas, q_over_4pi, ReflectionClass};

    fn si(b_ne: f64) -> (CrystalSpec, ScatteringModel) {
        let c = CrystalSpec::silicon();
        let m = ScatteringModel::builtin(&c, b_ne).unwrap();
        (c, m)
    }

    fn r(s: &str) -> Reflection {
        s.parse().unwrap()
    }

    #[test]
    fn argument_value_for_111() {
        let (c, m) = si(-1.31e-3);
        let g = BladeGeometry::default();
        let a = pendellosung_argument(&c, &m, r("111"), &g, 0.8).unwrap();
        // direct evaluation: 1e8 Å · |F|·1e-5 Å · 0.8 Å / (a0³ cos θ)
        let bm = b_meas(&m, q_over_4pi(&c, r("111"))).unwrap();
        let f = 4.0 * ReflectionClass::Weak.phase_magnitude() * bm;
        assert!((f - 23.2).abs() < 0.1);
        let cos = (0.8 * q_over_4pi(&c, r("111"))).asin().cos();
        let direct = 1e8 * f * 1e-5 * 0.8 / (5.43072f64.powi(3) * cos);
        assert!((a - direct).abs() < 1e-9 * direct);
        assert!((a - 117.0).abs() < 1.0, "{a}");
    }

    #[test]
    fn argument_is_linear_in_thickness() {
        let (c, m) = si(-1.31e-3);
        let a1 = pendellosung_argument(
            &c,
            &m,
            r("422"),
            &BladeGeometry {
                thickness_cm: 1.0,
                cut_plane: None,
            },
            1.1,
        )
        .unwrap();
        let a2 = pendellosung_argument(
            &c,
            &m,
            r("422"),
            &BladeGeometry {
                thickness_cm: 2.0,
                cut_plane: None,
            },
            1.1,
        )
        .unwrap();
        let a0 = pendellosung_argument(
            &c,
            &m,
            r("422"),
            &BladeGeometry {
                thickness_cm: 1e-12,
                cut_plane: None,
            },
            1.1,
        )
        .unwrap();
        assert!((a2 - 2.0 * a1).abs() < 1e-12 * a2);
        assert!(a0 < 1e-9);
    }

    #[test]
    fn forbidden_and_unreachable() {
        let (c, m) = si(-1.31e-3);
        let g = BladeGeometry::default();
        assert!(matches!(
            pendellosung_argument(&c, &m, r("222"), &g, 1.0),
            Err(Error::ForbiddenReflection(_))
        ));
        assert!(matches!(
            pendellosung_argument(&c, &m, r("111"), &g, 7.0),
            Err(Error::NoReflection { .. })
        ));
    }

    #[test]
    fn counts_for_111_and_711() {
        let (c, m) = si(-1.31e-3);
        let g = BladeGeometry::default();
        let full = SpectrumWindow::default();
        let n111 = fringe_count(&c, &m, r("111"), &g, &full).unwrap();
        assert!((38..=46).contains(&n111.periods), "{n111:?}");
        let n711 = fringe_count(&c, &m, r("711"), &g, &full).unwrap();
        assert!((38..=50).contains(&n711.maxima), "{n711:?}");
        assert!((20..=28).contains(&n711.periods), "{n711:?}");
        assert!(n711.zeros.abs_diff(n711.maxima as usize) <= 1);
    }

    #[test]
    fn thin_blade_has_at_most_one_fringe() {
        let (c, m) = si(-1.31e-3);
        let g = BladeGeometry {
            thickness_cm: 0.005,
            cut_plane: None,
        };
        let n = fringe_count(&c, &m, r("111"), &g, &SpectrumWindow::default()).unwrap();
        assert!(n.delta_argument() < 2.0 * PI);
        assert!(n.periods <= 1);
    }

    #[test]
    fn profile_zeros_and_normalization() {
        let (c, m) = si(-1.31e-3);
        let g = BladeGeometry::default();
        let spectrum = BeamSpectrum::default();
        let p = intensity_profile(&spectrum, &c, &m, r("531"), &g, 4001).unwrap();
        let max = p.samples.iter().map(|s| s.intensity).fold(0.0, f64::max);
        assert_eq!(max, 1.0);
        assert!(p.samples.windows(2).all(|w| w[1].lambda > w[0].lambda));
        assert!(p.samples.iter().all(|s| s.intensity >= 0.0));

        let zeros = intensity_zero_wavelengths(&c, &m, r("531"), &g, &spectrum.window).unwrap();
        for &lz in &zeros {
            let a = pendellosung_argument(&c, &m, r("531"), &g, lz).unwrap();
            // I/(I₀λ²|F|²) = J₀²
            assert!(bessel_j0(a).powi(2) < 1e-24, "{lz}");
        }
        // sign changes of J0 along the dense profile equal the zero count
        let signs = p
            .samples
            .windows(2)
            .filter(|w| bessel_j0(w[0].argument).signum() != bessel_j0(w[1].argument).signum())
            .count();
        assert_eq!(signs, zeros.len());
    }

    #[test]
    fn maxwellian_peaks_at_requested_wavelength() {
        let s = BeamSpectrum {
            shape: SpectrumShape::Maxwellian { peak: 1.2 },
            window: SpectrumWindow::default(),
        };
        assert!((s.intensity(1.2) - 1.0).abs() < 1e-15);
        assert!(s.intensity(1.19) < 1.0 && s.intensity(1.21) < 1.0);
    }

    #[test]
    fn electrostatic_term_shifts_fringes() {
        let (c, m) = si(-1.31e-3);
        let m0 = m.clone().with_b_ne(0.0);
        let g = BladeGeometry::default();
        let w = SpectrumWindow::default();
        let z1 = intensity_zero_wavelengths(&c, &m, r("711"), &g, &w).unwrap();
        let z0 = intensity_zero_wavelengths(&c, &m0, r("711"), &g, &w).unwrap();
        // b(Q) grows with the electron term, so zeros move to shorter λ
        let shift = z1.iter().zip(&z0).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
        assert!(shift > 1e-6, "{shift}");
    }

    #[test]
    fn zero_shift_follows_first_order_sensitivity() {
        let (c, m) = si(-1.31e-3);
        let g = BladeGeometry::default();
        let w = SpectrumWindow::default();
        let eps = 2e-4;
        let mut scaled = m.clone();
        scaled.b_nuclear *= 1.0 + eps;
        let refl = r("422");
        let base = intensity_zero_wavelengths(&c, &m, refl, &g, &w).unwrap();
        let moved = intensity_zero_wavelengths(&c, &scaled, refl, &g, &w).unwrap();
        let q = q_over_4pi(&c, refl);
        // relative change in |F| from scaling b_nuclear
        let rel_f = eps * m.b_nuclear / crate::lattice::b_of_q(&m, q).unwrap();
        let mut compared = 0;
        for (l0, l1) in base.iter().zip(&moved) {
            let h = 1e-6;
            let a = |l: f64| pendellosung_argument(&c, &m, refl, &g, l).unwrap();
            let slope = (a(l0 + h) - a(l0 - h)) / (2.0 * h);
            let predicted = -rel_f * a(*l0) / slope;
            assert!(
                ((l1 - l0) - predicted).abs() < 0.01 * predicted.abs(),
                "{l0}: {} vs {predicted}",
                l1 - l0
            );
            compared += 1;
        }
        assert!(compared > 20);
    }

    #[test]
    fn profile_is_reproducible() {
        let (c, m) = si(-1.31e-3);
        let s = BeamSpectrum {
            shape: SpectrumShape::Maxwellian { peak: 1.2 },
            window: SpectrumWindow::default(),
        };
        let a = intensity_profile(&s, &c, &m, r("111"), &BladeGeometry::default(), 777).unwrap();
        let b = intensity_profile(&s, &c, &m, r("111"), &BladeGeometry::default(), 777).unwrap();
        assert_eq!(a, b);
    }
}
