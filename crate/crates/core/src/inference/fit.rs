//! Extraction of B and b_ne from measured scattering lengths.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::wls::{fit_line, fit_proportional, invert_normal, solve_weighted};
use crate::error::{Error, Result};
use crate::formfactor::FormFactorTable;
use crate::lattice::{b_from_b_meas_uncertain, classify, q_over_4pi, CrystalSpec, ErrorCombination, Reflection};
use crate::quantity::Uncertain;

/// Default one-sigma uncertainty of a measured scattering length, fm.
pub const DEFAULT_SIGMA_FM: f64 = 0.0008;

/// A measured Debye-Waller-attenuated scattering length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub reflection: Reflection,
    /// fm
    pub b_meas: f64,
    /// fm
    pub sigma: f64,
}

impl Measurement {
    pub fn new(reflection: Reflection, b_meas: f64, sigma: f64) -> Self {
        Self {
            reflection,
            b_meas,
            sigma,
        }
    }
}

/// How the forward-scattering (Q = 0) value b_nuclear enters a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterceptMode {
    /// Held at the known value.
    Fixed,
    /// Fitted from the Bragg data alone.
    Free,
    /// Fitted, with the known value as an additional datum.
    #[default]
    Prior,
}

impl std::str::FromStr for InterceptMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(Self::Fixed),
            "free" => Ok(Self::Free),
            "prior" | "forward" => Ok(Self::Prior),
            _ => Err(Error::InvalidInput(format!("unknown intercept mode '{s}'"))),
        }
    }
}

struct Point {
    q: f64,
    u: f64,
    m: Measurement,
}

fn points(crystal: &CrystalSpec, table: &FormFactorTable, ms: &[Measurement]) -> Result<Vec<Point>> {
    ms.iter()
        .map(|m| {
            if !classify(m.reflection).is_allowed() {
                return Err(Error::ForbiddenReflection(m.reflection));
            }
            if !(m.sigma > 0.0 && m.sigma.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "σ for {} must be positive, got {}",
                    m.reflection, m.sigma
                )));
            }
            if !(m.b_meas > 0.0 && m.b_meas.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "b_meas for {} must be positive, got {}",
                    m.reflection, m.b_meas
                )));
            }
            let q = q_over_4pi(crystal, m.reflection);
            let f = table.f_at(q)?;
            Ok(Point { q, u: 1.0 - f, m: *m })
        })
        .collect()
}

fn require_data(ms: &[Measurement]) -> Result<()> {
    if ms.is_empty() {
        return Err(Error::InsufficientData("no measurements".into()));
    }
    Ok(())
}

/// b_ne from one Debye-Waller-corrected scattering length:
/// b_ne = (b_nuclear − b(Q)) / (Z·(1 − f)).
pub fn extract_bne_single(b_q: Uncertain, b_nuclear: Uncertain, z: u32, f: f64) -> Result<Uncertain> {
    let lever = z as f64 * (1.0 - f);
    if !(lever > 0.0) || !lever.is_finite() {
        return Err(Error::DegenerateGeometry(format!(
            "Z·(1 − f) = {lever}: no electronic contribution at this momentum transfer"
        )));
    }
    Ok(Uncertain::new(
        (b_nuclear.value - b_q.value) / lever,
        b_nuclear.sigma.hypot(b_q.sigma) / lever,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFit {
    /// Å²
    pub b_factor: Uncertain,
    /// Fitted or fixed ln b_nuclear.
    pub ln_b_nuclear: Uncertain,
    pub chi2: f64,
    pub dof: usize,
}

/// B from the slope of ln b_meas against (Q/4π)².
pub fn fit_temperature_factor(
    crystal: &CrystalSpec,
    ms: &[Measurement],
    b_nuclear: Uncertain,
    mode: InterceptMode,
) -> Result<TemperatureFit> {
    require_data(ms)?;
    let mut xs = Vec::with_capacity(ms.len() + 1);
    let mut ys = Vec::with_capacity(ms.len() + 1);
    let mut sig = Vec::with_capacity(ms.len() + 1);
    for m in ms {
        if !(m.b_meas > 0.0) {
            return Err(Error::InvalidInput(format!(
                "b_meas for {} must be positive",
                m.reflection
            )));
        }
        let q = q_over_4pi(crystal, m.reflection);
        xs.push(q * q);
        ys.push(m.b_meas.ln());
        sig.push(m.sigma / m.b_meas);
    }
    let ln_b0 = b_nuclear.value.ln();
    let mode = effective_mode(mode, b_nuclear);
    match mode {
        InterceptMode::Fixed => {
            let shifted: Vec<f64> = ys.iter().map(|y| y - ln_b0).collect();
            let (slope, sigma, chi2) = fit_proportional(&xs, &shifted, &sig)?;
            Ok(TemperatureFit {
                b_factor: Uncertain::new(-slope, sigma),
                ln_b_nuclear: Uncertain::exact(ln_b0),
                chi2,
                dof: xs.len() - 1,
            })
        }
        InterceptMode::Free | InterceptMode::Prior => {
            if mode == InterceptMode::Prior {
                xs.push(0.0);
                ys.push(ln_b0);
                sig.push(b_nuclear.sigma / b_nuclear.value);
            }
            let line = fit_line(&xs, &ys, &sig)?;
            Ok(TemperatureFit {
                b_factor: Uncertain::new(-line.slope, line.slope_sigma()),
                ln_b_nuclear: Uncertain::new(line.intercept, line.intercept_sigma()),
                chi2: line.chi2,
                dof: line.dof,
            })
        }
    }
}

// A prior with zero width is a fixed intercept.
fn effective_mode(mode: InterceptMode, b_nuclear: Uncertain) -> InterceptMode {
    if mode == InterceptMode::Prior && b_nuclear.sigma == 0.0 {
        InterceptMode::Fixed
    } else {
        mode
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BneOptions {
    pub intercept: InterceptMode,
    pub combination: ErrorCombination,
}

impl Default for BneOptions {
    fn default() -> Self {
        Self {
            intercept: InterceptMode::Prior,
            combination: ErrorCombination::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BneFit {
    /// fm
    pub b_ne: Uncertain,
    /// Intercept of the b-versus-(1 − f) line, fm.
    pub b_nuclear: Uncertain,
    pub chi2: f64,
    pub dof: usize,
}

/// b_ne from the slope of the Debye-Waller-corrected b against 1 − f,
/// with B (and its uncertainty) taken as known.
pub fn fit_bne(
    crystal: &CrystalSpec,
    table: &FormFactorTable,
    ms: &[Measurement],
    b_nuclear: Uncertain,
    b_factor: Uncertain,
    options: &BneOptions,
) -> Result<BneFit> {
    require_data(ms)?;
    let pts = points(crystal, table, ms)?;
    let z = crystal.z as f64;
    let mut xs = Vec::with_capacity(pts.len() + 1);
    let mut ys = Vec::with_capacity(pts.len() + 1);
    let mut sig = Vec::with_capacity(pts.len() + 1);
    for p in &pts {
        let b = b_from_b_meas_uncertain(
            Uncertain::new(p.m.b_meas, p.m.sigma),
            b_factor,
            p.q,
            options.combination,
        );
        xs.push(p.u);
        ys.push(b.value);
        sig.push(b.sigma);
    }
    let mode = effective_mode(options.intercept, b_nuclear);
    match mode {
        InterceptMode::Fixed => {
            let shifted: Vec<f64> = ys.iter().map(|y| y - b_nuclear.value).collect();
            let (slope, sigma, chi2) = fit_proportional(&xs, &shifted, &sig)?;
            Ok(BneFit {
                b_ne: Uncertain::new(-slope / z, sigma / z),
                b_nuclear: Uncertain::exact(b_nuclear.value),
                chi2,
                dof: xs.len() - 1,
            })
        }
        InterceptMode::Free | InterceptMode::Prior => {
            if mode == InterceptMode::Prior {
                xs.push(0.0);
                ys.push(b_nuclear.value);
                sig.push(b_nuclear.sigma);
            }
            let line = fit_line(&xs, &ys, &sig)?;
            Ok(BneFit {
                b_ne: Uncertain::new(-line.slope / z, line.slope_sigma() / z),
                b_nuclear: Uncertain::new(line.intercept, line.intercept_sigma()),
                chi2: line.chi2,
                dof: line.dof,
            })
        }
    }
}

pub const PARAMETER_NAMES: [&str; 3] = ["B", "b_ne", "b_nuclear"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointOptions {
    pub intercept: InterceptMode,
    /// Hold B at this value instead of fitting it.
    pub fixed_b_factor: Option<f64>,
    pub max_iterations: usize,
    /// Relative step size at which the iteration stops.
    pub tolerance: f64,
}

impl Default for JointOptions {
    fn default() -> Self {
        Self {
            intercept: InterceptMode::Prior,
            fixed_b_factor: None,
            max_iterations: 50,
            tolerance: 1e-14,
        }
    }
}

/// Result of the joint fit over the free subset of (B, b_ne, b_nuclear).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Row-major, same order as `names`.
    pub covariance: Vec<Vec<f64>>,
    /// Values from the linearized (logarithmic) fit used as the starting point.
    pub linearized: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn parameter(&self, name: &str) -> Option<Uncertain> {
        self.index(name)
            .map(|i| Uncertain::new(self.values[i], self.covariance[i][i].max(0.0).sqrt()))
    }

    pub fn correlation(&self, a: &str, b: &str) -> Option<f64> {
        let (i, j) = (self.index(a)?, self.index(b)?);
        let c = &self.covariance;
        Some(c[i][j] / (c[i][i] * c[j][j]).sqrt())
    }
}

#[derive(Clone, Copy)]
struct Layout {
    fit_b: bool,
    fit_b0: bool,
    prior: bool,
}

impl Layout {
    fn names(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.fit_b {
            v.push(PARAMETER_NAMES[0].to_string());
        }
        v.push(PARAMETER_NAMES[1].to_string());
        if self.fit_b0 {
            v.push(PARAMETER_NAMES[2].to_string());
        }
        v
    }
}

/// Simultaneous fit of b_meas = (b_nuclear − b_ne·Z·(1 − f))·exp(−B·(Q/4π)²).
///
/// A weighted fit of ln b_meas (linear in the parameters once b_ne·Z/b_nuclear
/// is treated as small) provides the start; Gauss-Newton on the exact model
/// refines it.
pub fn joint_fit(
    crystal: &CrystalSpec,
    table: &FormFactorTable,
    ms: &[Measurement],
    b_nuclear: Uncertain,
    options: &JointOptions,
) -> Result<FitResult> {
    require_data(ms)?;
    let pts = points(crystal, table, ms)?;
    let mode = effective_mode(options.intercept, b_nuclear);
    let layout = Layout {
        fit_b: options.fixed_b_factor.is_none(),
        fit_b0: mode != InterceptMode::Fixed,
        prior: mode == InterceptMode::Prior,
    };
    let n_par = layout.fit_b as usize + 1 + layout.fit_b0 as usize;
    let n_data = pts.len() + layout.prior as usize;
    if n_data < n_par {
        return Err(Error::InsufficientData(format!(
            "{n_data} data for {n_par} free parameters"
        )));
    }
    let z = crystal.z as f64;
    let b_ref = b_nuclear.value;

    // linearized start
    let mut a = DMatrix::zeros(n_data, n_par);
    let mut y = DVector::zeros(n_data);
    let mut s = DVector::zeros(n_data);
    for (i, p) in pts.iter().enumerate() {
        let q2 = p.q * p.q;
        let mut col = 0;
        let mut yi = p.m.b_meas.ln();
        if layout.fit_b {
            a[(i, col)] = -q2;
            col += 1;
        } else {
            yi += options.fixed_b_factor.unwrap() * q2;
        }
        a[(i, col)] = -z * p.u / b_ref;
        col += 1;
        if layout.fit_b0 {
            a[(i, col)] = 1.0;
        } else {
            yi -= b_ref.ln();
        }
        y[i] = yi;
        s[i] = p.m.sigma / p.m.b_meas;
    }
    if layout.prior {
        let i = pts.len();
        a[(i, n_par - 1)] = 1.0;
        y[i] = b_ref.ln();
        s[i] = b_nuclear.sigma / b_ref;
    }
    let lin = solve_weighted(&a, &y, &s)?;
    let mut theta: Vec<f64> = lin.params.iter().copied().collect();
    if layout.fit_b0 {
        theta[n_par - 1] = theta[n_par - 1].exp();
    }
    let linearized = theta.clone();

    let unpack = |t: &[f64]| -> (f64, f64, f64) {
        let mut k = 0;
        let bf = if layout.fit_b {
            k += 1;
            t[0]
        } else {
            options.fixed_b_factor.unwrap()
        };
        let bne = t[k];
        let b0 = if layout.fit_b0 { t[k + 1] } else { b_ref };
        (bf, bne, b0)
    };

    // weighted residuals and Jacobian of the model
    let system = |t: &[f64]| -> (DMatrix<f64>, DVector<f64>) {
        let (bf, bne, b0) = unpack(t);
        let mut jac = DMatrix::zeros(n_data, n_par);
        let mut r = DVector::zeros(n_data);
        for (i, p) in pts.iter().enumerate() {
            let q2 = p.q * p.q;
            let dw = (-bf * q2).exp();
            let model = (b0 - bne * z * p.u) * dw;
            let w = 1.0 / p.m.sigma;
            r[i] = (p.m.b_meas - model) * w;
            let mut col = 0;
            if layout.fit_b {
                jac[(i, col)] = -q2 * model * w;
                col += 1;
            }
            jac[(i, col)] = -z * p.u * dw * w;
            col += 1;
            if layout.fit_b0 {
                jac[(i, col)] = dw * w;
            }
        }
        if layout.prior {
            let i = pts.len();
            let w = 1.0 / b_nuclear.sigma;
            r[i] = (b_ref - b0) * w;
            jac[(i, n_par - 1)] = w;
        }
        (jac, r)
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        let (jac, r) = system(&theta);
        let cov = invert_normal(&(jac.transpose() * &jac))?;
        let step = &cov * (jac.transpose() * &r);
        iterations += 1;
        let mut rel: f64 = 0.0;
        for k in 0..n_par {
            theta[k] += step[k];
            let scale = theta[k].abs().max(cov[(k, k)].sqrt());
            rel = rel.max(step[k].abs() / scale);
        }
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularDesign("Gauss-Newton iteration diverged".into()));
        }
        if rel <= options.tolerance {
            converged = true;
            break;
        }
    }
    let (jac, r) = system(&theta);
    let cov = invert_normal(&(jac.transpose() * &jac))?;
    let covariance = (0..n_par).map(|i| (0..n_par).map(|j| cov[(i, j)]).collect()).collect();
    Ok(FitResult {
        names: layout.names(),
        values: theta,
        covariance,
        linearized,
        chi2: r.norm_squared(),
        dof: n_data - n_par,
        iterations,
        converged,
    })
}
