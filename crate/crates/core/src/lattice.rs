//! Cubic diamond-structure crystal math: momentum transfer, reflection
//! classes, Debye-Waller attenuation and the Q-dependent scattering length.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formfactor::FormFactorTable;
use crate::quantity::Uncertain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    #[default]
    Diamond,
}

/// Static description of a single crystal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalSpec {
    pub name: String,
    /// Cubic lattice constant, Å.
    pub a0: f64,
    /// Atomic number.
    pub z: u32,
    /// Forward (Q = 0) nuclear scattering length, fm.
    pub b_nuclear: Uncertain,
    /// Debye-Waller temperature factor B, Å².
    pub temperature_factor: Uncertain,
    #[serde(default)]
    pub structure: Structure,
}

impl CrystalSpec {
    pub fn silicon() -> Self {
        Self {
            name: "Si".into(),
            a0: 5.43072,
            z: 14,
            b_nuclear: Uncertain::new(4.1507, 0.0002),
            temperature_factor: Uncertain::new(0.4613, 0.0027),
            structure: Structure::Diamond,
        }
    }

    pub fn germanium() -> Self {
        Self {
            name: "Ge".into(),
            a0: 5.6575,
            z: 32,
            b_nuclear: Uncertain::new(8.1929, 0.0017),
            temperature_factor: Uncertain::new(0.57, 0.01),
            structure: Structure::Diamond,
        }
    }

    /// Built-in crystal by (case-insensitive) element symbol.
    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "si" | "silicon" => Some(Self::silicon()),
            "ge" | "germanium" => Some(Self::germanium()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0 && self.a0.is_finite()) {
            return Err(Error::InvalidInput(format!("a0 must be positive, got {}", self.a0)));
        }
        if self.z == 0 {
            return Err(Error::InvalidInput("atomic number must be at least 1".into()));
        }
        if !(self.temperature_factor.value >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "temperature factor must be non-negative, got {}",
                self.temperature_factor.value
            )));
        }
        if self.b_nuclear.sigma < 0.0 || self.temperature_factor.sigma < 0.0 {
            return Err(Error::InvalidInput("uncertainties must be non-negative".into()));
        }
        Ok(())
    }
}

/// Miller indices of a lattice plane family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Reflection {
    pub h: i32,
    pub k: i32,
    pub l: i32,
}

impl Reflection {
    pub const fn new(h: i32, k: i32, l: i32) -> Self {
        Self { h, k, l }
    }

    /// h² + k² + l².
    pub fn norm_sq(&self) -> i64 {
        let (h, k, l) = (self.h as i64, self.k as i64, self.l as i64);
        h * h + k * k + l * l
    }

    pub fn index_sum(&self) -> i64 {
        self.h as i64 + self.k as i64 + self.l as i64
    }

    pub fn is_origin(&self) -> bool {
        self.h == 0 && self.k == 0 && self.l == 0
    }

    /// Cubic-equivalent representative with h ≥ k ≥ l ≥ 0.
    pub fn canonical(&self) -> Self {
        let mut v = [self.h.abs(), self.k.abs(), self.l.abs()];
        v.sort_unstable_by(|a, b| b.cmp(a));
        Self::new(v[0], v[1], v[2])
    }

    pub fn scaled(&self, n: i32) -> Self {
        Self::new(self.h * n, self.k * n, self.l * n)
    }

    /// Greatest common divisor of the indices (0 for the origin).
    pub fn multiplicity(&self) -> i32 {
        gcd(gcd(self.h.abs(), self.k.abs()), self.l.abs())
    }

    /// Shortest reciprocal-lattice vector on the same row.
    pub fn primitive(&self) -> Self {
        let g = self.multiplicity();
        if g == 0 {
            *self
        } else {
            Self::new(self.h / g, self.k / g, self.l / g)
        }
    }

    pub fn dot(&self, other: &Reflection) -> i64 {
        self.h as i64 * other.h as i64 + self.k as i64 * other.k as i64 + self.l as i64 * other.l as i64
    }

    /// Compact label: `111` when every index is a single non-negative digit,
    /// otherwise space-separated (`12 12 4`, `-1 1 0`).
    pub fn label(&self) -> String {
        let digits = [self.h, self.k, self.l].iter().all(|&i| (0..=9).contains(&i));
        if digits {
            format!("{}{}{}", self.h, self.k, self.l)
        } else {
            format!("{} {} {}", self.h, self.k, self.l)
        }
    }

    /// All 48 signed permutations (duplicates included).
    pub fn cubic_equivalents(&self) -> Vec<Reflection> {
        let base = [self.h, self.k, self.l];
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut out = Vec::with_capacity(48);
        for p in PERMS {
            for signs in 0..8 {
                let s = |bit: i32| if signs & (1 << bit) != 0 { -1 } else { 1 };
                out.push(Reflection::new(s(0) * base[p[0]], s(1) * base[p[1]], s(2) * base[p[2]]));
            }
        }
        out
    }
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for Reflection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.label())
    }
}

impl FromStr for Reflection {
    type Err = Error;

    /// Accepts `111`, `(111)`, `1 1 1`, `1,1,1` and `(12 12 4)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')').trim();
        let bad = || Error::InvalidInput(format!("cannot parse Miller indices from {s:?}"));
        let parts: Vec<&str> = t
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .collect();
        let idx: Vec<i32> = if parts.len() == 3 {
            parts
                .iter()
                .map(|p| p.parse::<i32>().map_err(|_| bad()))
                .collect::<Result<_>>()?
        } else if parts.len() == 1 && t.len() == 3 && t.chars().all(|c| c.is_ascii_digit()) {
            t.chars().map(|c| c.to_digit(10).unwrap() as i32).collect()
        } else {
            return Err(bad());
        };
        Ok(Reflection::new(idx[0], idx[1], idx[2]))
    }
}

/// Diamond-structure reflection class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReflectionClass {
    /// Mixed-parity indices, extinct in the fcc lattice.
    Disallowed,
    /// All even with h+k+l ≡ 2 (mod 4).
    Forbidden,
    /// All odd.
    Weak,
    /// All even with h+k+l ≡ 0 (mod 4).
    Strong,
}

impl ReflectionClass {
    /// |1 + i^(h+k+l)| for the allowed classes, 0 otherwise.
    pub fn phase_magnitude(self) -> f64 {
        match self {
            ReflectionClass::Weak => std::f64::consts::SQRT_2,
            ReflectionClass::Strong => 2.0,
            ReflectionClass::Forbidden | ReflectionClass::Disallowed => 0.0,
        }
    }

    pub fn is_allowed(self) -> bool {
        matches!(self, ReflectionClass::Weak | ReflectionClass::Strong)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReflectionClass::Disallowed => "disallowed",
            ReflectionClass::Forbidden => "forbidden",
            ReflectionClass::Weak => "weak",
            ReflectionClass::Strong => "strong",
        }
    }
}

impl fmt::Display for ReflectionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReflectionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "disallowed" => Ok(Self::Disallowed),
            "forbidden" => Ok(Self::Forbidden),
            "weak" => Ok(Self::Weak),
            "strong" => Ok(Self::Strong),
            other => Err(Error::InvalidInput(format!("unknown reflection class {other:?}"))),
        }
    }
}

pub fn classify(r: Reflection) -> ReflectionClass {
    let parity = |i: i32| i.rem_euclid(2);
    let (ph, pk, pl) = (parity(r.h), parity(r.k), parity(r.l));
    if ph != pk || pk != pl {
        return ReflectionClass::Disallowed;
    }
    if ph == 1 {
        return ReflectionClass::Weak;
    }
    if r.index_sum().rem_euclid(4) == 0 {
        ReflectionClass::Strong
    } else {
        ReflectionClass::Forbidden
    }
}

/// Q/4π = √(h²+k²+l²)/(2a0) = sin θ / λ, in Å⁻¹.
pub fn q_over_4pi(crystal: &CrystalSpec, r: Reflection) -> f64 {
    (r.norm_sq() as f64).sqrt() / (2.0 * crystal.a0)
}

/// exp[−B (Q/4π)²].
pub fn debye_waller(b_factor: f64, q_over_4pi: f64) -> f64 {
    (-b_factor * q_over_4pi * q_over_4pi).exp()
}

/// How the temperature-factor uncertainty is combined with the measurement
/// uncertainty when correcting a measured scattering length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorCombination {
    /// σ_b = σ_meas/DW + b·(Q/4π)²·σ_B.
    #[default]
    Linear,
    /// σ_b = √[(σ_meas/DW)² + (b·(Q/4π)²·σ_B)²].
    Quadrature,
}

impl ErrorCombination {
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            ErrorCombination::Linear => a.abs() + b.abs(),
            ErrorCombination::Quadrature => a.hypot(b),
        }
    }
}

/// Inverse of the Debye-Waller attenuation.
pub fn b_from_b_meas(b_meas: f64, b_factor: f64, q_over_4pi: f64) -> f64 {
    b_meas / debye_waller(b_factor, q_over_4pi)
}

/// Debye-Waller correction with error propagation from both the measurement
/// and the temperature factor.
pub fn b_from_b_meas_uncertain(
    b_meas: Uncertain,
    b_factor: Uncertain,
    q_over_4pi: f64,
    combination: ErrorCombination,
) -> Uncertain {
    let dw = debye_waller(b_factor.value, q_over_4pi);
    let b = b_meas.value / dw;
    let from_meas = b_meas.sigma / dw;
    let from_b = b * q_over_4pi * q_over_4pi * b_factor.sigma;
    Uncertain::new(b, combination.combine(from_meas, from_b))
}

/// The Q-dependent coherent scattering length
/// b(Q) = b_nuclear − b_ne·Z·[1 − f(Q)].
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringModel {
    /// fm
    pub b_nuclear: f64,
    /// fm
    pub b_ne: f64,
    pub z: u32,
    /// Å²
    pub temperature_factor: f64,
    pub form_factor: FormFactorTable,
}

impl ScatteringModel {
    pub fn new(crystal: &CrystalSpec, b_ne: f64, form_factor: FormFactorTable) -> Self {
        Self {
            b_nuclear: crystal.b_nuclear.value,
            b_ne,
            z: crystal.z,
            temperature_factor: crystal.temperature_factor.value,
            form_factor,
        }
    }

    /// Model for a built-in crystal using its built-in form-factor table.
    pub fn builtin(crystal: &CrystalSpec, b_ne: f64) -> Result<Self> {
        let table = FormFactorTable::builtin(&crystal.name)
            .ok_or_else(|| Error::InvalidInput(format!("no built-in form-factor table for {}", crystal.name)))?;
        Ok(Self::new(crystal, b_ne, table))
    }

    pub fn with_b_ne(mut self, b_ne: f64) -> Self {
        self.b_ne = b_ne;
        self
    }

    /// b(Q) for a known form-factor value.
    pub fn b_with_form_factor(&self, f: f64) -> f64 {
        self.b_nuclear - self.b_ne * self.z as f64 * (1.0 - f)
    }
}

pub fn b_of_q(m: &ScatteringModel, q_over_4pi: f64) -> Result<f64> {
    let f = m.form_factor.f_at(q_over_4pi)?;
    Ok(m.b_with_form_factor(f))
}

pub fn b_meas(m: &ScatteringModel, q_over_4pi: f64) -> Result<f64> {
    Ok(b_of_q(m, q_over_4pi)? * debye_waller(m.temperature_factor, q_over_4pi))
}

/// |F| = 4·|1 + i^(h+k+l)|·b_meas, in fm.
pub fn structure_factor_from_b_meas(class: ReflectionClass, b_meas: f64) -> f64 {
    4.0 * class.phase_magnitude() * b_meas
}

pub fn structure_factor_magnitude(crystal: &CrystalSpec, m: &ScatteringModel, r: Reflection) -> Result<f64> {
    let class = classify(r);
    if !class.is_allowed() {
        return Ok(0.0);
    }
    let bm = b_meas(m, q_over_4pi(crystal, r))?;
    Ok(structure_factor_from_b_meas(class, bm))
}
