//! Run configuration (TOML).
//!
//! Every section and key is optional; omitted values take the defaults of
//! the corresponding library types. Unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//!
//! [crystal]
//! name = "Si"                   # built-in "Si"/"Ge", or a custom name
//! # a0 = 5.43072                # overrides; required for custom crystals
//! # z = 14
//! # b_nuclear = 4.1507
//! # b_nuclear_sigma = 0.0002
//! # temperature_factor = 0.4613
//! # temperature_factor_sigma = 0.0027
//! # form_factor_csv = "si_f.csv"
//!
//! [spectrum]
//! lambda_min = 0.8
//! lambda_max = 2.5
//! lambda_peak = 1.2
//! two_theta_min = 15.0
//! two_theta_max = 110.0
//! shape = "flat"                # or "maxwellian" (peaks at lambda_peak)
//!
//! [blade]
//! thickness_cm = 1.0
//!
//! [model]
//! b_ne = "argonne"              # fm, or "theory" / "argonne" / "dubna"
//!
//! [fit]
//! forward = true                # forward b_nuclear datum as a prior
//! free_intercept = false        # without the forward datum: fit or fix b_nuclear
//! combination = "linear"        # or "quadrature"
//! sigma = 0.0008                # fm, default per-measurement σ
//!
//! [design]
//! # reflections = ["422", "620", "642"]   # default: the pure plan
//! noise = "constant"            # or "temperature" (σ from sigma_b_factor)
//! sigma_b_factor = 0.0027
//!
//! [plan]
//! all = false                   # include contaminated reflections
//! highest = "642"
//!
//! [simulate]
//! points = 2001
//!
//! [mc]
//! trials = 1000
//!
//! [constants]
//! alpha = 7.2973525693e-3
//! neutron_mass_mev = 939.56542052
//! hbar_c_mev_fm = 197.3269804
//!
//! [output]
//! # dir = "out"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::formfactor::FormFactorTable;
use crate::fringes::{BeamSpectrum, BladeGeometry, SpectrumShape};
use crate::inference::{
    reference_bne, BneOptions, BudgetOptions, InterceptMode, JointOptions, NoiseModel, PhysicalConstants,
    DEFAULT_SIGMA_FM,
};
use crate::lattice::{CrystalSpec, ErrorCombination, Reflection, ScatteringModel};
use crate::planner::{CandidateBounds, SpectrumWindow};
use crate::quantity::Uncertain;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub crystal: CrystalSection,
    pub spectrum: SpectrumSection,
    pub blade: BladeGeometry,
    pub model: ModelSection,
    pub fit: FitSection,
    pub design: DesignSection,
    pub plan: PlanSection,
    pub simulate: SimulateSection,
    pub mc: McSection,
    pub constants: PhysicalConstants,
    pub output: OutputSection,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrystalSection {
    pub name: String,
    pub a0: Option<f64>,
    pub z: Option<u32>,
    pub b_nuclear: Option<f64>,
    pub b_nuclear_sigma: Option<f64>,
    pub temperature_factor: Option<f64>,
    pub temperature_factor_sigma: Option<f64>,
    pub form_factor_csv: Option<PathBuf>,
}

impl Default for CrystalSection {
    fn default() -> Self {
        Self {
            name: "Si".into(),
            a0: None,
            z: None,
            b_nuclear: None,
            b_nuclear_sigma: None,
            temperature_factor: None,
            temperature_factor_sigma: None,
            form_factor_csv: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    #[default]
    Flat,
    Maxwellian,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_peak: f64,
    pub two_theta_min: f64,
    pub two_theta_max: f64,
    pub shape: ShapeName,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        let w = SpectrumWindow::default();
        Self {
            lambda_min: w.lambda_min,
            lambda_max: w.lambda_max,
            lambda_peak: w.lambda_peak,
            two_theta_min: w.two_theta_min,
            two_theta_max: w.two_theta_max,
            shape: ShapeName::Flat,
        }
    }
}

impl SpectrumSection {
    pub fn window(&self) -> SpectrumWindow {
        SpectrumWindow {
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            lambda_peak: self.lambda_peak,
            two_theta_min: self.two_theta_min,
            two_theta_max: self.two_theta_max,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BneValue {
    Value(f64),
    Label(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub b_ne: BneValue,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            b_ne: BneValue::Label("argonne".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub forward: bool,
    pub free_intercept: bool,
    pub combination: ErrorCombination,
    pub sigma: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            forward: true,
            free_intercept: false,
            combination: ErrorCombination::Linear,
            sigma: DEFAULT_SIGMA_FM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseName {
    #[default]
    Constant,
    Temperature,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSection {
    pub reflections: Option<Vec<String>>,
    pub noise: NoiseName,
    pub sigma_b_factor: f64,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self {
            reflections: None,
            noise: NoiseName::Constant,
            sigma_b_factor: 0.0027,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanSection {
    pub all: bool,
    pub highest: String,
}

impl Default for PlanSection {
    fn default() -> Self {
        Self {
            all: false,
            highest: "642".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub points: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { points: 2001 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub trials: usize,
}

impl Default for McSection {
    fn default() -> Self {
        Self { trials: 1000 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Everything a command needs, resolved and validated.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub crystal: CrystalSpec,
    pub model: ScatteringModel,
    pub spectrum: BeamSpectrum,
    pub blade: BladeGeometry,
    pub bounds: CandidateBounds,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn crystal(&self) -> Result<CrystalSpec> {
        let c = &self.crystal;
        let mut spec = match CrystalSpec::builtin(&c.name) {
            Some(s) => s,
            None => {
                let need = |v: Option<f64>, k: &str| {
                    v.ok_or_else(|| Error::Config(format!("custom crystal '{}' needs {k}", c.name)))
                };
                CrystalSpec {
                    name: c.name.clone(),
                    a0: need(c.a0, "a0")?,
                    z: c.z
                        .ok_or_else(|| Error::Config(format!("custom crystal '{}' needs z", c.name)))?,
                    b_nuclear: Uncertain::new(need(c.b_nuclear, "b_nuclear")?, 0.0),
                    temperature_factor: Uncertain::new(need(c.temperature_factor, "temperature_factor")?, 0.0),
                    structure: Default::default(),
                }
            }
        };
        if let Some(v) = c.a0 {
            spec.a0 = v;
        }
        if let Some(v) = c.z {
            spec.z = v;
        }
        if let Some(v) = c.b_nuclear {
            spec.b_nuclear.value = v;
        }
        if let Some(v) = c.b_nuclear_sigma {
            spec.b_nuclear.sigma = v;
        }
        if let Some(v) = c.temperature_factor {
            spec.temperature_factor.value = v;
        }
        if let Some(v) = c.temperature_factor_sigma {
            spec.temperature_factor.sigma = v;
        }
        spec.validate().map_err(config_err)?;
        Ok(spec)
    }

    pub fn form_factor(&self, crystal: &CrystalSpec) -> Result<FormFactorTable> {
        match &self.crystal.form_factor_csv {
            Some(p) => {
                let path = self.resolve_path(p);
                let file =
                    fs::File::open(&path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
                FormFactorTable::read_csv(&crystal.name, file)
            }
            None => FormFactorTable::builtin(&crystal.name).ok_or_else(|| {
                Error::Config(format!(
                    "no built-in form factor for '{}'; set crystal.form_factor_csv",
                    crystal.name
                ))
            }),
        }
    }

    pub fn b_ne(&self) -> Result<f64> {
        match &self.model.b_ne {
            BneValue::Value(v) if v.is_finite() => Ok(*v),
            BneValue::Value(v) => Err(Error::Config(format!("model.b_ne must be finite, got {v}"))),
            BneValue::Label(l) => reference_bne(l)
                .map(|u| u.value)
                .ok_or_else(|| Error::Config(format!("unknown b_ne label '{l}'"))),
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let crystal = self.crystal()?;
        let table = self.form_factor(&crystal)?;
        let model = ScatteringModel::new(&crystal, self.b_ne()?, table);
        let window = self.spectrum.window();
        window.validate().map_err(config_err)?;
        let shape = match self.spectrum.shape {
            ShapeName::Flat => SpectrumShape::Flat,
            ShapeName::Maxwellian => SpectrumShape::Maxwellian {
                peak: positive("lambda_peak", window.lambda_peak)?,
            },
        };
        self.blade.validate().map_err(config_err)?;
        let highest: Reflection = self.plan.highest.parse().map_err(config_err)?;
        positive("fit.sigma", self.fit.sigma)?;
        if !(self.design.sigma_b_factor >= 0.0) {
            return Err(Error::Config("design.sigma_b_factor must be non-negative".into()));
        }
        for (name, v) in [
            ("alpha", self.constants.alpha),
            ("neutron_mass_mev", self.constants.neutron_mass_mev),
            ("hbar_c_mev_fm", self.constants.hbar_c_mev_fm),
        ] {
            positive(name, v)?;
        }
        Ok(Resolved {
            crystal,
            model,
            spectrum: BeamSpectrum { shape, window },
            blade: self.blade,
            bounds: CandidateBounds { highest },
        })
    }

    /// Explicit design reflections, if configured.
    pub fn design_reflections(&self) -> Result<Option<Vec<Reflection>>> {
        self.design
            .reflections
            .as_ref()
            .map(|v| v.iter().map(|s| s.parse().map_err(config_err)).collect())
            .transpose()
    }

    pub fn intercept(&self) -> InterceptMode {
        match (self.fit.forward, self.fit.free_intercept) {
            (true, _) => InterceptMode::Prior,
            (false, true) => InterceptMode::Free,
            (false, false) => InterceptMode::Fixed,
        }
    }

    pub fn bne_options(&self) -> BneOptions {
        BneOptions {
            intercept: self.intercept(),
            combination: self.fit.combination,
        }
    }

    pub fn joint_options(&self) -> JointOptions {
        JointOptions {
            intercept: self.intercept(),
            ..Default::default()
        }
    }

    pub fn budget_options(&self) -> BudgetOptions {
        BudgetOptions {
            sigma: self.fit.sigma,
            forward: self.fit.forward,
            combination: self.fit.combination,
        }
    }

    pub fn noise(&self) -> NoiseModel {
        match self.design.noise {
            NoiseName::Constant => NoiseModel::Constant { sigma: self.fit.sigma },
            NoiseName::Temperature => NoiseModel::TemperatureFactor {
                sigma_b_factor: self.design.sigma_b_factor,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default_silicon() {
        let cfg = RunConfig::parse("").unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.crystal, CrystalSpec::silicon());
        assert_eq!(r.model.b_ne, -1.31e-3);
        assert_eq!(r.spectrum.window, SpectrumWindow::default());
        assert_eq!(cfg.intercept(), InterceptMode::Prior);
    }

    #[test]
    fn overrides() {
        let cfg = RunConfig::parse(
            "seed = 3\n[crystal]\nname = \"Ge\"\n[spectrum]\ntwo_theta_max = 45.0\nshape = \"maxwellian\"\n[model]\nb_ne = -1.5e-3\n[fit]\nforward = false\nfree_intercept = true\n",
        )
        .unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(r.crystal.z, 32);
        assert_eq!(r.spectrum.window.two_theta_max, 45.0);
        assert_eq!(r.spectrum.shape, SpectrumShape::Maxwellian { peak: 1.2 });
        assert_eq!(r.model.b_ne, -1.5e-3);
        assert_eq!(cfg.intercept(), InterceptMode::Free);
    }

    #[test]
    fn malformed_configs_are_config_errors() {
        for text in [
            "[crystal]\nnmae = \"Si\"",
            "[spectrum]\nlambda_min = \"low\"",
            "seed = -1",
            "[[crystal]]",
            "[model]\nb_ne = \"nope\"",
        ] {
            let e = RunConfig::parse(text).and_then(|c| c.resolve().map(|_| ()));
            assert!(e.as_ref().is_err_and(|e| e.is_config()), "{text}: {e:?}");
        }
        let e = RunConfig::parse("[spectrum]\nlambda_min = 3.0").unwrap().resolve();
        assert!(e.is_err_and(|e| e.is_config()));
        let e = RunConfig::parse("[crystal]\nname = \"Xx\"\na0 = 5.0")
            .unwrap()
            .resolve();
        assert!(e.is_err_and(|e| e.is_config()));
    }

    #[test]
    fn design_reflections_parse() {
        let cfg = RunConfig::parse("[design]\nreflections = [\"422\", \"(6 2 0)\"]").unwrap();
        let rs = cfg.design_reflections().unwrap().unwrap();
        assert_eq!(rs, vec![Reflection::new(4, 2, 2), Reflection::new(6, 2, 0)]);
        let cfg = RunConfig::parse("[design]\nreflections = [\"4x2\"]").unwrap();
        assert!(cfg.design_reflections().is_err_and(|e| e.is_config()));
    }
}
