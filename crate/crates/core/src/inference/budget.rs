//! Projected uncertainties of B and b_ne for a planned set of reflections.

use serde::{Deserialize, Serialize};

use super::fit::{fit_bne, fit_temperature_factor, joint_fit, BneOptions, InterceptMode, JointOptions};
use super::synth::{noiseless_measurements, NoiseModel};
use crate::error::{Error, Result};
use crate::lattice::{CrystalSpec, ErrorCombination, Reflection, ScatteringModel};
use crate::quantity::Uncertain;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetOptions {
    /// σ of each measured b_meas, fm.
    pub sigma: f64,
    /// Include the forward value b_nuclear ± σ as a datum.
    pub forward: bool,
    pub combination: ErrorCombination,
}

impl Default for BudgetOptions {
    fn default() -> Self {
        Self {
            sigma: super::fit::DEFAULT_SIGMA_FM,
            forward: true,
            combination: ErrorCombination::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetEntry {
    /// Å²
    pub sigma_b_factor: f64,
    /// fm
    pub sigma_b_ne: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub reflections: Vec<Reflection>,
    /// B from the ln b_meas line, then b_ne from the b-versus-(1 − f) line
    /// with σ_B folded into each point.
    pub two_stage: BudgetEntry,
    /// Simultaneous fit of (B, b_ne, b_nuclear); `None` if the design cannot
    /// separate the parameters.
    pub joint: Option<BudgetEntry>,
}

/// Uncertainties expected from measuring `reflections` with the given σ.
/// They depend only on the design, so noiseless model values are used.
pub fn design_budget(
    crystal: &CrystalSpec,
    model: &ScatteringModel,
    reflections: &[Reflection],
    options: &BudgetOptions,
) -> Result<Budget> {
    if reflections.is_empty() {
        return Err(Error::InsufficientData("no reflections in the design".into()));
    }
    let mut distinct = reflections.iter().map(|r| r.norm_sq()).collect::<Vec<_>>();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 && !options.forward {
        return Err(Error::SingularDesign(
            "one momentum transfer without the forward point cannot fix a slope".into(),
        ));
    }
    if !(options.sigma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "σ must be positive, got {}",
            options.sigma
        )));
    }
    let ms = noiseless_measurements(
        crystal,
        model,
        reflections,
        &NoiseModel::Constant { sigma: options.sigma },
    )?;
    let b_nuclear = Uncertain::new(model.b_nuclear, crystal.b_nuclear.sigma);
    let intercept = if options.forward {
        InterceptMode::Prior
    } else {
        InterceptMode::Free
    };

    let t = fit_temperature_factor(crystal, &ms, b_nuclear, intercept)?;
    let b_factor = Uncertain::new(model.temperature_factor, t.b_factor.sigma);
    let bne = fit_bne(
        crystal,
        &model.form_factor,
        &ms,
        b_nuclear,
        b_factor,
        &BneOptions {
            intercept,
            combination: options.combination,
        },
    )?;
    let two_stage = BudgetEntry {
        sigma_b_factor: t.b_factor.sigma,
        sigma_b_ne: bne.b_ne.sigma,
    };

    let joint = match joint_fit(
        crystal,
        &model.form_factor,
        &ms,
        b_nuclear,
        &JointOptions {
            intercept,
            ..Default::default()
        },
    ) {
        Ok(fit) => Some(BudgetEntry {
            sigma_b_factor: fit.parameter("B").map(|p| p.sigma).unwrap_or(0.0),
            sigma_b_ne: fit.parameter("b_ne").map(|p| p.sigma).unwrap_or(0.0),
        }),
        Err(Error::SingularDesign(_)) | Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Budget {
        reflections: reflections.to_vec(),
        two_stage,
        joint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::fit::Measurement;
    use crate::inference::wls::slope_uncertainty;
    use crate::lattice::{b_meas, debye_waller, q_over_4pi};

    fn refl(labels: &[&str]) -> Vec<Reflection> {
        labels.iter().map(|l| l.parse().unwrap()).collect()
    }

    fn setup() -> (CrystalSpec, ScatteringModel) {
        let c = CrystalSpec::silicon();
        let m = ScatteringModel::builtin(&c, -1.31e-3).unwrap();
        (c, m)
    }

    const STRONG: [&str; 3] = ["422", "620", "642"];
    const EIGHT: [&str; 8] = ["422", "511", "531", "620", "533", "551", "711", "642"];

    #[test]
    fn strong_set() {
        let (c, m) = setup();
        let b = design_budget(&c, &m, &refl(&STRONG), &BudgetOptions::default()).unwrap();
        assert!(
            (b.two_stage.sigma_b_factor / 0.00040 - 1.0).abs() < 0.25,
            "{:?}",
            b.two_stage
        );
        assert!(
            (b.two_stage.sigma_b_ne / 0.11e-3 - 1.0).abs() < 0.25,
            "{:?}",
            b.two_stage
        );
    }

    #[test]
    fn eight_set() {
        let (c, m) = setup();
        let b = design_budget(&c, &m, &refl(&EIGHT), &BudgetOptions::default()).unwrap();
        assert!(
            (b.two_stage.sigma_b_factor / 0.00027 - 1.0).abs() < 0.25,
            "{:?}",
            b.two_stage
        );
        assert!(
            (b.two_stage.sigma_b_ne / 0.06e-3 - 1.0).abs() < 0.25,
            "{:?}",
            b.two_stage
        );
        assert!(b.joint.is_some());
    }

    #[test]
    fn more_reflections_more_information() {
        let (c, m) = setup();
        let o = BudgetOptions::default();
        let single = design_budget(&c, &m, &refl(&["111"]), &o).unwrap();
        let strong = design_budget(&c, &m, &refl(&STRONG), &o).unwrap();
        let eight = design_budget(&c, &m, &refl(&EIGHT), &o).unwrap();
        assert!(eight.two_stage.sigma_b_ne < strong.two_stage.sigma_b_ne);
        assert!(strong.two_stage.sigma_b_ne < single.two_stage.sigma_b_ne);
        let (js, je) = (strong.joint.unwrap(), eight.joint.unwrap());
        assert!(je.sigma_b_ne < js.sigma_b_ne);
    }

    #[test]
    fn single_without_forward_is_degenerate() {
        let (c, m) = setup();
        let o = BudgetOptions {
            forward: false,
            ..Default::default()
        };
        let e = design_budget(&c, &m, &refl(&["111"]), &o);
        assert!(matches!(e, Err(Error::SingularDesign(_))));
    }

    #[test]
    fn sigma_scales_linearly() {
        let (c, m) = setup();
        let a = design_budget(&c, &m, &refl(&EIGHT), &BudgetOptions::default()).unwrap();
        let o = BudgetOptions {
            sigma: 0.0016,
            ..Default::default()
        };
        let b = design_budget(&c, &m, &refl(&EIGHT), &o).unwrap();
        // forward σ is not scaled, so only an approximate doubling
        assert!(b.two_stage.sigma_b_ne > 1.5 * a.two_stage.sigma_b_ne);
    }

    #[test]
    fn slope_formula_matches_joint_marginal_at_fixed_b() {
        let (c, m) = setup();
        let rs = refl(&EIGHT);
        let sigma = 0.0008;
        let ms: Vec<Measurement> = rs
            .iter()
            .map(|&r| Measurement::new(r, b_meas(&m, q_over_4pi(&c, r)).unwrap(), sigma))
            .collect();
        let xs: Vec<f64> = rs
            .iter()
            .map(|&r| 1.0 - m.form_factor.f_at(q_over_4pi(&c, r)).unwrap())
            .collect();
        let sig: Vec<f64> = rs
            .iter()
            .map(|&r| sigma / debye_waller(m.temperature_factor, q_over_4pi(&c, r)))
            .collect();
        let expect = slope_uncertainty(&xs, &sig).unwrap() / c.z as f64;
        let opts = JointOptions {
            intercept: InterceptMode::Free,
            fixed_b_factor: Some(m.temperature_factor),
            ..Default::default()
        };
        let fit = joint_fit(&c, &m.form_factor, &ms, c.b_nuclear, &opts).unwrap();
        let got = fit.parameter("b_ne").unwrap().sigma;
        assert!((got / expect - 1.0).abs() < 1e-9, "{got} vs {expect}");
    }
}
