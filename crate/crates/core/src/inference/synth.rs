//! Synthetic measurements and Monte-Carlo validation of the fit covariance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{joint_fit, FitResult, JointOptions, Measurement};
use crate::error::{Error, Result};
use crate::lattice::{b_meas, classify, q_over_4pi, CrystalSpec, Reflection, ScatteringModel};
use crate::quantity::Uncertain;

/// Per-reflection uncertainty assigned to synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// The same σ (fm) for every reflection.
    Constant { sigma: f64 },
    /// σ = b_meas·(Q/4π)²·σ_B, the spread caused by an uncertain B alone.
    TemperatureFactor { sigma_b_factor: f64 },
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Constant {
            sigma: super::fit::DEFAULT_SIGMA_FM,
        }
    }
}

impl NoiseModel {
    pub fn sigma(&self, b_meas: f64, q_over_4pi: f64) -> f64 {
        match *self {
            NoiseModel::Constant { sigma } => sigma,
            NoiseModel::TemperatureFactor { sigma_b_factor } => b_meas * q_over_4pi * q_over_4pi * sigma_b_factor,
        }
    }

    fn validate(&self) -> Result<()> {
        let s = match *self {
            NoiseModel::Constant { sigma } => sigma,
            NoiseModel::TemperatureFactor { sigma_b_factor } => sigma_b_factor,
        };
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise level must be non-negative, got {s}"
            )));
        }
        Ok(())
    }
}

/// Model values with their assigned σ and no noise.
pub fn noiseless_measurements(
    crystal: &CrystalSpec,
    model: &ScatteringModel,
    reflections: &[Reflection],
    noise: &NoiseModel,
) -> Result<Vec<Measurement>> {
    noise.validate()?;
    reflections
        .iter()
        .map(|&r| {
            if !classify(r).is_allowed() {
                return Err(Error::ForbiddenReflection(r));
            }
            let q = q_over_4pi(crystal, r);
            let bm = b_meas(model, q)?;
            Ok(Measurement::new(r, bm, noise.sigma(bm, q)))
        })
        .collect()
}

/// Model values plus Gaussian noise, drawn in reflection order from a
/// ChaCha8 stream seeded with `seed`.
pub fn synth_measurements(
    crystal: &CrystalSpec,
    model: &ScatteringModel,
    reflections: &[Reflection],
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<Measurement>> {
    let mut ms = noiseless_measurements(crystal, model, reflections, noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perturb(&mut ms, &mut rng);
    Ok(ms)
}

fn perturb(ms: &mut [Measurement], rng: &mut ChaCha8Rng) {
    for m in ms {
        let z: f64 = StandardNormal.sample(rng);
        m.b_meas += m.sigma * z;
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub names: Vec<String>,
    pub truth: Vec<f64>,
    pub trials: usize,
    pub analytic_covariance: Vec<Vec<f64>>,
    pub empirical_mean: Vec<f64>,
    pub empirical_covariance: Vec<Vec<f64>>,
}

impl MonteCarloReport {
    pub fn analytic_sigma(&self) -> Vec<f64> {
        diag_sqrt(&self.analytic_covariance)
    }

    pub fn empirical_sigma(&self) -> Vec<f64> {
        diag_sqrt(&self.empirical_covariance)
    }

    /// Empirical over analytic σ for each parameter.
    pub fn sigma_ratio(&self) -> Vec<f64> {
        self.empirical_sigma()
            .iter()
            .zip(self.analytic_sigma())
            .map(|(e, a)| e / a)
            .collect()
    }
}

fn diag_sqrt(c: &[Vec<f64>]) -> Vec<f64> {
    (0..c.len()).map(|i| c[i][i].max(0.0).sqrt()).collect()
}

/// Repeats the joint fit on `trials` independent noisy data sets and
/// compares the scatter of the estimates with the analytic covariance.
///
/// Trial `t` draws from stream `t` of the generator seeded with `seed`, so
/// results do not depend on the thread count. When the forward value enters
/// as a prior, it is redrawn each trial with σ = `b_nuclear.sigma`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_validate(
    crystal: &CrystalSpec,
    model: &ScatteringModel,
    reflections: &[Reflection],
    noise: &NoiseModel,
    b_nuclear_sigma: f64,
    options: &JointOptions,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if trials < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 trials, got {trials}")));
    }
    let base = noiseless_measurements(crystal, model, reflections, noise)?;
    let noiseless = base.iter().all(|m| m.sigma == 0.0);
    // zero noise: weight uniformly and report a zero analytic covariance
    let weights: Vec<Measurement> = base
        .iter()
        .map(|m| {
            if noiseless {
                Measurement { sigma: 1.0, ..*m }
            } else {
                *m
            }
        })
        .collect();
    let prior_sigma = if noiseless { 1.0 } else { b_nuclear_sigma };
    let truth_prior = Uncertain::new(model.b_nuclear, prior_sigma);
    let analytic = joint_fit(crystal, &model.form_factor, &weights, truth_prior, options)?;
    let truth = truth_values(model, &analytic, options);

    let estimates: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let mut rng = trial_rng(seed, t);
            let mut ms = weights.clone();
            if !noiseless {
                perturb(&mut ms, &mut rng);
            }
            let mut prior = truth_prior;
            if !noiseless && prior.sigma > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                prior.value += prior.sigma * z;
            }
            Ok(joint_fit(crystal, &model.form_factor, &ms, prior, options)?.values)
        })
        .collect::<Result<_>>()?;

    let p = analytic.names.len();
    let n = trials as f64;
    let mut mean = vec![0.0; p];
    for e in &estimates {
        for k in 0..p {
            mean[k] += e[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![vec![0.0; p]; p];
    for e in &estimates {
        for i in 0..p {
            for j in 0..p {
                cov[i][j] += (e[i] - mean[i]) * (e[j] - mean[j]);
            }
        }
    }
    cov.iter_mut().flatten().for_each(|c| *c /= n - 1.0);
    let analytic_covariance = if noiseless {
        vec![vec![0.0; p]; p]
    } else {
        analytic.covariance.clone()
    };
    Ok(MonteCarloReport {
        names: analytic.names,
        truth,
        trials,
        analytic_covariance,
        empirical_mean: mean,
        empirical_covariance: cov,
    })
}

fn truth_values(model: &ScatteringModel, fit: &FitResult, options: &JointOptions) -> Vec<f64> {
    fit.names
        .iter()
        .map(|n| match n.as_str() {
            "B" => options.fixed_b_factor.unwrap_or(model.temperature_factor),
            "b_ne" => model.b_ne,
            _ => model.b_nuclear,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refl(labels: &[&str]) -> Vec<Reflection> {
        labels.iter().map(|l| l.parse().unwrap()).collect()
    }

    const EIGHT: [&str; 8] = ["111", "220", "311", "400", "331", "422", "333", "440"];

    fn setup() -> (CrystalSpec, ScatteringModel) {
        let c = CrystalSpec::silicon();
        let m = ScatteringModel::builtin(&c, -1.31e-3).unwrap();
        (c, m)
    }

    #[test]
    fn zero_sigma_is_exact() {
        let (c, m) = setup();
        let rs = refl(&EIGHT);
        let ms = synth_measurements(&c, &m, &rs, &NoiseModel::Constant { sigma: 0.0 }, 7).unwrap();
        for (x, r) in ms.iter().zip(&rs) {
            assert_eq!(x.b_meas, b_meas(&m, q_over_4pi(&c, *r)).unwrap());
        }
    }

    #[test]
    fn seeded_output_is_reproducible() {
        let (c, m) = setup();
        let rs = refl(&EIGHT);
        let a = synth_measurements(&c, &m, &rs, &NoiseModel::default(), 42).unwrap();
        let b = synth_measurements(&c, &m, &rs, &NoiseModel::default(), 42).unwrap();
        let d = synth_measurements(&c, &m, &rs, &NoiseModel::default(), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
    }

    #[test]
    fn temperature_noise_grows_with_q() {
        let (c, m) = setup();
        let rs = refl(&EIGHT);
        let ms =
            noiseless_measurements(&c, &m, &rs, &NoiseModel::TemperatureFactor { sigma_b_factor: 0.0027 }).unwrap();
        for w in ms.windows(2) {
            assert!(w[1].sigma > w[0].sigma);
        }
        let q = q_over_4pi(&c, rs[0]);
        assert!((ms[0].sigma - ms[0].b_meas * q * q * 0.0027).abs() < 1e-18);
    }

    #[test]
    fn forbidden_reflection_rejected() {
        let (c, m) = setup();
        let e = synth_measurements(&c, &m, &refl(&["222"]), &NoiseModel::default(), 1);
        assert!(matches!(e, Err(Error::ForbiddenReflection(_))));
    }

    #[test]
    fn monte_carlo_zero_noise() {
        let (c, m) = setup();
        let rep = monte_carlo_validate(
            &c,
            &m,
            &refl(&EIGHT),
            &NoiseModel::Constant { sigma: 0.0 },
            0.0002,
            &JointOptions::default(),
            50,
            3,
        )
        .unwrap();
        assert!(rep.empirical_covariance.iter().flatten().all(|v| v.abs() < 1e-28));
    }

    #[test]
    fn monte_carlo_matches_analytic() {
        let (c, m) = setup();
        let n = 4000;
        let rep = monte_carlo_validate(
            &c,
            &m,
            &refl(&EIGHT),
            &NoiseModel::default(),
            0.0002,
            &JointOptions::default(),
            n,
            11,
        )
        .unwrap();
        let tol = 4.0 / (2.0 * n as f64).sqrt();
        for r in rep.sigma_ratio() {
            assert!((r - 1.0).abs() < tol, "{r}");
        }
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let (c, m) = setup();
        let run = || {
            monte_carlo_validate(
                &c,
                &m,
                &refl(&EIGHT),
                &NoiseModel::default(),
                0.0002,
                &JointOptions::default(),
                200,
                5,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }
}
