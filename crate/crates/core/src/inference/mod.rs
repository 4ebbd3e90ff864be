//! Inference of the temperature factor and the neutron-electron scattering
//! length from Bragg scattering lengths.

pub mod budget;
pub mod constants;
pub mod fit;
pub mod synth;
pub mod wls;

pub use budget::{design_budget, Budget, BudgetEntry, BudgetOptions};
pub use constants::{charge_radius_from_bne, reference_bne, PhysicalConstants, ReferenceBne, REFERENCE_BNE};
pub use fit::{
    extract_bne_single, fit_bne, fit_temperature_factor, joint_fit, BneFit, BneOptions, FitResult, InterceptMode,
    JointOptions, Measurement, TemperatureFit, DEFAULT_SIGMA_FM, PARAMETER_NAMES,
};
pub use synth::{monte_carlo_validate, noiseless_measurements, synth_measurements, MonteCarloReport, NoiseModel};
pub use wls::{fit_line, slope_uncertainty, LineFit};
