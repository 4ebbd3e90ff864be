//! Physical constants and reference values of the neutron-electron
//! scattering length.

use serde::{Deserialize, Serialize};

use crate::quantity::Uncertain;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Fine-structure constant.
    pub alpha: f64,
    /// Neutron rest energy, MeV.
    pub neutron_mass_mev: f64,
    /// ħc, MeV·fm.
    pub hbar_c_mev_fm: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::codata_2018()
    }
}

impl PhysicalConstants {
    pub const fn codata_2018() -> Self {
        Self {
            alpha: 7.297_352_569_3e-3,
            neutron_mass_mev: 939.565_420_52,
            hbar_c_mev_fm: 197.326_980_4,
        }
    }

    /// b_ne / ⟨r²⟩ = α·m_n c² / (3ħc), fm⁻¹.
    pub fn bne_per_radius_sq(&self) -> f64 {
        self.alpha * self.neutron_mass_mev / (3.0 * self.hbar_c_mev_fm)
    }
}

/// A published value of b_ne, in fm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceBne {
    pub label: &'static str,
    pub b_ne: Uncertain,
}

pub const REFERENCE_BNE: [ReferenceBne; 3] = [
    ReferenceBne {
        label: "theory",
        b_ne: Uncertain::exact(-1.467_971e-3),
    },
    ReferenceBne {
        label: "argonne",
        b_ne: Uncertain::new(-1.31e-3, 0.03e-3),
    },
    ReferenceBne {
        label: "dubna",
        b_ne: Uncertain::new(-1.59e-3, 0.04e-3),
    },
];

pub fn reference_bne(label: &str) -> Option<Uncertain> {
    REFERENCE_BNE
        .iter()
        .find(|r| r.label.eq_ignore_ascii_case(label))
        .map(|r| r.b_ne)
}

/// Mean-square charge radius ⟨r²⟩ in fm² from b_ne in fm.
pub fn charge_radius_from_bne(constants: &PhysicalConstants, b_ne: Uncertain) -> Uncertain {
    b_ne.scale(1.0 / constants.bne_per_radius_sq())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversion_factor() {
        let k = PhysicalConstants::default().bne_per_radius_sq();
        assert!((k - 0.011_582_0).abs() < 5e-8, "{k}");
    }

    #[test]
    fn theory_radius() {
        let c = PhysicalConstants::default();
        let r2 = charge_radius_from_bne(&c, reference_bne("theory").unwrap());
        assert!((r2.value + 0.126_746).abs() < 5e-6, "{}", r2.value);
        assert_eq!(r2.sigma, 0.0);
    }

    #[test]
    fn radius_scales_sigma() {
        let c = PhysicalConstants::default();
        let r2 = charge_radius_from_bne(&c, Uncertain::new(-1.31e-3, 0.03e-3));
        assert!((r2.value + 0.1131).abs() < 1e-4);
        assert!((r2.sigma / r2.value.abs() - 0.03 / 1.31).abs() < 1e-12);
    }

    #[test]
    fn zero_bne_zero_radius() {
        let r2 = charge_radius_from_bne(&PhysicalConstants::default(), Uncertain::exact(0.0));
        assert_eq!(r2.value, 0.0);
    }
}
