//! Unit conversions. Lengths are carried in Å, scattering lengths in fm.

/// One femtometre expressed in ångström.
pub const FM_TO_ANGSTROM: f64 = 1.0e-5;

/// One centimetre expressed in ångström.
pub const CM_TO_ANGSTROM: f64 = 1.0e8;

pub fn fm_to_angstrom(fm: f64) -> f64 {
    fm * FM_TO_ANGSTROM
}

pub fn cm_to_angstrom(cm: f64) -> f64 {
    cm * CM_TO_ANGSTROM
}
