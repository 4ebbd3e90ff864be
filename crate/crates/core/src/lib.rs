//! Planning and analysis of Pendellösung-fringe measurements of neutron
//! scattering lengths in diamond-structure crystals.

// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod formfactor;
pub mod fringes;
pub mod inference;
pub mod lattice;
pub mod planner;
pub mod quantity;
pub mod units;

pub use error::{Error, Result};
pub use quantity::Uncertain;
