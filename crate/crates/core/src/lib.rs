//! Simulation of chiral Schrödinger-cat generation: a two-level atom
//! dispersively coupled to the counter-propagating modes of a spinning ring
//! resonator.
//!
//! All rates are in units of the atom-field coupling `J`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod closed;
pub mod error;
pub mod hilbert;
pub mod integrate;
pub mod model;
pub mod open;
pub mod wigner;

pub use error::{Error, Result};
