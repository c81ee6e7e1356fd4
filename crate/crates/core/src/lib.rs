//! Permutation-invariant conductivity model for electrolyte mixtures.
//!
//! Molecules are parsed from SMILES into graphs, embedded by a graph network,
//! pooled over the solvent set with weight-scaled attention and mapped to a
//! log10 conductivity together with the salt and its molality.

pub mod chem;
pub mod data;
pub mod error;
pub mod model;
pub mod nn;
pub mod screen;
pub mod tensor;
pub mod train;

pub use error::{Error, ErrorClass, Result};
