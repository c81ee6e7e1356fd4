//! SMILES parsing and molecular graph featurization.

pub mod elements;
pub mod graph;
pub mod smiles;

pub use elements::{Element, ElementData};
pub use graph::{
    atom_features, bond_feature, build_graph, element_count, molecular_weight, FeaturizedGraph,
    MolecularGraph, FEATURE_SCHEMA_VERSION, NODE_FEATURE_DIM,
};
pub use smiles::{
    assign_implicit_hydrogens, parse_smiles, Atom, Bond, BondOrder, Fragment, SmilesError,
    SmilesErrorKind,
};
