use serde::Serialize;

use super::elements::{Element, HYDROGEN_MASS};
use super::smiles::{parse_smiles, Atom, Bond, Fragment};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Width of the per-atom feature vector.
pub const NODE_FEATURE_DIM: usize = 13;

/// Version tag of the node/edge/graph feature layout, stored in checkpoints.
pub const FEATURE_SCHEMA_VERSION: u32 = 1;

/// Heavy-atom graph of one molecule (or one salt, possibly several ions).
#[derive(Clone, Debug, PartialEq)]
pub struct MolecularGraph {
    node_features: Tensor,
    edges: Vec<Bond>,
    neighbors: Vec<Vec<(usize, f64)>>,
    log_mol_weight: f64,
    source_smiles: String,
}

impl MolecularGraph {
    /// Node features, one 13-wide row per heavy atom.
    pub fn node_features(&self) -> &Tensor {
        &self.node_features
    }

    /// Undirected bonds, each stored once with `i < j`.
    pub fn edges(&self) -> &[Bond] {
        &self.edges
    }

    pub fn num_nodes(&self) -> usize {
        self.neighbors.len()
    }

    /// Neighbors of node `i` with the connecting bond code.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn log_mol_weight(&self) -> f64 {
        self.log_mol_weight
    }

    pub fn source_smiles(&self) -> &str {
        &self.source_smiles
    }

    /// Identity for caching embeddings: two graphs with the same key embed
    /// identically under the same parameters.
    pub fn cache_key(&self) -> String {
        format!("{}|{:016x}", self.source_smiles, self.log_mol_weight.to_bits())
    }

    /// Builds a graph from explicit parts. Edges are deduplicated and
    /// normalized to `i < j`.
    pub fn from_parts(
        node_features: Tensor,
        edges: &[Bond],
        log_mol_weight: f64,
        source_smiles: impl Into<String>,
    ) -> Result<Self> {
        if node_features.rank() != 2 || node_features.shape()[0] == 0 {
            return Err(Error::Featurize(format!(
                "node features must be a non-empty matrix, got {:?}",
                node_features.shape()
            )));
        }
        let n = node_features.shape()[0];
        let mut stored: Vec<Bond> = Vec::with_capacity(edges.len());
        for b in edges {
            let (i, j) = b.endpoints;
            if i == j || i >= n || j >= n {
                return Err(Error::Featurize(format!("invalid bond endpoints ({i}, {j})")));
            }
            let key = (i.min(j), i.max(j));
            if stored.iter().any(|s| s.endpoints == key) {
                continue;
            }
            stored.push(Bond {
                endpoints: key,
                order: b.order,
            });
        }
        let mut neighbors = vec![Vec::new(); n];
        for b in &stored {
            let (i, j) = b.endpoints;
            neighbors[i].push((j, b.order_code()));
            neighbors[j].push((i, b.order_code()));
        }
        Ok(Self {
            node_features,
            edges: stored,
            neighbors,
            log_mol_weight,
            source_smiles: source_smiles.into(),
        })
    }

    /// Same molecule with nodes reordered: new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        assert_eq!(perm.len(), n);
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let rows: Vec<Vec<f64>> = perm
            .iter()
            .map(|&old| self.node_features.row(old).to_vec())
            .collect();
        let edges: Vec<Bond> = self
            .edges
            .iter()
            .map(|b| Bond {
                endpoints: (inverse[b.endpoints.0], inverse[b.endpoints.1]),
                order: b.order,
            })
            .collect();
        Self::from_parts(
            Tensor::from_rows(&rows),
            &edges,
            self.log_mol_weight,
            self.source_smiles.clone(),
        )
    }
}

/// 13-dim node feature: one-hot over (B, C, N, O, F, S, Cl), then atomic
/// number, mass, formal charge, electronegativity, vdW radius and H count.
pub fn atom_features(atom: &Atom) -> [f64; NODE_FEATURE_DIM] {
    let mut f = [0.0; NODE_FEATURE_DIM];
    if let Some(k) = atom.element.one_hot_index() {
        f[k] = 1.0;
    }
    let d = atom.element.data();
    f[7] = f64::from(d.atomic_number);
    f[8] = d.mass;
    f[9] = f64::from(atom.formal_charge);
    f[10] = d.electronegativity;
    f[11] = d.vdw_radius;
    f[12] = f64::from(atom.total_h());
    f
}

pub fn bond_feature(bond: &Bond) -> f64 {
    bond.order_code()
}

/// Molecular weight in Da including attached hydrogens.
pub fn molecular_weight(atoms: &[Atom]) -> f64 {
    atoms
        .iter()
        .map(|a| a.element.data().mass + f64::from(a.total_h()) * HYDROGEN_MASS)
        .sum()
}

/// Parses and featurizes `smiles`. `mol_weight_override` (Da) replaces the
/// computed weight, as for polymers with a reported Mn or Mw.
pub fn build_graph(smiles: &str, mol_weight_override: Option<f64>) -> Result<MolecularGraph> {
    let fragments = parse_smiles(smiles)?;
    let (atoms, bonds) = merge_fragments(fragments);
    let weight = match mol_weight_override {
        Some(m) if m.is_finite() && m > 0.0 => m,
        Some(m) => {
            return Err(Error::Featurize(format!(
                "molecular weight override must be positive, got {m}"
            )))
        }
        None => molecular_weight(&atoms),
    };
    let rows: Vec<Vec<f64>> = atoms.iter().map(|a| atom_features(a).to_vec()).collect();
    MolecularGraph::from_parts(Tensor::from_rows(&rows), &bonds, weight.log10(), smiles)
}

fn merge_fragments(fragments: Vec<Fragment>) -> (Vec<Atom>, Vec<Bond>) {
    let mut atoms = Vec::new();
    let mut bonds = Vec::new();
    for frag in fragments {
        let offset = atoms.len();
        bonds.extend(frag.bonds.iter().map(|b| Bond {
            endpoints: (b.endpoints.0 + offset, b.endpoints.1 + offset),
            order: b.order,
        }));
        atoms.extend(frag.atoms);
    }
    (atoms, bonds)
}

/// JSON view used by the `featurize` subcommand.
#[derive(Debug, Serialize)]
pub struct FeaturizedGraph {
    pub smiles: String,
    pub num_nodes: usize,
    pub node_features: Vec<Vec<f64>>,
    pub edges: Vec<FeaturizedEdge>,
    pub log_mol_weight: f64,
}

#[derive(Debug, Serialize)]
pub struct FeaturizedEdge {
    pub source: usize,
    pub target: usize,
    pub bond_type: f64,
}

impl From<&MolecularGraph> for FeaturizedGraph {
    fn from(g: &MolecularGraph) -> Self {
        Self {
            smiles: g.source_smiles.clone(),
            num_nodes: g.num_nodes(),
            node_features: (0..g.num_nodes())
                .map(|i| g.node_features.row(i).to_vec())
                .collect(),
            edges: g
                .edges
                .iter()
                .map(|b| FeaturizedEdge {
                    source: b.endpoints.0,
                    target: b.endpoints.1,
                    bond_type: bond_feature(b),
                })
                .collect(),
            log_mol_weight: g.log_mol_weight,
        }
    }
}

/// Per-element heavy-atom counts, handy for descriptors and tests.
pub fn element_count(g: &MolecularGraph, element: Element) -> usize {
    let Some(k) = element.one_hot_index() else {
        let z = f64::from(element.data().atomic_number);
        return (0..g.num_nodes())
            .filter(|&i| g.node_features.at(i, 7) == z)
            .count();
    };
    (0..g.num_nodes())
        .filter(|&i| g.node_features.at(i, k) == 1.0)
        .count()
}
