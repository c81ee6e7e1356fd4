//! Synthetic corpus with a closed-form ground truth.
//!
//! Per-molecule descriptors are taken from the featurized graph: heavy-atom
//! count `n`, fractions `f_O`, `f_N`, `f_F` of O, N and F atoms, the fraction
//! `u` of bonds that are not single, and `L = log10 M`.
//!
//! ```text
//! s(solvent) = 1.2 f_O + 0.5 f_N - 0.6 f_F - 0.8 u - 0.35 (L - 2)
//! S          = sum_i w_i s_i + 0.8 sum_{i<j} w_i w_j (s_i - s_j)^2
//! t(salt)    = 0.5 f_F - 0.4 (L - 2.2)
//! target     = -3.2 + 1.6 tanh(S) + t - 0.5 (m - 1.2)^2 + noise * N(0, 1)
//! ```
//!
//! Each mixture is reported at 273.15, 313.15 and 333.15 K with
//! `log10 sigma(T) = target + k (1/T - 1/298)` and `k = -1200 - 300 tanh(S)`,
//! so the 298 K value has to be recovered by the Arrhenius fit.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ConductivityPoint, GraphCache, MixtureRecord, REFERENCE_TEMPERATURE};
use crate::chem::{element_count, Element, MolecularGraph};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthMolecule {
    pub smiles: &'static str,
    pub mol_weight: Option<f64>,
}

const fn mol(smiles: &'static str) -> SynthMolecule {
    SynthMolecule {
        smiles,
        mol_weight: None,
    }
}

pub const SYNTH_SOLVENTS: [SynthMolecule; 13] = [
    mol("C1=CC=CC=C1"),
    mol("COCOC"),
    mol("C1CC1"),
    mol("COCCOC"),
    mol("CC1=CC=CC=C1"),
    mol("CC1CCCO1"),
    mol("C1CCOC1"),
    mol("FC(F)(C1=NC(C#N)=C([N-]1)C#N)F.CCCCN2C=C[N+](C)=C2"),
    mol("C1COC(=O)O1"),
    mol("CC1COC(=O)O1"),
    mol("COC(=O)OC"),
    mol("CCOC(=O)OCC"),
    SynthMolecule {
        smiles: "[Cu]CCO[Au]",
        mol_weight: Some(2000.0),
    },
];

pub const SYNTH_SALTS: [SynthMolecule; 4] = [
    mol("F[P-](F)(F)(F)(F)F.[Li+]"),
    mol("F[B-](F)(F)F.[Li+]"),
    mol("FC(F)(F)S(=O)(=O)[N-]S(=O)(=O)C(F)(F)F.[Li+]"),
    mol("FS(=O)(=O)[N-]S(=O)(=O)F.[Li+]"),
];

const TEMPERATURES: [f64; 3] = [273.15, 313.15, 333.15];

struct Descriptors {
    f_o: f64,
    f_n: f64,
    f_f: f64,
    unsaturated: f64,
    log_m: f64,
}

fn descriptors(g: &MolecularGraph) -> Descriptors {
    let n = g.num_nodes().max(1) as f64;
    let frac = |e| element_count(g, e) as f64 / n;
    let bonds = g.edges();
    let unsaturated = if bonds.is_empty() {
        0.0
    } else {
        bonds.iter().filter(|b| b.order_code() != 1.0).count() as f64 / bonds.len() as f64
    };
    Descriptors {
        f_o: frac(Element::O),
        f_n: frac(Element::N),
        f_f: frac(Element::F),
        unsaturated,
        log_m: g.log_mol_weight(),
    }
}

pub fn solvent_score(g: &MolecularGraph) -> f64 {
    let d = descriptors(g);
    1.2 * d.f_o + 0.5 * d.f_n - 0.6 * d.f_f - 0.8 * d.unsaturated - 0.35 * (d.log_m - 2.0)
}

pub fn salt_term(g: &MolecularGraph) -> f64 {
    let d = descriptors(g);
    0.5 * d.f_f - 0.4 * (d.log_m - 2.2)
}

fn mixture_score(solvents: &[(f64, f64)]) -> f64 {
    let linear: f64 = solvents.iter().map(|(s, w)| w * s).sum();
    let mut bowing = 0.0;
    for i in 0..solvents.len() {
        for j in i + 1..solvents.len() {
            let (si, wi) = solvents[i];
            let (sj, wj) = solvents[j];
            bowing += wi * wj * (si - sj).powi(2);
        }
    }
    linear + 0.8 * bowing
}

/// Noise-free 298 K target and the Arrhenius slope of a mixture.
pub fn ground_truth(
    solvents: &[(&MolecularGraph, f64)],
    salt: &MolecularGraph,
    molality: f64,
) -> (f64, f64) {
    let scored: Vec<(f64, f64)> = solvents.iter().map(|(g, w)| (solvent_score(g), *w)).collect();
    let s = mixture_score(&scored).tanh();
    let target = -3.2 + 1.6 * s + salt_term(salt) - 0.5 * (molality - 1.2).powi(2);
    (target, -1200.0 - 300.0 * s)
}

/// `n` random mixtures of 1 to 4 pool solvents with one pool salt.
pub fn generate_synthetic(n: usize, seed: u64, noise: f64) -> Result<Vec<MixtureRecord>> {
    if n == 0 {
        return Err(Error::Data("synthetic corpus size must be at least 1".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Data(format!("invalid noise scale {noise}")));
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache = GraphCache::new();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let count = rng.random_range(1..=4usize);
        let picks = sample(&mut rng, SYNTH_SOLVENTS.len(), count).into_vec();
        let raw: Vec<f64> = (0..count).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let head: f64 = weights[..count - 1].iter().sum();
        weights[count - 1] = 1.0 - head;
        let salt_mol = SYNTH_SALTS[rng.random_range(0..SYNTH_SALTS.len())];
        let molality = rng.random_range(0.5..=2.0);
        let eps = normal.sample(&mut rng);

        let graphs: Vec<Arc<MolecularGraph>> = picks
            .iter()
            .map(|&p| cache.get(SYNTH_SOLVENTS[p].smiles, SYNTH_SOLVENTS[p].mol_weight))
            .collect::<Result<_>>()?;
        let salt = cache.get(salt_mol.smiles, salt_mol.mol_weight)?;
        let pairs: Vec<(&MolecularGraph, f64)> =
            graphs.iter().map(|g| g.as_ref()).zip(weights.iter().copied()).collect();
        let (clean, slope) = ground_truth(&pairs, &salt, molality);
        let target = clean + noise * eps;
        let points = TEMPERATURES
            .iter()
            .map(|&t| ConductivityPoint {
                temperature_k: t,
                log10_sigma: target + slope * (1.0 / t - 1.0 / REFERENCE_TEMPERATURE),
            })
            .collect();
        out.push(MixtureRecord {
            mixture_id: format!("synth-{i:05}"),
            solvent_smiles: picks.iter().map(|&p| SYNTH_SOLVENTS[p].smiles.to_string()).collect(),
            weight_fractions: weights,
            mol_weight_overrides: picks.iter().map(|&p| SYNTH_SOLVENTS[p].mol_weight).collect(),
            salt_smiles: salt_mol.smiles.to_string(),
            molality,
            points,
            target_298k: Some(target),
        });
    }
    Ok(out)
}
