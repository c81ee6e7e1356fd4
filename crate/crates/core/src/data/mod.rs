//! Conductivity records: CSV ingest, 298 K targets, splits and a synthetic
//! corpus generator.

mod arrhenius;
mod csv_io;
mod synthetic;

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use arrhenius::{
    arrhenius_fit, conductivity_at_reference, ArrheniusFit, ConductivityPoint, GAS_CONSTANT,
    REFERENCE_MATCH_TOLERANCE, REFERENCE_TEMPERATURE,
};
pub use csv_io::{
    load_dataset, read_dataset, write_dataset, write_dataset_to, LoadMode, LoadReport,
    SkippedRow, CSV_HEADER,
};
pub use synthetic::{
    generate_synthetic, ground_truth, salt_term, solvent_score, SynthMolecule, SYNTH_SALTS,
    SYNTH_SOLVENTS,
};

use crate::chem::{build_graph, MolecularGraph};
use crate::error::{Error, Result};
use crate::model::{MixtureInput, WEIGHT_SUM_TOLERANCE};

/// Most solvents a single mixture may hold.
pub const MAX_SOLVENTS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecord {
    pub mixture_id: String,
    pub solvent_smiles: Vec<String>,
    pub weight_fractions: Vec<f64>,
    /// Daltons; `None` means computed from the formula.
    pub mol_weight_overrides: Vec<Option<f64>>,
    pub salt_smiles: String,
    /// mol/kg.
    pub molality: f64,
    pub points: Vec<ConductivityPoint>,
    /// log10 S/cm at 298 K.
    pub target_298k: Option<f64>,
}

impl MixtureRecord {
    pub fn validate(&self) -> Result<()> {
        let n = self.solvent_smiles.len();
        if n == 0 || n > MAX_SOLVENTS {
            return Err(Error::Data(format!("expected 1 to {MAX_SOLVENTS} solvents, got {n}")));
        }
        if self.weight_fractions.len() != n || self.mol_weight_overrides.len() != n {
            return Err(Error::Data("solvent-aligned field counts differ".into()));
        }
        if self
            .weight_fractions
            .iter()
            .any(|w| !(w.is_finite() && (0.0..=1.0).contains(w)))
        {
            return Err(Error::Data("weight fraction outside [0, 1]".into()));
        }
        let total: f64 = self.weight_fractions.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::Data(format!("weight fractions sum to {total}, not 1")));
        }
        if self.mol_weight_overrides.iter().flatten().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::Data("molecular weight override must be positive".into()));
        }
        if self.salt_smiles.is_empty() {
            return Err(Error::Data("missing salt".into()));
        }
        if !(self.molality >= 0.0 && self.molality.is_finite()) {
            return Err(Error::Data(format!("invalid molality {}", self.molality)));
        }
        if self
            .points
            .iter()
            .any(|p| !(p.temperature_k > 0.0 && p.temperature_k.is_finite() && p.log10_sigma.is_finite()))
        {
            return Err(Error::Data("temperature must be positive and conductivity finite".into()));
        }
        Ok(())
    }

    /// Regression target: the stored value, else derived from the points.
    pub fn target(&self) -> Result<f64> {
        match self.target_298k {
            Some(t) => Ok(t),
            None => conductivity_at_reference(&self.points),
        }
    }

    /// Solvent-aligned fields share their conformation, so they can be compared
    /// when rows are merged.
    fn same_mixture(&self, other: &MixtureRecord) -> bool {
        self.solvent_smiles == other.solvent_smiles
            && self.weight_fractions == other.weight_fractions
            && self.mol_weight_overrides == other.mol_weight_overrides
            && self.salt_smiles == other.salt_smiles
            && self.molality == other.molality
    }

    /// Copy with the 298 K target filled in and the points replaced by a
    /// single point at the reference temperature.
    pub fn prepared(&self) -> Result<MixtureRecord> {
        let target = self.target()?;
        let mut out = self.clone();
        out.points = vec![ConductivityPoint {
            temperature_k: REFERENCE_TEMPERATURE,
            log10_sigma: target,
        }];
        out.target_298k = Some(target);
        Ok(out)
    }
}

/// Seeded shuffle followed by a contiguous split at rounded ratio boundaries.
pub fn split_dataset<T: Clone>(
    items: &[T],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (a, b, c) = ratios;
    if !(a > 0.0 && b > 0.0 && c > 0.0 && (a + b + c).is_finite()) {
        return Err(Error::Data("split ratios must be positive".into()));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = items.len() as f64;
    let total = a + b + c;
    let first = ((n * a / total).round() as usize).min(items.len());
    let second = ((n * (a + b) / total).round() as usize).clamp(first, items.len());
    let pick = |r: &[usize]| r.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok((
        pick(&order[..first]),
        pick(&order[first..second]),
        pick(&order[second..]),
    ))
}

/// Builds each distinct (SMILES, override) graph once.
#[derive(Default)]
pub struct GraphCache {
    graphs: HashMap<(String, Option<u64>), Arc<MolecularGraph>>,
}

impl GraphCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, smiles: &str, mol_weight: Option<f64>) -> Result<Arc<MolecularGraph>> {
        let key = (smiles.to_string(), mol_weight.map(f64::to_bits));
        if let Some(g) = self.graphs.get(&key) {
            return Ok(Arc::clone(g));
        }
        let g = Arc::new(build_graph(smiles, mol_weight)?);
        self.graphs.insert(key, Arc::clone(&g));
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn mixture_input(&mut self, record: &MixtureRecord) -> Result<MixtureInput> {
        record.validate()?;
        let mut solvents = Vec::with_capacity(record.solvent_smiles.len());
        for ((s, w), m) in record
            .solvent_smiles
            .iter()
            .zip(&record.weight_fractions)
            .zip(&record.mol_weight_overrides)
        {
            solvents.push((self.get(s, *m)?, *w));
        }
        let salt = self.get(&record.salt_smiles, None)?;
        MixtureInput::new(solvents, salt, record.molality)
    }
}

/// Mixture inputs paired with their 298 K targets.
pub fn build_examples(
    records: &[MixtureRecord],
    cache: &mut GraphCache,
) -> Result<Vec<(MixtureInput, f64)>> {
    records
        .iter()
        .map(|r| {
            let input = cache
                .mixture_input(r)
                .map_err(|e| Error::Data(format!("mixture {}: {e}", r.mixture_id)))?;
            Ok((input, r.target()?))
        })
        .collect()
}
