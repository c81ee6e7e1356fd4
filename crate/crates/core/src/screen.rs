//! Binary-mixture screening and the solvent-order permutation experiment.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chem::build_graph;
use crate::data::{GraphCache, MixtureRecord};
use crate::error::{Error, Result};
use crate::model::{MixtureInput, MolSetsModel, MoleculeEmbedding};

pub const SCREEN_MOLALITY: f64 = 1.0;
pub const SCREEN_HEADER: [&str; 5] = [
    "solvent_1",
    "solvent_2",
    "salt",
    "molality",
    "predicted_log10_conductivity",
];

/// Equal-weight binary mixture with one salt at 1 mol/kg.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSpec {
    pub solvent_a: String,
    pub solvent_b: String,
    pub weights: (f64, f64),
    pub salt: String,
    pub molality: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub candidate: CandidateSpec,
    pub predicted_log10_sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkippedCandidate {
    pub candidate: CandidateSpec,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScreeningReport {
    /// Sorted by descending prediction.
    pub results: Vec<ScreeningResult>,
    pub skipped: Vec<SkippedCandidate>,
}

fn distinct_sorted(items: &[String], what: &str) -> Result<Vec<String>> {
    let set: BTreeSet<&String> = items.iter().collect();
    if set.len() != items.len() {
        return Err(Error::Data(format!("duplicate {what} entries")));
    }
    Ok(set.into_iter().cloned().collect())
}

/// All unordered distinct solvent pairs times all salts, in lexicographic
/// order of `(solvent_a, solvent_b, salt)` with `solvent_a < solvent_b`.
pub fn enumerate_binary_candidates(solvents: &[String], salts: &[String]) -> Result<Vec<CandidateSpec>> {
    if solvents.len() < 2 || salts.is_empty() {
        return Err(Error::Data("need at least 2 solvents and 1 salt".into()));
    }
    let solvents = distinct_sorted(solvents, "solvent")?;
    let salts = distinct_sorted(salts, "salt")?;
    let mut out = Vec::with_capacity(solvents.len() * (solvents.len() - 1) / 2 * salts.len());
    for (i, a) in solvents.iter().enumerate() {
        for b in &solvents[i + 1..] {
            for s in &salts {
                out.push(CandidateSpec {
                    solvent_a: a.clone(),
                    solvent_b: b.clone(),
                    weights: (0.5, 0.5),
                    salt: s.clone(),
                    molality: SCREEN_MOLALITY,
                });
            }
        }
    }
    Ok(out)
}

/// Newline-delimited SMILES; blank lines and `#` comments are ignored.
pub fn read_smiles_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

type EmbeddingCache = HashMap<String, std::result::Result<MoleculeEmbedding, String>>;

fn cached<'c>(
    cache: &'c mut EmbeddingCache,
    smiles: &str,
    embed: impl FnOnce(&str) -> Result<MoleculeEmbedding>,
) -> std::result::Result<&'c MoleculeEmbedding, String> {
    cache
        .entry(smiles.to_string())
        .or_insert_with(|| embed(smiles).map_err(|e| e.to_string()))
        .as_ref()
        .map_err(|e| format!("{smiles}: {e}"))
}

fn rank(results: &mut [ScreeningResult]) {
    // stable, so equal predictions keep canonical candidate order
    results.sort_by(|a, b| b.predicted_log10_sigma.total_cmp(&a.predicted_log10_sigma));
}

/// Predicts every candidate from per-molecule embeddings computed once.
/// Candidates whose molecules fail to parse or predict are skipped.
pub fn run_screening(model: &MolSetsModel, candidates: &[CandidateSpec]) -> ScreeningReport {
    let mut solvent_cache = EmbeddingCache::new();
    let mut salt_cache = EmbeddingCache::new();
    let mut report = ScreeningReport::default();
    for cand in candidates {
        let outcome = (|| {
            let embed_solvent = |s: &str| model.embed_solvent(&build_graph(s, None)?);
            let embed_salt = |s: &str| model.embed_salt(&build_graph(s, None)?);
            let a = cached(&mut solvent_cache, &cand.solvent_a, embed_solvent)?.clone();
            let b = cached(&mut solvent_cache, &cand.solvent_b, embed_solvent)?.clone();
            let salt = cached(&mut salt_cache, &cand.salt, embed_salt)?;
            let y = model
                .predict_from_embeddings(&[(&a, cand.weights.0), (&b, cand.weights.1)], salt, cand.molality)
                .map_err(|e| e.to_string())?;
            if !y.is_finite() {
                return Err(format!("non-finite prediction {y}"));
            }
            Ok(y)
        })();
        match outcome {
            Ok(y) => report.results.push(ScreeningResult {
                candidate: cand.clone(),
                predicted_log10_sigma: y,
            }),
            Err(reason) => {
                warn!(
                    "skipping candidate {} + {} / {}: {reason}",
                    cand.solvent_a, cand.solvent_b, cand.salt
                );
                report.skipped.push(SkippedCandidate {
                    candidate: cand.clone(),
                    reason,
                });
            }
        }
    }
    rank(&mut report.results);
    report
}

/// Same ranking through full per-candidate forward passes, no embedding
/// reuse across candidates.
pub fn run_screening_uncached(model: &MolSetsModel, candidates: &[CandidateSpec]) -> ScreeningReport {
    let mut report = ScreeningReport::default();
    for cand in candidates {
        let outcome = (|| {
            let mut graphs = GraphCache::new();
            let mix = MixtureInput::new(
                vec![
                    (graphs.get(&cand.solvent_a, None)?, cand.weights.0),
                    (graphs.get(&cand.solvent_b, None)?, cand.weights.1),
                ],
                graphs.get(&cand.salt, None)?,
                cand.molality,
            )?;
            model.predict(&mix)
        })();
        match outcome {
            Ok(y) => report.results.push(ScreeningResult {
                candidate: cand.clone(),
                predicted_log10_sigma: y,
            }),
            Err(e) => report.skipped.push(SkippedCandidate {
                candidate: cand.clone(),
                reason: e.to_string(),
            }),
        }
    }
    rank(&mut report.results);
    report
}

pub fn write_screening(writer: impl Write, results: &[ScreeningResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SCREEN_HEADER)?;
    for r in results {
        let c = &r.candidate;
        w.write_record([
            c.solvent_a.as_str(),
            c.solvent_b.as_str(),
            c.salt.as_str(),
            &format!("{}", c.molality),
            &format!("{}", r.predicted_log10_sigma),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reorders the solvent-aligned fields of `record` by a seeded,
/// non-identity permutation. The target and points are untouched.
pub fn permute_mixture(record: &MixtureRecord, seed: u64) -> Result<MixtureRecord> {
    let n = record.solvent_smiles.len();
    if n < 2 {
        return Err(Error::Data(format!(
            "mixture {} has {n} solvent(s); permutation needs at least 2",
            record.mixture_id
        )));
    }
    let identity: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm = identity.clone();
    while perm == identity {
        perm.shuffle(&mut rng);
    }
    let mut out = record.clone();
    out.solvent_smiles = perm.iter().map(|&i| record.solvent_smiles[i].clone()).collect();
    out.weight_fractions = perm.iter().map(|&i| record.weight_fractions[i]).collect();
    out.mol_weight_overrides = perm.iter().map(|&i| record.mol_weight_overrides[i]).collect();
    Ok(out)
}
