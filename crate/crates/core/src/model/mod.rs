//! The mixture model: a per-molecule graph encoder, an aggregation over the
//! set of solvents, and a dense head that also sees the salt and molality.
//!
//! Two encoders run side by side: one for solvents and one for the salt. The
//! solvent representations are pooled into a single mixture vector by one of
//! three [`Variant`]s:
//!
//! * `molsets`: attention-modulated weighted sum. Each molecule gets
//!   `q = z Wq`, `k = z Wk`, `v = z Wv` and a scalar logit `q.k / sqrt(d_k)`.
//!   The logits are softmax-normalized across the set and the mixture vector
//!   is `sum_i w_i * score_i * v_i`.
//! * `wsum`: plain weighted sum `sum_i w_i z_i`.
//! * `concat`: representations and weights concatenated in input order and
//!   zero-padded to `max_solvents`. Order dependent.

mod checkpoint;

pub use checkpoint::{Checkpoint, StoredTensor, CHECKPOINT_FORMAT};

use std::collections::HashMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chem::{MolecularGraph, NODE_FEATURE_DIM};
use crate::error::{Error, Result};
use crate::nn::{ConvKind, GnnConfig, GnnEncoder, Mlp, ParamId, ParamStore};
use crate::tensor::{Tape, Tensor, TensorError, Var};

/// Weight fractions must sum to one within this tolerance.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Molsets,
    Wsum,
    Concat,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "molsets" => Ok(Variant::Molsets),
            "wsum" => Ok(Variant::Wsum),
            "concat" => Ok(Variant::Concat),
            _ => Err(format!("unknown variant {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub solvent_gnn: GnnConfig,
    pub salt_gnn: GnnConfig,
    pub attention_dim: usize,
    pub rho_hidden: Vec<usize>,
    pub max_solvents: usize,
}

impl ModelConfig {
    /// Tuned defaults for `kind`, shared by both encoders.
    pub fn tuned(kind: ConvKind, variant: Variant) -> Self {
        let (gnn, attention_dim) = GnnConfig::tuned(kind);
        Self {
            variant,
            solvent_gnn: gnn.clone(),
            salt_gnn: gnn,
            attention_dim,
            rho_hidden: vec![32, 16],
            max_solvents: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solvent_gnn.validate().map_err(Error::Model)?;
        self.salt_gnn.validate().map_err(Error::Model)?;
        if self.attention_dim == 0 || self.max_solvents == 0 || self.rho_hidden.contains(&0) {
            return Err(Error::Model(format!("invalid model dimensions: {self:?}")));
        }
        Ok(())
    }

    /// Width of the head input.
    pub fn rho_input_dim(&self) -> usize {
        let solvent = match self.variant {
            Variant::Molsets | Variant::Wsum => self.solvent_gnn.representation_dim,
            Variant::Concat => self.max_solvents * (self.solvent_gnn.representation_dim + 1),
        };
        solvent + self.salt_gnn.representation_dim + 1
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::tuned(ConvKind::GraphConv, Variant::Molsets)
    }
}

/// Query/key/value projections of the aggregation step.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub d_k: usize,
}

/// One mixture: solvents with weight fractions, a salt and its molality.
#[derive(Clone, Debug)]
pub struct MixtureInput {
    pub solvents: Vec<(Arc<MolecularGraph>, f64)>,
    pub salt: Arc<MolecularGraph>,
    pub molality: f64,
}

impl MixtureInput {
    pub fn new(
        solvents: Vec<(Arc<MolecularGraph>, f64)>,
        salt: Arc<MolecularGraph>,
        molality: f64,
    ) -> Result<Self> {
        let mix = Self {
            solvents,
            salt,
            molality,
        };
        mix.validate()?;
        Ok(mix)
    }

    pub fn validate(&self) -> Result<()> {
        if self.solvents.is_empty() {
            return Err(Error::Data("mixture has no solvents".into()));
        }
        if self.solvents.iter().any(|(_, w)| !(0.0..=1.0).contains(w)) {
            return Err(Error::Data("weight fraction outside [0, 1]".into()));
        }
        let total: f64 = self.solvents.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::Data(format!("weight fractions sum to {total}, not 1")));
        }
        if !(self.molality >= 0.0 && self.molality.is_finite()) {
            return Err(Error::Data(format!("invalid molality {}", self.molality)));
        }
        Ok(())
    }

    /// Solvent indices sorted by a deterministic key (SMILES, then weight).
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.solvents.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ga, wa) = &self.solvents[a];
            let (gb, wb) = &self.solvents[b];
            ga.cache_key()
                .cmp(&gb.cache_key())
                .then(wa.total_cmp(wb))
        });
        idx
    }
}

/// A cached molecule representation, tagged with its graph cache key.
#[derive(Clone, Debug, PartialEq)]
pub struct MoleculeEmbedding {
    pub key: String,
    pub z: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Pathway {
    Solvent,
    Salt,
}

/// Per-tape memo so a molecule shared by several mixtures in one batch is
/// embedded once.
#[derive(Default)]
pub struct EmbeddingMemo {
    vars: HashMap<(Pathway, String), Var>,
}

/// Solvent-order handling during aggregation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ordering {
    /// Sort solvents canonically first (bit-reproducible).
    Canonical,
    /// Use the order given.
    AsGiven,
}

/// Complete parameter set and architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct MolSetsModel {
    pub config: ModelConfig,
    pub seed: u64,
    pub store: ParamStore,
    pub phi_solvent: GnnEncoder,
    pub phi_salt: GnnEncoder,
    /// Present only for the attention variant.
    pub attention: Option<AttentionParams>,
    pub rho: Mlp,
}

impl MolSetsModel {
    /// Freshly initialized model; identical `(config, seed)` give identical
    /// parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let phi_solvent = GnnEncoder::new(
            &mut store,
            "phi_solvent",
            &config.solvent_gnn,
            NODE_FEATURE_DIM,
            &mut rng,
        );
        let phi_salt = GnnEncoder::new(
            &mut store,
            "phi_salt",
            &config.salt_gnn,
            NODE_FEATURE_DIM,
            &mut rng,
        );
        let r = config.solvent_gnn.representation_dim;
        let d_k = config.attention_dim;
        let attention = (config.variant == Variant::Molsets).then(|| AttentionParams {
            w_q: store.add_uniform("attention.w_q", r, d_k, &mut rng),
            w_k: store.add_uniform("attention.w_k", r, d_k, &mut rng),
            w_v: store.add_uniform("attention.w_v", r, r, &mut rng),
            d_k,
        });
        let rho = Mlp::new(
            &mut store,
            "rho",
            config.rho_input_dim(),
            &config.rho_hidden,
            1,
            &mut rng,
        );
        Ok(Self {
            config,
            seed,
            store,
            phi_solvent,
            phi_salt,
            attention,
            rho,
        })
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    /// Parameter-name prefixes that group tensors by module.
    pub fn parameter_groups(&self) -> Vec<(String, Vec<ParamId>)> {
        let mut groups: Vec<(String, Vec<ParamId>)> = Vec::new();
        for id in self.store.ids() {
            let name = self.store.name(id);
            let group = name.split('.').next().unwrap_or(name).to_string();
            match groups.iter_mut().find(|(g, _)| *g == group) {
                Some((_, ids)) => ids.push(id),
                None => groups.push((group, vec![id])),
            }
        }
        groups
    }

    fn check_mixture(&self, mix: &MixtureInput) -> Result<()> {
        mix.validate()?;
        if mix.solvents.len() > self.config.max_solvents {
            return Err(Error::Data(format!(
                "{} solvents exceed the configured maximum of {}",
                mix.solvents.len(),
                self.config.max_solvents
            )));
        }
        Ok(())
    }

    fn embed_memo(
        &self,
        tape: &mut Tape,
        params: &[Var],
        memo: &mut EmbeddingMemo,
        pathway: Pathway,
        graph: &MolecularGraph,
    ) -> Result<Var, TensorError> {
        let key = (pathway, graph.cache_key());
        if let Some(&v) = memo.vars.get(&key) {
            return Ok(v);
        }
        let encoder = match pathway {
            Pathway::Solvent => &self.phi_solvent,
            Pathway::Salt => &self.phi_salt,
        };
        let z = encoder.embed(tape, params, graph)?;
        memo.vars.insert(key, z);
        Ok(z)
    }

    /// Records the prediction for `mix` (a `1 x 1` output) on `tape`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &[Var],
        memo: &mut EmbeddingMemo,
        mix: &MixtureInput,
        ordering: Ordering,
    ) -> Result<Var> {
        self.check_mixture(mix)?;
        let mut zs = Vec::with_capacity(mix.solvents.len());
        for (g, w) in &mix.solvents {
            zs.push((self.embed_memo(tape, params, memo, Pathway::Solvent, g)?, *w));
        }
        let keys: Vec<String> = mix.solvents.iter().map(|(g, _)| g.cache_key()).collect();
        let salt = self.embed_memo(tape, params, memo, Pathway::Salt, &mix.salt)?;
        self.forward_from_embeddings(tape, params, &zs, &keys, salt, mix.molality, ordering)
    }

    #[allow(clippy::too_many_arguments)]
    fn forward_from_embeddings(
        &self,
        tape: &mut Tape,
        params: &[Var],
        solvents: &[(Var, f64)],
        keys: &[String],
        salt: Var,
        molality: f64,
        ordering: Ordering,
    ) -> Result<Var> {
        let mut order: Vec<usize> = (0..solvents.len()).collect();
        if ordering == Ordering::Canonical && self.config.variant != Variant::Concat {
            order.sort_by(|&a, &b| {
                keys[a]
                    .cmp(&keys[b])
                    .then(solvents[a].1.total_cmp(&solvents[b].1))
            });
        }
        let ordered: Vec<(Var, f64)> = order.iter().map(|&i| solvents[i]).collect();
        let mixture = self.solvent_block(tape, params, &ordered)?;
        Ok(transform_head(tape, params, &self.rho, mixture, salt, molality)?)
    }

    /// The solvent part of the head input for the configured variant.
    fn solvent_block(
        &self,
        tape: &mut Tape,
        params: &[Var],
        solvents: &[(Var, f64)],
    ) -> Result<Var> {
        let block = match self.config.variant {
            Variant::Molsets => {
                let attention = self
                    .attention
                    .as_ref()
                    .ok_or_else(|| Error::Model("attention parameters missing".into()))?;
                aggregate_mixture(tape, params, attention, solvents)?
            }
            Variant::Wsum => weighted_sum(tape, solvents)?,
            Variant::Concat => {
                concat_padded(tape, solvents, self.config.max_solvents, self.config.solvent_gnn.representation_dim)?
            }
        };
        Ok(block)
    }

    /// Prediction of log10 conductivity (S/cm) for `mix`.
    pub fn predict(&self, mix: &MixtureInput) -> Result<f64> {
        self.predict_ordered(mix, Ordering::Canonical)
    }

    pub fn predict_ordered(&self, mix: &MixtureInput, ordering: Ordering) -> Result<f64> {
        let mut tape = Tape::new();
        let params = self.store.register(&mut tape);
        let out = self.forward(&mut tape, &params, &mut EmbeddingMemo::default(), mix, ordering)?;
        let y = tape.value(out).data()[0];
        if !y.is_finite() {
            return Err(Error::Numeric(format!("non-finite prediction {y}")));
        }
        Ok(y)
    }

    /// The mixture representation fed to the head, before salt and molality
    /// are appended.
    pub fn export_representation(&self, mix: &MixtureInput) -> Result<Vec<f64>> {
        self.check_mixture(mix)?;
        let mut tape = Tape::new();
        let params = self.store.register(&mut tape);
        let mut memo = EmbeddingMemo::default();
        let mut zs = Vec::new();
        let mut order = mix.canonical_order();
        if self.config.variant == Variant::Concat {
            order = (0..mix.solvents.len()).collect();
        }
        for i in order {
            let (g, w) = &mix.solvents[i];
            zs.push((self.embed_memo(&mut tape, &params, &mut memo, Pathway::Solvent, g)?, *w));
        }
        let block = self.solvent_block(&mut tape, &params, &zs)?;
        Ok(tape.value(block).data().to_vec())
    }

    pub fn embed_solvent(&self, graph: &MolecularGraph) -> Result<MoleculeEmbedding> {
        self.embed_standalone(&self.phi_solvent, graph)
    }

    pub fn embed_salt(&self, graph: &MolecularGraph) -> Result<MoleculeEmbedding> {
        self.embed_standalone(&self.phi_salt, graph)
    }

    fn embed_standalone(
        &self,
        encoder: &GnnEncoder,
        graph: &MolecularGraph,
    ) -> Result<MoleculeEmbedding> {
        let mut tape = Tape::new();
        let params = self.store.register(&mut tape);
        let z = encoder.embed(&mut tape, &params, graph)?;
        Ok(MoleculeEmbedding {
            key: graph.cache_key(),
            z: tape.value(z).clone(),
        })
    }

    /// Prediction from precomputed embeddings. Bit-identical to [`predict`]
    /// on the same molecules.
    ///
    /// [`predict`]: MolSetsModel::predict
    pub fn predict_from_embeddings(
        &self,
        solvents: &[(&MoleculeEmbedding, f64)],
        salt: &MoleculeEmbedding,
        molality: f64,
    ) -> Result<f64> {
        if solvents.is_empty() || solvents.len() > self.config.max_solvents {
            return Err(Error::Data(format!("invalid solvent count {}", solvents.len())));
        }
        let mut tape = Tape::new();
        let params = self.store.register(&mut tape);
        let zs: Vec<(Var, f64)> = solvents
            .iter()
            .map(|(e, w)| (tape.constant(e.z.clone()), *w))
            .collect();
        let keys: Vec<String> = solvents.iter().map(|(e, _)| e.key.clone()).collect();
        let s = tape.constant(salt.z.clone());
        let out = self.forward_from_embeddings(
            &mut tape,
            &params,
            &zs,
            &keys,
            s,
            molality,
            Ordering::Canonical,
        )?;
        Ok(tape.value(out).data()[0])
    }

    /// Mean squared error over `batch`, recorded on `tape`.
    pub fn batch_loss(
        &self,
        tape: &mut Tape,
        params: &[Var],
        batch: &[(&MixtureInput, f64)],
    ) -> Result<Var> {
        let mut memo = EmbeddingMemo::default();
        let mut preds = Vec::with_capacity(batch.len());
        for (mix, _) in batch {
            let y = self.forward(tape, params, &mut memo, mix, Ordering::Canonical)?;
            preds.push(tape.reshape(y, &[1])?);
        }
        let preds = tape.concat(&preds, 0)?;
        let targets = tape.constant(Tensor::vector(batch.iter().map(|(_, t)| *t).collect()));
        Ok(mse_loss(tape, preds, targets)?)
    }
}

/// Mean of squared differences between `preds` and `targets`.
pub fn mse_loss(tape: &mut Tape, preds: Var, targets: Var) -> Result<Var, TensorError> {
    let diff = tape.sub(preds, targets)?;
    let sq = tape.mul(diff, diff)?;
    tape.mean(sq)
}

/// Attention-modulated weighted sum of `1 x r` representations.
///
/// Scores are a softmax across the whole set of scalar logits
/// `(z Wq).(z Wk) / sqrt(d_k)`; the result is `sum_i w_i score_i (z_i Wv)`.
pub fn aggregate_mixture(
    tape: &mut Tape,
    params: &[Var],
    attention: &AttentionParams,
    solvents: &[(Var, f64)],
) -> Result<Var, TensorError> {
    if solvents.is_empty() {
        return Err(TensorError::Contract("aggregation over an empty set"));
    }
    let inv_sqrt_dk = 1.0 / (attention.d_k as f64).sqrt();
    let mut logits = Vec::with_capacity(solvents.len());
    let mut values = Vec::with_capacity(solvents.len());
    for &(z, _) in solvents {
        let q = tape.matmul(z, params[attention.w_q.0])?;
        let k = tape.matmul(z, params[attention.w_k.0])?;
        let qk = tape.mul(q, k)?;
        let dot = tape.sum(qk)?;
        logits.push(tape.scale(dot, inv_sqrt_dk)?);
        values.push(tape.matmul(z, params[attention.w_v.0])?);
    }
    let logits = tape.concat(&logits, 0)?;
    let scores = tape.softmax(logits)?;
    let mut total: Option<Var> = None;
    for (i, (&(_, w), v)) in solvents.iter().zip(values).enumerate() {
        let score = tape.slice_rows(scores, i, 1)?;
        let modulated = tape.mul(score, v)?;
        let term = tape.scale(modulated, w)?;
        total = Some(match total {
            Some(t) => tape.add(t, term)?,
            None => term,
        });
    }
    Ok(total.expect("non-empty"))
}

/// `sum_i w_i z_i`.
pub fn weighted_sum(tape: &mut Tape, solvents: &[(Var, f64)]) -> Result<Var, TensorError> {
    let mut total: Option<Var> = None;
    for &(z, w) in solvents {
        let term = tape.scale(z, w)?;
        total = Some(match total {
            Some(t) => tape.add(t, term)?,
            None => term,
        });
    }
    total.ok_or(TensorError::Contract("aggregation over an empty set"))
}

/// `[z_1 .. z_m, 0-pads, w_1 .. w_m, 0-pads]` in input order.
pub fn concat_padded(
    tape: &mut Tape,
    solvents: &[(Var, f64)],
    max_solvents: usize,
    rep_dim: usize,
) -> Result<Var, TensorError> {
    if solvents.is_empty() || solvents.len() > max_solvents {
        return Err(TensorError::Contract("solvent count outside 1..=max_solvents"));
    }
    let mut parts: Vec<Var> = solvents.iter().map(|&(z, _)| z).collect();
    let pads = max_solvents - solvents.len();
    if pads > 0 {
        parts.push(tape.constant(Tensor::zeros(&[1, pads * rep_dim])));
    }
    let mut weights: Vec<f64> = solvents.iter().map(|&(_, w)| w).collect();
    weights.resize(max_solvents, 0.0);
    parts.push(tape.constant(Tensor::new(vec![1, max_solvents], weights)?));
    tape.concat(&parts, 1)
}

/// Dense head on `[mixture, salt, molality]`.
pub fn transform_head(
    tape: &mut Tape,
    params: &[Var],
    rho: &Mlp,
    mixture: Var,
    salt: Var,
    molality: f64,
) -> Result<Var, TensorError> {
    let m = tape.constant(Tensor::from_rows(&[vec![molality]]));
    let input = tape.concat(&[mixture, salt, m], 1)?;
    rho.forward(tape, params, input)
}
