#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use molsets::chem::MolecularGraph;
use molsets::data::GraphCache;
use molsets::model::{MixtureInput, ModelConfig, Variant};
use molsets::nn::ConvKind;
use rand::seq::index::sample;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn smiles_list(name: &str) -> Vec<String> {
    molsets::screen::read_smiles_list(fixture(name)).unwrap()
}

pub struct Pool {
    pub solvents: Vec<Arc<MolecularGraph>>,
    pub salts: Vec<Arc<MolecularGraph>>,
}

impl Pool {
    pub fn load() -> Self {
        let mut cache = GraphCache::new();
        let mut build = |name: &str| {
            smiles_list(name)
                .iter()
                .map(|s| cache.get(s, None).unwrap())
                .collect::<Vec<_>>()
        };
        Self {
            solvents: build("solvents.txt"),
            salts: build("salts.txt"),
        }
    }

    /// `k` distinct solvents with random weights summing to one.
    pub fn mixture<R: Rng>(&self, rng: &mut R, k: usize) -> MixtureInput {
        let picks = sample(rng, self.solvents.len(), k).into_vec();
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let head: f64 = w[..k - 1].iter().sum();
        w[k - 1] = 1.0 - head;
        let solvents = picks
            .iter()
            .zip(w)
            .map(|(&i, w)| (Arc::clone(&self.solvents[i]), w))
            .collect();
        let salt = Arc::clone(&self.salts[rng.random_range(0..self.salts.len())]);
        MixtureInput::new(solvents, salt, rng.random_range(0.5..2.0)).unwrap()
    }
}

/// `mix` with its solvents reordered by `perm`.
pub fn reorder(mix: &MixtureInput, perm: &[usize]) -> MixtureInput {
    MixtureInput::new(
        perm.iter().map(|&i| mix.solvents[i].clone()).collect(),
        Arc::clone(&mix.salt),
        mix.molality,
    )
    .unwrap()
}

/// Model with every width at most 4, for finite-difference checks.
pub fn micro_config(kind: ConvKind, variant: Variant) -> ModelConfig {
    let mut cfg = ModelConfig::tuned(kind, variant);
    for g in [&mut cfg.solvent_gnn, &mut cfg.salt_gnn] {
        g.num_layers = 2;
        g.hidden_dim = 4;
        g.representation_dim = 4;
    }
    cfg.attention_dim = 3;
    cfg.rho_hidden = vec![4];
    cfg
}

/// Per parameter group: (name, analytic norm, relative error against
/// central differences).
pub fn gradient_check(
    model: &molsets::model::MolSetsModel,
    batch: &[(&MixtureInput, f64)],
) -> Vec<(String, f64, f64)> {
    use molsets::tensor::{finite_diff_gradient, Tape, Tensor};

    let mut tape = Tape::new();
    let params = model.store.register(&mut tape);
    let loss = model.batch_loss(&mut tape, &params, batch).unwrap();
    let grads = tape.backward(loss).unwrap();
    let analytic: Vec<Tensor> = params.iter().map(|&p| grads.get(&tape, p)).collect();

    let mut probe = model.clone();
    let numeric = finite_diff_gradient(
        |ts: &[Tensor]| {
            probe.store.tensors_mut().clone_from_slice(ts);
            let mut t = Tape::new();
            let ps = probe.store.register(&mut t);
            let l = probe.batch_loss(&mut t, &ps, batch).unwrap();
            t.value(l).data()[0]
        },
        model.store.tensors(),
        1e-6,
    );

    model
        .parameter_groups()
        .into_iter()
        .map(|(name, ids)| {
            let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
            for id in ids {
                let a = analytic[id.index()].data();
                let n = numeric[id.index()].data();
                for (x, y) in a.iter().zip(n) {
                    diff += (x - y) * (x - y);
                    na += x * x;
                    nn += y * y;
                }
            }
            let scale = na.sqrt().max(nn.sqrt()).max(1e-300);
            (name, na.sqrt(), diff.sqrt() / scale)
        })
        .collect()
}
