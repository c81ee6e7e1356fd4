mod common;


use molsets::data::{build_examples, generate_synthetic, GraphCache};
use molsets::model::{MixtureInput, ModelConfig, MolSetsModel, Variant};
use molsets::nn::ConvKind;
use molsets::train::{evaluate_loss, train, TrainConfig};
use molsets::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use common::{micro_config, Pool};

fn synthetic(n: usize, seed: u64) -> Vec<(MixtureInput, f64)> {
    let records = generate_synthetic(n, seed, 0.0).unwrap();
    build_examples(&records, &mut GraphCache::new()).unwrap()
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        max_epochs: 6,
        batch_size: 8,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn memorizes_a_small_set() {
    let data = synthetic(20, 1);
    let mut cfg = micro_config(ConvKind::GraphConv, Variant::Molsets);
    for g in [&mut cfg.solvent_gnn, &mut cfg.salt_gnn] {
        g.hidden_dim = 16;
        g.representation_dim = 8;
    }
    cfg.attention_dim = 8;
    cfg.rho_hidden = vec![32, 16];
    let model = MolSetsModel::new(cfg, 3).unwrap();
    let tc = TrainConfig {
        lr: 3e-3,
        weight_decay: 0.0,
        max_epochs: 500,
        batch_size: 4,
        early_stop_patience: 500,
        scheduler_patience: 30,
        ..TrainConfig::default()
    };
    let out = train(model, &data, &data, &tc).unwrap();
    assert!(out.history.len() <= 500);
    let mse = evaluate_loss(&out.model, &data).unwrap();
    assert!(mse < 1e-2, "training mse {mse}");
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let data = synthetic(12, 2);
    let model = MolSetsModel::new(ModelConfig::default(), 4).unwrap();
    let before = model.store.tensors().to_vec();
    let tc = TrainConfig {
        lr: 0.0,
        ..quick_config()
    };
    let out = train(model, &data[..8], &data[8..], &tc).unwrap();
    assert_eq!(out.model.store.tensors(), before.as_slice());
    let first = out.history[0].val_loss;
    assert!(out.history.iter().all(|r| r.val_loss == first && r.lr == 0.0));
}

#[test]
fn same_seed_same_history() {
    let data = synthetic(24, 3);
    let run = || {
        let model = MolSetsModel::new(ModelConfig::tuned(ConvKind::GatConv, Variant::Molsets), 9).unwrap();
        train(model, &data[..16], &data[16..], &quick_config()).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.store.tensors(), b.model.store.tensors());
    let other = {
        let model = MolSetsModel::new(ModelConfig::tuned(ConvKind::GatConv, Variant::Molsets), 9).unwrap();
        let tc = TrainConfig {
            seed: 6,
            ..quick_config()
        };
        train(model, &data[..16], &data[16..], &tc).unwrap()
    };
    assert_ne!(a.history, other.history);
}

#[test]
fn returned_model_is_the_best_epoch() {
    let data = synthetic(30, 4);
    let model = MolSetsModel::new(ModelConfig::default(), 1).unwrap();
    let tc = TrainConfig {
        max_epochs: 15,
        early_stop_patience: 3,
        ..quick_config()
    };
    let out = train(model, &data[..20], &data[20..], &tc).unwrap();
    let best = out.best_epoch;
    let min = out.history.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(out.history[best].val_loss, min);
    assert_eq!(evaluate_loss(&out.model, &data[20..]).unwrap(), out.history[best].val_loss);
    if out.stopped_early {
        assert_eq!(out.history.len() - 1 - best, 3);
    }
}

#[test]
fn linear_model_reaches_the_noise_floor() {
    let pool = Pool::load();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let sigma = 0.05;
    let noise = Normal::new(0.0, sigma).unwrap();
    // Target is affine in molality, which enters the readout directly.
    let data: Vec<(MixtureInput, f64)> = (0..60)
        .map(|_| {
            let k = rng.random_range(1..=3);
            let mix = pool.mixture(&mut rng, k);
            let y = -2.5 + 0.8 * mix.molality + noise.sample(&mut rng);
            (mix, y)
        })
        .collect();
    let mut cfg = ModelConfig::tuned(ConvKind::GraphConv, Variant::Wsum);
    for g in [&mut cfg.solvent_gnn, &mut cfg.salt_gnn] {
        g.num_layers = 1;
    }
    cfg.rho_hidden = vec![];
    let model = MolSetsModel::new(cfg, 2).unwrap();
    let tc = TrainConfig {
        lr: 1e-2,
        weight_decay: 0.0,
        max_epochs: 400,
        batch_size: 10,
        early_stop_patience: 400,
        ..TrainConfig::default()
    };
    let out = train(model, &data, &data, &tc).unwrap();
    let mse = evaluate_loss(&out.model, &data).unwrap();
    assert!(mse <= 10.0 * sigma * sigma, "training mse {mse}, floor {}", sigma * sigma);
}

#[test]
fn non_finite_target_aborts_with_diagnostics() {
    let mut data = synthetic(10, 5);
    data[3].1 = f64::NAN;
    let model = MolSetsModel::new(ModelConfig::default(), 0).unwrap();
    let err = train(model, &data[..8], &data[8..], &quick_config()).unwrap_err();
    match err {
        Error::Numeric(msg) => {
            assert!(msg.contains("epoch 0") && msg.contains("batch") && msg.contains("lr"), "{msg}");
        }
        other => panic!("expected numeric failure, got {other}"),
    }
}

#[test]
fn exploding_learning_rate_is_a_numeric_failure() {
    let data = synthetic(16, 6);
    let model = MolSetsModel::new(ModelConfig::default(), 0).unwrap();
    let tc = TrainConfig {
        lr: 1e300,
        ..quick_config()
    };
    let err = train(model, &data[..12], &data[12..], &tc).unwrap_err();
    assert!(matches!(err, Error::Numeric(_)), "{err}");
}

#[test]
fn checkpoint_preserves_trained_predictions() {
    let data = synthetic(16, 7);
    let model = MolSetsModel::new(ModelConfig::tuned(ConvKind::Dmpnn, Variant::Concat), 8).unwrap();
    let out = train(model, &data[..12], &data[12..], &quick_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    out.model.save(&path).unwrap();
    let back = MolSetsModel::load(&path).unwrap();
    for (mix, _) in &data {
        assert_eq!(out.model.predict(mix).unwrap().to_bits(), back.predict(mix).unwrap().to_bits());
    }
    let resaved = dir.path().join("again.json");
    back.save(&resaved).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&resaved).unwrap());
}
