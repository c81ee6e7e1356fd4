//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::time::{Duration, Instant};

use molsets::chem::{build_graph, parse_smiles};
use molsets::data::{
    arrhenius_fit, build_examples, conductivity_at_reference, generate_synthetic, load_dataset,
    write_dataset, ConductivityPoint, GraphCache, LoadMode, MixtureRecord,
};
use molsets::model::{ModelConfig, MolSetsModel, Ordering, Variant};
use molsets::nn::ConvKind;
use molsets::screen::{enumerate_binary_candidates, run_screening, write_screening};
use molsets::train::{evaluate, pearson, spearman, train, write_history, TrainConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{gradient_check, micro_config, reorder, smiles_list, Pool};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn non_identity_perm<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let id: Vec<usize> = (0..n).collect();
    let mut p = id.clone();
    while p == id {
        p.shuffle(rng);
    }
    p
}

const INVARIANCE_TOL: f64 = 1e-9;
const SWAP_DIFF: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-4;
const ARRHENIUS_TOL: f64 = 1e-10;
const METRIC_TOL: f64 = 1e-12;
const CORRELATION_FLOOR: f64 = 0.9;

fn c1_invariance(pool: &Pool) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        let kind = ConvKind::ALL[trial as usize % ConvKind::ALL.len()];
        let model = MolSetsModel::new(ModelConfig::tuned(kind, Variant::Molsets), 1000 + trial).unwrap();
        let k = rng.random_range(2..=4);
        let mix = pool.mixture(&mut rng, k);
        let perm = non_identity_perm(&mut rng, k);
        let permuted = reorder(&mix, &perm);
        for ordering in [Ordering::AsGiven, Ordering::Canonical] {
            let a = model.predict_ordered(&mix, ordering).unwrap();
            let b = model.predict_ordered(&permuted, ordering).unwrap();
            worst = worst.max((a - b).abs());
        }
    }
    outcome(
        worst <= INVARIANCE_TOL,
        format!("100 random models, 2-4 solvents: max |diff| = {worst:.3e} (tol {INVARIANCE_TOL:e})"),
    )
}

fn c2_concat_swap(pool: &Pool) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut differing = 0;
    for trial in 0..100u64 {
        let model = MolSetsModel::new(ModelConfig::tuned(ConvKind::GraphConv, Variant::Concat), 2000 + trial).unwrap();
        let k = rng.random_range(2..=4);
        let mix = pool.mixture(&mut rng, k);
        let perm = non_identity_perm(&mut rng, k);
        let a = model.predict_ordered(&mix, Ordering::AsGiven).unwrap();
        let b = model.predict_ordered(&reorder(&mix, &perm), Ordering::AsGiven).unwrap();
        if (a - b).abs() > SWAP_DIFF {
            differing += 1;
        }
    }
    outcome(
        differing >= 90,
        format!("{differing}/100 reorderings changed the concat prediction by > {SWAP_DIFF:e} (need >= 90)"),
    )
}

fn c3_gradients(pool: &Pool) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    let mut zero_groups = Vec::new();
    let mut checked = 0;
    let mut cases: Vec<(ConvKind, Variant)> = ConvKind::ALL.iter().map(|&k| (k, Variant::Molsets)).collect();
    cases.push((ConvKind::GraphConv, Variant::Wsum));
    cases.push((ConvKind::GraphConv, Variant::Concat));
    for (i, (kind, variant)) in cases.into_iter().enumerate() {
        let model = MolSetsModel::new(micro_config(kind, variant), 300 + i as u64).unwrap();
        let mixes: Vec<_> = (0..3).map(|j| pool.mixture(&mut rng, 2 + j % 3)).collect();
        let batch: Vec<_> = mixes.iter().zip([-2.0, -1.0, -3.0]).collect();
        for (name, norm, rel) in gradient_check(&model, &batch) {
            checked += 1;
            worst = worst.max(rel);
            if norm == 0.0 {
                zero_groups.push(format!("{}/{name}", kind.name()));
            }
        }
    }
    outcome(
        worst <= GRAD_TOL && zero_groups.is_empty(),
        format!(
            "{checked} parameter groups over 7 micro-models: max rel err = {worst:.3e} (tol {GRAD_TOL:e}); zero-gradient groups: {zero_groups:?}"
        ),
    )
}

fn c4_arrhenius() -> Outcome {
    let pts = [
        ConductivityPoint { temperature_k: 300.0, log10_sigma: -2.0 },
        ConductivityPoint { temperature_k: 250.0, log10_sigma: -3.0 },
    ];
    let fit = arrhenius_fit(&pts).unwrap();
    // two-point closed form, kept independent of the regression code
    let k_oracle = (-2.0 - -3.0) / (1.0 / 300.0 - 1.0 / 250.0);
    let b_oracle = -2.0 - k_oracle / 300.0;
    let at_298 = conductivity_at_reference(&pts).unwrap();
    let expected_298 = -2.033_557_046_979_866;
    let ok = (fit.slope_k + 1500.0).abs() <= ARRHENIUS_TOL
        && (fit.intercept_b - 3.0).abs() <= ARRHENIUS_TOL
        && (fit.slope_k - k_oracle).abs() <= ARRHENIUS_TOL
        && (fit.intercept_b - b_oracle).abs() <= ARRHENIUS_TOL
        && (at_298 - expected_298).abs() <= ARRHENIUS_TOL;
    outcome(
        ok,
        format!(
            "k = {:.12}, b = {:.12}, sigma(298 K) = {:.13} (tol {ARRHENIUS_TOL:e})",
            fit.slope_k, fit.intercept_b, at_298
        ),
    )
}

fn c5_enumeration() -> Outcome {
    let solvents = smiles_list("solvents.txt");
    let salts = smiles_list("salts.txt");
    let n = enumerate_binary_candidates(&solvents, &salts).unwrap().len();
    outcome(
        solvents.len() == 28 && salts.len() == 30 && n == 11340,
        format!("{} solvents x {} salts -> {n} candidates (expected 11340)", solvents.len(), salts.len()),
    )
}

fn c6_metrics() -> Outcome {
    let p = pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
    let s = spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 15.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(3..40);
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let a = rng.random_range(0.1..10.0);
        let c = rng.random_range(-10.0..10.0);
        let affine: Vec<f64> = y.iter().map(|v| a * v + c).collect();
        let monotone: Vec<f64> = y.iter().map(|v| v.powi(3) + v.exp()).collect();
        worst = worst
            .max((pearson(&t, &y).unwrap() - pearson(&t, &affine).unwrap()).abs())
            .max((spearman(&t, &y).unwrap() - spearman(&t, &monotone).unwrap()).abs());
    }
    let ok = (p - 0.5).abs() <= METRIC_TOL && (s - 0.5).abs() <= METRIC_TOL && worst <= METRIC_TOL;
    outcome(
        ok,
        format!("pearson = {p:.15}, spearman = {s:.15}; max invariance drift = {worst:.3e} (tol {METRIC_TOL:e})"),
    )
}

/// Synthetic corpus written to CSV, reloaded and reduced to 298 K targets
/// by the Arrhenius fit, then split 500/100/100 in generation order.
fn synthetic_splits(dir: &std::path::Path, n: usize, seed: u64) -> [Vec<MixtureRecord>; 3] {
    let path = dir.join(format!("synth-{seed}.csv"));
    write_dataset(&path, &generate_synthetic(n, seed, 0.0).unwrap()).unwrap();
    let records: Vec<MixtureRecord> = load_dataset(&path, LoadMode::Strict)
        .unwrap()
        .records
        .iter()
        .map(|r| r.prepared().unwrap())
        .collect();
    let a = n * 5 / 7;
    let b = n * 6 / 7;
    [records[..a].to_vec(), records[a..b].to_vec(), records[b..].to_vec()]
}

fn c7_learning(dir: &std::path::Path) -> Outcome {
    let start = Instant::now();
    let [tr, va, te] = synthetic_splits(dir, 700, 7);
    let mut cache = GraphCache::new();
    let (tr, va, te) = (
        build_examples(&tr, &mut cache).unwrap(),
        build_examples(&va, &mut cache).unwrap(),
        build_examples(&te, &mut cache).unwrap(),
    );
    let model = MolSetsModel::new(ModelConfig::tuned(ConvKind::GraphConv, Variant::Molsets), 7).unwrap();
    let config = TrainConfig { seed: 7, ..TrainConfig::default() };
    let out = train(model, &tr, &va, &config).unwrap();
    let report = evaluate(&out.model, &te).unwrap();
    let elapsed = start.elapsed();
    outcome(
        report.pearson_rp >= CORRELATION_FLOOR
            && report.spearman_rs >= CORRELATION_FLOOR
            && elapsed <= Duration::from_secs(600),
        format!(
            "train {} / val {} / test {}: r_p = {:.4}, r_s = {:.4}, mse = {:.4e} after {} epochs (best {}), {:.1} s (limit 600 s)",
            tr.len(),
            va.len(),
            te.len(),
            report.pearson_rp,
            report.spearman_rs,
            report.mse,
            out.history.len(),
            out.best_epoch,
            elapsed.as_secs_f64()
        ),
    )
}

struct SmilesFixture {
    smiles: &'static str,
    components: usize,
    atoms: usize,
    bonds: usize,
}

// heavy-atom and bond counts verified by hand
const CORPUS: [SmilesFixture; 9] = [
    SmilesFixture { smiles: "C1=CC=CC=C1", components: 1, atoms: 6, bonds: 6 },
    SmilesFixture { smiles: "COCOC", components: 1, atoms: 5, bonds: 4 },
    SmilesFixture { smiles: "C1CC1", components: 1, atoms: 3, bonds: 3 },
    SmilesFixture {
        smiles: "FC(F)(C1=NC(C#N)=C([N-]1)C#N)F.CCCCN2C=C[N+](C)=C2",
        components: 2,
        atoms: 23,
        bonds: 23,
    },
    SmilesFixture { smiles: "COCCOC", components: 1, atoms: 6, bonds: 5 },
    SmilesFixture { smiles: "CC1=CC=CC=C1", components: 1, atoms: 7, bonds: 7 },
    SmilesFixture { smiles: "CC1CCCO1", components: 1, atoms: 6, bonds: 6 },
    SmilesFixture { smiles: "C1CCOC1", components: 1, atoms: 5, bonds: 5 },
    SmilesFixture { smiles: "F[P-](F)(F)(F)(F)F.[Li+]", components: 2, atoms: 8, bonds: 6 },
];

fn c8_corpus() -> Outcome {
    let mut bad = Vec::new();
    for f in &CORPUS {
        let frags = match parse_smiles(f.smiles) {
            Ok(v) => v,
            Err(e) => {
                bad.push(format!("{}: {e}", f.smiles));
                continue;
            }
        };
        let atoms: usize = frags.iter().map(|x| x.atoms.len()).sum();
        let bonds: usize = frags.iter().map(|x| x.bonds.len()).sum();
        let g = build_graph(f.smiles, None).unwrap();
        if (frags.len(), atoms, bonds, g.num_nodes(), g.edges().len())
            != (f.components, f.atoms, f.bonds, f.atoms, f.bonds)
        {
            bad.push(format!(
                "{}: got {} components, {atoms} atoms, {bonds} bonds",
                f.smiles,
                frags.len()
            ));
        }
    }
    // the imidazolium salt splits into a 13-atom anion and a 10-atom cation
    let ion_pair = parse_smiles(CORPUS[3].smiles).unwrap();
    let sizes: Vec<(usize, usize)> = ion_pair.iter().map(|f| (f.atoms.len(), f.bonds.len())).collect();
    if sizes != vec![(13, 13), (10, 10)] {
        bad.push(format!("ion pair fragments {sizes:?}"));
    }
    outcome(
        bad.is_empty(),
        format!("{} table strings parsed, count mismatches: {bad:?}", CORPUS.len()),
    )
}

fn run_once(dir: &std::path::Path, tag: &str) -> (Vec<u8>, String, Vec<u8>) {
    let [tr, va, _] = synthetic_splits(dir, 140, 9);
    let mut cache = GraphCache::new();
    let tr = build_examples(&tr, &mut cache).unwrap();
    let va = build_examples(&va, &mut cache).unwrap();
    let model = MolSetsModel::new(ModelConfig::tuned(ConvKind::GraphConv, Variant::Molsets), 9).unwrap();
    let config = TrainConfig { seed: 9, max_epochs: 8, batch_size: 16, ..TrainConfig::default() };
    let out = train(model, &tr, &va, &config).unwrap();
    let mut history = Vec::new();
    write_history(&mut history, &out.history).unwrap();
    let ckpt_path = dir.join(format!("model-{tag}.json"));
    out.model.save(&ckpt_path).unwrap();
    let checkpoint = std::fs::read_to_string(&ckpt_path).unwrap();
    let reloaded = MolSetsModel::load(&ckpt_path).unwrap();
    let cands = enumerate_binary_candidates(&smiles_list("solvents.txt"), &smiles_list("salts.txt")).unwrap();
    let mut csv = Vec::new();
    write_screening(&mut csv, &run_screening(&reloaded, &cands).results).unwrap();
    (history, checkpoint, csv)
}

fn c9_determinism(dir: &std::path::Path) -> Outcome {
    let a = run_once(dir, "a");
    let b = run_once(dir, "b");
    let same = (a.0 == b.0, a.1 == b.1, a.2 == b.2);
    outcome(
        same == (true, true, true),
        format!(
            "history identical: {}, checkpoint identical: {}, screening CSV identical: {} ({} bytes)",
            same.0,
            same.1,
            same.2,
            a.2.len()
        ),
    )
}

fn c10_throughput() -> Outcome {
    let model = MolSetsModel::new(ModelConfig::tuned(ConvKind::GraphConv, Variant::Molsets), 10).unwrap();
    let cands = enumerate_binary_candidates(&smiles_list("solvents.txt"), &smiles_list("salts.txt")).unwrap();
    let start = Instant::now();
    let report = run_screening(&model, &cands);
    let elapsed = start.elapsed();
    outcome(
        report.results.len() == 11340 && report.skipped.is_empty() && elapsed <= Duration::from_secs(60),
        format!(
            "{} candidates ranked, {} skipped, {:.2} s single-threaded (limit 60 s)",
            report.results.len(),
            report.skipped.len(),
            elapsed.as_secs_f64()
        ),
    )
}

type Criterion<'a> = (&'static str, Option<Duration>, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let pool = Pool::load();
    let limit = Duration::from_secs(60);
    let criteria: Vec<Criterion> = vec![
        ("1 permutation invariance", Some(limit), Box::new(|| c1_invariance(&pool))),
        ("2 concat non-invariance", Some(limit), Box::new(|| c2_concat_swap(&pool))),
        ("3 gradient check", Some(limit), Box::new(|| c3_gradients(&pool))),
        ("4 arrhenius oracle", None, Box::new(c4_arrhenius)),
        ("5 enumeration count", None, Box::new(c5_enumeration)),
        ("6 metric oracles", None, Box::new(c6_metrics)),
        ("7 synthetic learning", None, Box::new(|| c7_learning(dir.path()))),
        ("8 smiles corpus", None, Box::new(c8_corpus)),
        ("9 determinism", None, Box::new(|| c9_determinism(dir.path()))),
        ("10 screening throughput", None, Box::new(c10_throughput)),
    ];
    let mut failed = 0;
    for (name, time_limit, run) in criteria {
        let start = Instant::now();
        let mut result = run();
        let elapsed = start.elapsed();
        if let Some(l) = time_limit {
            if elapsed > l {
                result.pass = false;
                result.detail.push_str(&format!("; runtime {:.1} s over {} s", elapsed.as_secs_f64(), l.as_secs()));
            }
        }
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {} ({:.2} s)", result.detail, elapsed.as_secs_f64());
        if !result.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
