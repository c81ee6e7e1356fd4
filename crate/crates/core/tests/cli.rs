mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;

fn molsets(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molsets"))
        .args(args)
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn featurize_prints_the_graph() {
    let v = json(&molsets(&["featurize", "C1CCOC1"]));
    assert_eq!(v["num_nodes"], 5);
    let bad = molsets(&["featurize", "C1CC"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    let out = molsets(&["eval", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(molsets(&[]).status.code(), Some(1));
    assert_eq!(molsets(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "mixture_id,salt_smiles\nx,[Li+]\n").unwrap();
    let out = molsets(&["prepare", "--in", p(&bad), "--out", p(&dir.path().join("o.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let missing = molsets(&["eval", "--checkpoint", "/nonexistent/m.json", "--data", p(&bad)]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let raw = d.join("raw.csv");
    let prepared = d.join("prepared.csv");
    let splits = d.join("splits");
    let cfg = d.join("cfg.json");
    let ckpt = d.join("model.json");
    let hist = d.join("history.csv");

    assert!(molsets(&["synth", "--n", "60", "--seed", "4", "--out", p(&raw)]).status.success());
    let out = molsets(&["prepare", "--in", p(&raw), "--out", p(&prepared)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = molsets(&["split", "--in", p(&prepared), "--out-dir", p(&splits), "--seed", "1"]);
    assert!(out.status.success());
    let rows = |f: &str| std::fs::read_to_string(splits.join(f)).unwrap().lines().count() - 1;
    assert_eq!(rows("train.csv") + rows("val.csv") + rows("test.csv"), 60);

    std::fs::write(
        &cfg,
        r#"{"max_epochs": 4, "batch_size": 8, "seed": 2, "hidden_dim": 8, "representation_dim": 8}"#,
    )
    .unwrap();
    let summary = json(&molsets(&[
        "train",
        "--config",
        p(&cfg),
        "--variant",
        "molsets",
        "--conv",
        "sageconv",
        "--data",
        p(&splits.join("train.csv")),
        "--val",
        p(&splits.join("val.csv")),
        "--out",
        p(&ckpt),
        "--history",
        p(&hist),
    ]));
    assert_eq!(summary["epochs"], 4);
    let history = std::fs::read_to_string(&hist).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_loss,lr\n"));
    assert_eq!(history.lines().count(), 5);

    let test = splits.join("test.csv");
    let metrics = json(&molsets(&["eval", "--checkpoint", p(&ckpt), "--data", p(&test)]));
    for field in ["pearson_rp", "spearman_rs", "mse", "n"] {
        assert!(!metrics[field].is_null(), "missing {field}");
    }

    let ranked = d.join("ranked.csv");
    let out = molsets(&[
        "screen",
        "--checkpoint",
        p(&ckpt),
        "--solvents",
        p(&fixture("solvents.txt")),
        "--salts",
        p(&fixture("salts.txt")),
        "--out",
        p(&ranked),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&ranked).unwrap();
    assert!(text.starts_with("solvent_1,solvent_2,salt,molality,predicted_log10_conductivity\n"));
    assert_eq!(text.lines().count(), 11341);

    let perm = json(&molsets(&["permute-test", "--checkpoint", p(&ckpt), "--data", p(&prepared)]));
    assert_eq!(perm["variant"], "molsets");
    assert!(perm["max_abs_diff"].as_f64().unwrap() <= 1e-9);

    let reprs = d.join("reprs.csv");
    let out = molsets(&["export-reprs", "--checkpoint", p(&ckpt), "--data", p(&test), "--out", p(&reprs)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&reprs).unwrap();
    assert!(text.starts_with("mixture_id,r0,"));
    assert_eq!(text.lines().count(), rows("test.csv") + 1);
}

#[test]
fn screening_with_a_bad_molecule_is_partial_success() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ckpt = d.join("m.json");
    molsets::model::MolSetsModel::new(Default::default(), 0)
        .unwrap()
        .save(&ckpt)
        .unwrap();
    let solvents = d.join("s.txt");
    let salts = d.join("t.txt");
    std::fs::write(&solvents, "C1CCOC1\nCOCCOC\nC1CC(\n").unwrap();
    std::fs::write(&salts, "F[P-](F)(F)(F)(F)F.[Li+]\n").unwrap();
    let ranked = d.join("r.csv");
    let out = molsets(&[
        "screen", "--checkpoint", p(&ckpt), "--solvents", p(&solvents), "--salts", p(&salts), "--out", p(&ranked),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped"));
    assert_eq!(std::fs::read_to_string(&ranked).unwrap().lines().count(), 2);
}

#[test]
fn diverging_training_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("d.csv");
    assert!(molsets(&["synth", "--n", "12", "--out", p(&data)]).status.success());
    let cfg = d.join("cfg.json");
    std::fs::write(&cfg, r#"{"lr": 1e300, "max_epochs": 3}"#).unwrap();
    let out = molsets(&[
        "train", "--config", p(&cfg), "--data", p(&data), "--val", p(&data), "--out", p(&d.join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
