use std::ffi::{c_char, CStr, CString};
use std::ptr;

use molsets_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(molsets_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn new_model(seed: u64) -> *mut MolsetsModel {
    let conv = CString::new("graphconv").unwrap();
    let variant = CString::new("molsets").unwrap();
    let mut h = ptr::null_mut();
    let st = unsafe { molsets_model_new(conv.as_ptr(), variant.as_ptr(), seed, &mut h) };
    assert_eq!(st, MolsetsStatus::Ok);
    assert!(!h.is_null());
    h
}

fn predict(h: *const MolsetsModel, solvents: &[&str], weights: &[f64], salt: &str) -> (MolsetsStatus, f64) {
    let owned: Vec<CString> = solvents.iter().map(|s| CString::new(*s).unwrap()).collect();
    let ptrs: Vec<*const c_char> = owned.iter().map(|c| c.as_ptr()).collect();
    let salt = CString::new(salt).unwrap();
    let mut y = f64::NAN;
    let st = unsafe {
        molsets_model_predict(h, ptrs.as_ptr(), weights.as_ptr(), ptrs.len(), salt.as_ptr(), 1.0, &mut y)
    };
    (st, y)
}

#[test]
fn predict_is_order_independent_and_finite() {
    let h = new_model(3);
    let salt = "F[P-](F)(F)(F)(F)F.[Li+]";
    let (s1, a) = predict(h, &["C1CCOC1", "COCCOC", "COC(=O)OC"], &[0.2, 0.3, 0.5], salt);
    let (s2, b) = predict(h, &["COC(=O)OC", "C1CCOC1", "COCCOC"], &[0.5, 0.2, 0.3], salt);
    assert_eq!((s1, s2), (MolsetsStatus::Ok, MolsetsStatus::Ok));
    assert!(a.is_finite());
    assert!((a - b).abs() <= 1e-9);
    unsafe { molsets_model_free(h) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let h = new_model(1);
    let (st, _) = predict(h, &["C1CCOC1", "COCCOC"], &[0.5, 0.6], "[Li+].[Cl-]");
    assert_eq!(st, MolsetsStatus::DataError);
    assert!(last_error().contains("sum"));
    let (st, _) = predict(h, &["C(C"], &[1.0], "[Li+].[Cl-]");
    assert_eq!(st, MolsetsStatus::DataError);
    assert!(!last_error().is_empty());
    let mut y = 0.0;
    let st = unsafe { molsets_model_predict(ptr::null(), ptr::null(), ptr::null(), 0, ptr::null(), 1.0, &mut y) };
    assert_eq!(st, MolsetsStatus::NullPointer);
    let bad = CString::new("nope").unwrap();
    let mut out = ptr::null_mut();
    let st = unsafe { molsets_model_new(bad.as_ptr(), bad.as_ptr(), 0, &mut out) };
    assert_eq!(st, MolsetsStatus::DataError);
    assert!(out.is_null());
    unsafe { molsets_model_free(h) };
    unsafe { molsets_model_free(ptr::null_mut()) };
}

#[test]
fn checkpoint_round_trip_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
    let h = new_model(7);
    assert_eq!(unsafe { molsets_model_save(h, path.as_ptr()) }, MolsetsStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { molsets_model_load(path.as_ptr(), &mut back) }, MolsetsStatus::Ok);
    let args = (&["CC1CCCO1", "C1=CC=CC=C1"][..], &[0.5, 0.5][..], "F[B-](F)(F)F.[Li+]");
    let a = predict(h, args.0, args.1, args.2).1;
    let b = predict(back, args.0, args.1, args.2).1;
    assert_eq!(a.to_bits(), b.to_bits());
    let missing = CString::new(dir.path().join("absent.json").to_str().unwrap()).unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { molsets_model_load(missing.as_ptr(), &mut none) }, MolsetsStatus::IoError);
    unsafe {
        molsets_model_free(h);
        molsets_model_free(back);
    }
}

#[test]
fn featurize_json() {
    let smiles = CString::new("C1CCOC1").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { molsets_featurize_json(smiles.as_ptr(), 0.0, &mut out) }, MolsetsStatus::Ok);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { molsets_string_free(out) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["num_nodes"], 5);
    assert_eq!(v["edges"].as_array().unwrap().len(), 5);
    let bad = CString::new("C[Fe]").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { molsets_featurize_json(bad.as_ptr(), 0.0, &mut out) }, MolsetsStatus::DataError);
    assert!(out.is_null());
}

#[test]
fn numeric_helpers() {
    assert_eq!(molsets_candidate_count(28, 30), 11340);
    assert_eq!(molsets_candidate_count(1, 30), 0);
    let t = [300.0, 250.0];
    let y = [-2.0, -3.0];
    let (mut k, mut b, mut r2) = (0.0, 0.0, 0.0);
    let st = unsafe { molsets_arrhenius_fit(t.as_ptr(), y.as_ptr(), 2, &mut k, &mut b, &mut r2) };
    assert_eq!(st, MolsetsStatus::Ok);
    assert!((k + 1500.0).abs() < 1e-10 && (b - 3.0).abs() < 1e-10);
    let st = unsafe { molsets_arrhenius_fit(t.as_ptr(), y.as_ptr(), 1, &mut k, &mut b, &mut r2) };
    assert_eq!(st, MolsetsStatus::NumericError);
    let (mut p, mut s) = (0.0, 0.0);
    let a = [1.0, 2.0, 3.0];
    unsafe {
        assert_eq!(molsets_pearson(a.as_ptr(), [1.0, 3.0, 2.0].as_ptr(), 3, &mut p), MolsetsStatus::Ok);
        assert_eq!(molsets_spearman(a.as_ptr(), [10.0, 20.0, 15.0].as_ptr(), 3, &mut s), MolsetsStatus::Ok);
    }
    assert!((p - 0.5).abs() < 1e-12 && (s - 0.5).abs() < 1e-12);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/molsets.h")).unwrap();
    for name in [
        "molsets_last_error",
        "molsets_model_load",
        "molsets_model_new",
        "molsets_model_save",
        "molsets_model_free",
        "molsets_model_predict",
        "molsets_featurize_json",
        "molsets_string_free",
        "molsets_candidate_count",
        "molsets_arrhenius_fit",
        "molsets_pearson",
        "molsets_spearman",
        "typedef struct MolsetsModel MolsetsModel",
        "MOLSETS_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles the C example against the generated header and static library
/// and checks it agrees with the Rust side. Skipped when no C compiler or
/// static library is around.
#[test]
fn c_program_links_and_agrees() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libmolsets_ffi.a");
    if !lib.exists() || std::process::Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("predict");
    let status = std::process::Command::new("cc")
        .arg(manifest.join("examples/predict.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let y: f64 = lines.next().unwrap().parse().unwrap();
    assert_eq!(lines.next(), Some("11340"));
    let h = new_model(0);
    let (st, expected) = predict(h, &["C1CCOC1", "COCCOC"], &[0.5, 0.5], "F[P-](F)(F)(F)(F)F.[Li+]");
    unsafe { molsets_model_free(h) };
    assert_eq!(st, MolsetsStatus::Ok);
    assert_eq!(y.to_bits(), expected.to_bits());
}
