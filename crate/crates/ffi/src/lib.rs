//! C ABI over the molsets library.
//!
//! Every fallible call returns a [`MolsetsStatus`]; on failure the message
//! is available from [`molsets_last_error`] on the same thread. Strings
//! handed out by the library are released with [`molsets_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use molsets::chem::{build_graph, FeaturizedGraph};
use molsets::data::{arrhenius_fit, ConductivityPoint, GraphCache};
use molsets::model::{MixtureInput, ModelConfig, MolSetsModel, Variant};
use molsets::nn::ConvKind;
use molsets::{Error, ErrorClass};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MolsetsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    DataError = 3,
    NumericError = 4,
    IoError = 5,
    Panic = 6,
}

/// Opaque model handle.
pub struct MolsetsModel {
    inner: MolSetsModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: MolsetsStatus, msg: &str) -> MolsetsStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> MolsetsStatus {
    let status = match e {
        Error::Io(_) => MolsetsStatus::IoError,
        _ => match e.class() {
            ErrorClass::Data => MolsetsStatus::DataError,
            ErrorClass::Numeric => MolsetsStatus::NumericError,
        },
    };
    fail(status, &e.to_string())
}

fn guard(f: impl FnOnce() -> MolsetsStatus) -> MolsetsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(MolsetsStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, MolsetsStatus> {
    if p.is_null() {
        return Err(fail(MolsetsStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MolsetsStatus::InvalidUtf8, "string argument is not UTF-8"))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! try_lib {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_error(&e),
        }
    };
}

/// Message of the last failure on this thread; empty when none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn molsets_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a JSON checkpoint into a new handle.
#[no_mangle]
pub unsafe extern "C" fn molsets_model_load(
    path: *const c_char,
    out: *mut *mut MolsetsModel,
) -> MolsetsStatus {
    guard(|| {
        if out.is_null() {
            return fail(MolsetsStatus::NullPointer, "null output handle");
        }
        let path = try_status!(read_str(path));
        let inner = try_lib!(MolSetsModel::load(path));
        *out = Box::into_raw(Box::new(MolsetsModel { inner }));
        MolsetsStatus::Ok
    })
}

/// Freshly initialized model with tuned defaults. `conv` is one of
/// graphconv, sageconv, gcnconv, gatconv, dmpnn; `variant` one of molsets,
/// wsum, concat.
#[no_mangle]
pub unsafe extern "C" fn molsets_model_new(
    conv: *const c_char,
    variant: *const c_char,
    seed: u64,
    out: *mut *mut MolsetsModel,
) -> MolsetsStatus {
    guard(|| {
        if out.is_null() {
            return fail(MolsetsStatus::NullPointer, "null output handle");
        }
        let conv: ConvKind = try_status!(try_status!(read_str(conv))
            .parse()
            .map_err(|e: String| fail(MolsetsStatus::DataError, &e)));
        let variant: Variant = try_status!(try_status!(read_str(variant))
            .parse()
            .map_err(|e: String| fail(MolsetsStatus::DataError, &e)));
        let inner = try_lib!(MolSetsModel::new(ModelConfig::tuned(conv, variant), seed));
        *out = Box::into_raw(Box::new(MolsetsModel { inner }));
        MolsetsStatus::Ok
    })
}

/// Writes the model to a JSON checkpoint.
#[no_mangle]
pub unsafe extern "C" fn molsets_model_save(
    model: *const MolsetsModel,
    path: *const c_char,
) -> MolsetsStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            return fail(MolsetsStatus::NullPointer, "null model");
        };
        let path = try_status!(read_str(path));
        try_lib!(model.inner.save(path));
        MolsetsStatus::Ok
    })
}

/// Releases a handle; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn molsets_model_free(model: *mut MolsetsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicted log10 conductivity (S/cm) of `n_solvents` solvents with their
/// weight fractions, one salt and its molality (mol/kg).
#[no_mangle]
pub unsafe extern "C" fn molsets_model_predict(
    model: *const MolsetsModel,
    solvent_smiles: *const *const c_char,
    weights: *const f64,
    n_solvents: usize,
    salt_smiles: *const c_char,
    molality: f64,
    out: *mut f64,
) -> MolsetsStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            return fail(MolsetsStatus::NullPointer, "null model");
        };
        if out.is_null() || (n_solvents > 0 && (solvent_smiles.is_null() || weights.is_null())) {
            return fail(MolsetsStatus::NullPointer, "null array argument");
        }
        if n_solvents == 0 {
            return fail(MolsetsStatus::DataError, "mixture has no solvents");
        }
        let ptrs = std::slice::from_raw_parts(solvent_smiles, n_solvents);
        let ws = std::slice::from_raw_parts(weights, n_solvents);
        let mut cache = GraphCache::new();
        let mut solvents = Vec::with_capacity(n_solvents);
        for (&p, &w) in ptrs.iter().zip(ws) {
            let s = try_status!(read_str(p));
            solvents.push((try_lib!(cache.get(s, None)), w));
        }
        let salt = try_lib!(cache.get(try_status!(read_str(salt_smiles)), None));
        let mix = try_lib!(MixtureInput::new(solvents, salt, molality));
        *out = try_lib!(model.inner.predict(&mix));
        MolsetsStatus::Ok
    })
}

/// Featurized graph as a JSON string; free it with `molsets_string_free`.
/// A non-positive `mol_weight` means no override.
#[no_mangle]
pub unsafe extern "C" fn molsets_featurize_json(
    smiles: *const c_char,
    mol_weight: f64,
    out: *mut *mut c_char,
) -> MolsetsStatus {
    guard(|| {
        if out.is_null() {
            return fail(MolsetsStatus::NullPointer, "null output pointer");
        }
        let smiles = try_status!(read_str(smiles));
        let over = (mol_weight > 0.0).then_some(mol_weight);
        let g = try_lib!(build_graph(smiles, over));
        let json = try_lib!(serde_json::to_string(&FeaturizedGraph::from(&g)).map_err(Error::from));
        *out = CString::new(json).expect("json has no NUL").into_raw();
        MolsetsStatus::Ok
    })
}

/// Releases a string returned by this library; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn molsets_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Number of equal-weight binary candidates: C(n, 2) times the salt count.
#[no_mangle]
pub extern "C" fn molsets_candidate_count(n_solvents: usize, n_salts: usize) -> usize {
    n_solvents * n_solvents.saturating_sub(1) / 2 * n_salts
}

/// Least-squares fit of log10 conductivity against 1/T.
#[no_mangle]
pub unsafe extern "C" fn molsets_arrhenius_fit(
    temperatures_k: *const f64,
    log10_sigma: *const f64,
    n: usize,
    slope_out: *mut f64,
    intercept_out: *mut f64,
    r_squared_out: *mut f64,
) -> MolsetsStatus {
    guard(|| {
        if slope_out.is_null() || intercept_out.is_null() || r_squared_out.is_null() {
            return fail(MolsetsStatus::NullPointer, "null output pointer");
        }
        let (t, y) = try_status!(pair(temperatures_k, log10_sigma, n));
        let points: Vec<ConductivityPoint> = t
            .iter()
            .zip(y)
            .map(|(&temperature_k, &log10_sigma)| ConductivityPoint {
                temperature_k,
                log10_sigma,
            })
            .collect();
        let fit = try_lib!(arrhenius_fit(&points));
        *slope_out = fit.slope_k;
        *intercept_out = fit.intercept_b;
        *r_squared_out = fit.r_squared;
        MolsetsStatus::Ok
    })
}

unsafe fn pair<'a>(
    a: *const f64,
    b: *const f64,
    n: usize,
) -> Result<(&'a [f64], &'a [f64]), MolsetsStatus> {
    if n == 0 {
        return Ok((&[], &[]));
    }
    if a.is_null() || b.is_null() {
        return Err(fail(MolsetsStatus::NullPointer, "null array argument"));
    }
    Ok((std::slice::from_raw_parts(a, n), std::slice::from_raw_parts(b, n)))
}

#[no_mangle]
pub unsafe extern "C" fn molsets_pearson(
    targets: *const f64,
    preds: *const f64,
    n: usize,
    out: *mut f64,
) -> MolsetsStatus {
    guard(|| {
        if out.is_null() {
            return fail(MolsetsStatus::NullPointer, "null output pointer");
        }
        let (t, p) = try_status!(pair(targets, preds, n));
        *out = try_lib!(molsets::train::pearson(t, p));
        MolsetsStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn molsets_spearman(
    targets: *const f64,
    preds: *const f64,
    n: usize,
    out: *mut f64,
) -> MolsetsStatus {
    guard(|| {
        if out.is_null() {
            return fail(MolsetsStatus::NullPointer, "null output pointer");
        }
        let (t, p) = try_status!(pair(targets, preds, n));
        *out = try_lib!(molsets::train::spearman(t, p));
        MolsetsStatus::Ok
    })
}

