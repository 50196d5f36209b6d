//! C ABI over `dpmargin`.
//!
//! Every fallible entry point returns a [`DpmStatus`]; on failure the message
//! is available from [`dpm_last_error_message`] on the same thread. Handles
//! are opaque and must be released with the matching `*_free` function.
//! Strings returned by the library are released with [`dpm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::SystemTime;

use dpmargin::data::{load_dataset, synth_margin_dataset, DataFormat, Dataset};
use dpmargin::loss::{empirical_risk, LossSpec, RiskMode};
use dpmargin::master::{dp_adaptive_margin, MasterConfig, ModelDocument, Timestamps};
use dpmargin::optimizer::OutputMode;
use dpmargin::privacy::{compose_gdp, gdp_to_approx_dp, master_iter_budget, TunerKind};
use dpmargin::tuning::ScoreKind;
use dpmargin::Error;

/// Result codes. `DPM_STATUS_OK` is zero; everything else is a failure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Dimension = 4,
    Label = 5,
    Domain = 6,
    Precondition = 7,
    Generation = 8,
    Oracle = 9,
    Size = 10,
    Resource = 11,
    MissingContext = 12,
    Unsupported = 13,
    Io = 14,
    Json = 15,
    Panic = 16,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpmFormat {
    Csv = 0,
    Libsvm = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpmTuner {
    Iterate = 0,
    PrivTune = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpmScore {
    Empirical = 0,
    Penalized = 1,
}

/// `Default` picks last-iterate for the penalized score, averaged otherwise.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpmMode {
    Default = 0,
    Averaged = 1,
    LastIterate = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DpmTrainConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub tuner: DpmTuner,
    pub score: DpmScore,
    pub mode: DpmMode,
    pub seed: u64,
}

/// Opaque labelled dataset.
pub struct DpmDataset {
    inner: Dataset,
}

/// Opaque trained model.
pub struct DpmModel {
    doc: ModelDocument,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DpmStatus {
    match e {
        Error::Parse { .. } => DpmStatus::Parse,
        Error::Dimension { .. } => DpmStatus::Dimension,
        Error::Label { .. } => DpmStatus::Label,
        Error::Domain(_) => DpmStatus::Domain,
        Error::Precondition(_) => DpmStatus::Precondition,
        Error::Generation(_) => DpmStatus::Generation,
        Error::Oracle { .. } => DpmStatus::Oracle,
        Error::Size { .. } => DpmStatus::Size,
        Error::Resource(_) => DpmStatus::Resource,
        Error::MissingContext(_) => DpmStatus::MissingContext,
        Error::Unsupported(_) => DpmStatus::Unsupported,
        Error::Candidate { source, .. } => status_of(source),
        Error::Io(_) => DpmStatus::Io,
        Error::Json(_) => DpmStatus::Json,
    }
}

struct Fail(DpmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(DpmStatus::NullArgument, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DpmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DpmStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            DpmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(DpmStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dpm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dpm_dataset_load(
    path: *const c_char,
    format: DpmFormat,
    out: *mut *mut DpmDataset,
) -> DpmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let fmt = match format {
            DpmFormat::Csv => DataFormat::Csv,
            DpmFormat::Libsvm => DataFormat::Libsvm,
        };
        put(out, DpmDataset { inner: load_dataset(path, fmt)? });
        Ok(())
    })
}

/// Builds a dataset from a row-major `n × d` feature array and `n` labels in
/// {-1, +1}.
///
/// # Safety
/// `features` must point to `n * d` doubles, `labels` to `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn dpm_dataset_from_arrays(
    features: *const f64,
    labels: *const i8,
    n: usize,
    d: usize,
    out: *mut *mut DpmDataset,
) -> DpmStatus {
    guard(|| {
        if features.is_null() {
            return Err(null("features"));
        }
        if labels.is_null() {
            return Err(null("labels"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n.checked_mul(d).ok_or_else(|| Fail(DpmStatus::Domain, "n * d overflows".into()))?;
        let x = std::slice::from_raw_parts(features, len).to_vec();
        let y = std::slice::from_raw_parts(labels, n).to_vec();
        if let Some(bad) = y.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Fail(DpmStatus::Label, format!("label {bad} is not -1 or +1")));
        }
        put(out, DpmDataset { inner: Dataset::from_parts(x, y, d, None)? });
        Ok(())
    })
}

/// Synthetic unit-ball data with margin `gamma` and `outliers` flipped labels.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dpm_dataset_synth(
    n: usize,
    d: usize,
    gamma: f64,
    outliers: usize,
    seed: u64,
    out: *mut *mut DpmDataset,
) -> DpmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = synth_margin_dataset(n, d, gamma, outliers, seed)?;
        put(out, DpmDataset { inner: s.dataset });
        Ok(())
    })
}

/// Number of points, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpm_dataset_len(ds: *const DpmDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// Feature dimension, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpm_dataset_dim(ds: *const DpmDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.dim())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dpm_dataset_free(ds: *mut DpmDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Runs the full private training pipeline.
///
/// # Safety
/// All pointers must be valid; `ds` a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpm_train(
    ds: *const DpmDataset,
    config: *const DpmTrainConfig,
    out: *mut *mut DpmModel,
) -> DpmStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = MasterConfig::new(c.epsilon, c.delta, c.seed);
        cfg.tuner = match c.tuner {
            DpmTuner::Iterate => TunerKind::Iterate,
            DpmTuner::PrivTune => TunerKind::PrivTune,
        };
        cfg.score_kind = match c.score {
            DpmScore::Empirical => ScoreKind::EmpiricalZeroOne,
            DpmScore::Penalized => ScoreKind::PenalizedPopulation,
        };
        cfg.output_mode = match c.mode {
            DpmMode::Default => None,
            DpmMode::Averaged => Some(OutputMode::Averaged),
            DpmMode::LastIterate => Some(OutputMode::LastIterate),
        };
        let started = SystemTime::now();
        let result = dp_adaptive_margin(&ds.inner, &cfg)?;
        let doc = ModelDocument::new(&result, &cfg, Timestamps::capture(started));
        put(out, DpmModel { doc });
        Ok(())
    })
}

/// Parses a model previously produced by [`dpm_model_to_json`] or the CLI.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dpm_model_from_json(json: *const c_char, out: *mut *mut DpmModel) -> DpmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let doc: ModelDocument = serde_json::from_str(text).map_err(Error::from)?;
        put(out, DpmModel { doc });
        Ok(())
    })
}

/// Borrowed view of the weight vector, valid while the model lives.
///
/// # Safety
/// `model` must be a live handle; `weights` and `len` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dpm_model_weights(
    model: *const DpmModel,
    weights: *mut *const f64,
    len: *mut usize,
) -> DpmStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if weights.is_null() || len.is_null() {
            return Err(null("output pointer"));
        }
        *weights = m.doc.weights.as_ptr();
        *len = m.doc.weights.len();
        Ok(())
    })
}

/// Selected margin, or NaN for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpm_model_gamma(model: *const DpmModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.doc.gamma_out)
}

/// Projection dimension of the selected candidate, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpm_model_k(model: *const DpmModel) -> usize {
    model.as_ref().map_or(0, |m| m.doc.k)
}

/// Projection seed of the selected candidate, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpm_model_jl_seed(model: *const DpmModel) -> u64 {
    model.as_ref().map_or(0, |m| m.doc.jl_seed)
}

/// Empirical zero-one risk of `model` on `ds`.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dpm_model_risk(
    model: *const DpmModel,
    ds: *const DpmDataset,
    out: *mut f64,
) -> DpmStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = empirical_risk(&m.doc.weights, &ds.inner, LossSpec::ZeroOne, RiskMode::Averaged)?;
        Ok(())
    })
}

/// Serializes the model; release the string with [`dpm_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dpm_model_to_json(model: *const DpmModel, out: *mut *mut c_char) -> DpmStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = serde_json::to_string_pretty(&m.doc).map_err(Error::from)?;
        *out = CString::new(text).map_err(|e| Fail(DpmStatus::Json, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dpm_model_free(model: *mut DpmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dpm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// ε such that a μ-GDP mechanism is (ε, δ)-DP.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dpm_gdp_to_approx_dp(mu: f64, delta: f64, out: *mut f64) -> DpmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = gdp_to_approx_dp(mu, delta)?;
        Ok(())
    })
}

/// Total GDP budget available to the iterate-tuned pipeline at (ε, δ).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dpm_master_iter_budget(epsilon: f64, delta: f64, out: *mut f64) -> DpmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = master_iter_budget(epsilon, delta)?;
        Ok(())
    })
}

/// Composes `len` GDP parameters.
///
/// # Safety
/// `mus` must point to `len` doubles (may be null when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn dpm_compose_gdp(mus: *const f64, len: usize, out: *mut f64) -> DpmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let slice = if len == 0 {
            &[][..]
        } else if mus.is_null() {
            return Err(null("mus"));
        } else {
            std::slice::from_raw_parts(mus, len)
        };
        *out = compose_gdp(slice)?;
        Ok(())
    })
}
