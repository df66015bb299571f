//! C ABI over og-core.
//!
//! Conventions:
//! - every fallible call returns an [`OgStatus`]; on failure a message is
//!   kept per thread and read with [`og_last_error`];
//! - strings passed in are NUL-terminated UTF-8; strings handed out are
//!   owned by the caller and released with [`og_string_free`];
//! - handles are opaque and released with their `_free` function, which
//!   accepts NULL.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use og_core::domain::{haversine_km, GeoFix, LatLon};
use og_core::pipelines::batch::{detect_fixes, load_detector};
use og_core::pipelines::{self, BatchInput, Detector, Hyperparams, PipelineError, SynthParams, TrainOptions};
use og_core::store::{DataDir, LockOptions, ModelRef, StoreError};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OgStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// Not UTF-8, not JSON of the expected shape, or out of range.
    InvalidArgument = 2,
    NotFound = 3,
    /// A record, model or output failed its contract.
    ContractViolation = 4,
    /// Another writer holds the store lock.
    Busy = 5,
    Io = 6,
    /// Not enough data for the operation (e.g. fewer than two fixes).
    InsufficientData = 7,
    Internal = 8,
    /// A panic was caught at the boundary.
    Panic = 9,
}

/// An installation's data directory.
pub struct OgDataDir {
    dir: DataDir,
    lock: LockOptions,
}

/// A loaded, contract-checked detector.
pub struct OgDetector {
    model_id: CString,
    detector: Detector,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(OgStatus, String);

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::Config(_) => OgStatus::InvalidArgument,
            PipelineError::NotFound(_) => OgStatus::NotFound,
            PipelineError::InsufficientData(_) | PipelineError::InsufficientWindow(_) => OgStatus::InsufficientData,
            PipelineError::Contract(_) => OgStatus::ContractViolation,
            PipelineError::Store(s) => return Failure::from_store(s, e.to_string()),
            PipelineError::Ingest(_) | PipelineError::Model(_) => OgStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        Failure::from_store(&e, message)
    }
}

impl Failure {
    fn from_store(e: &StoreError, message: String) -> Self {
        let status = match e {
            StoreError::NotFound(_) => OgStatus::NotFound,
            StoreError::Busy { .. } => OgStatus::Busy,
            StoreError::Contract(_) | StoreError::Integrity(_) => OgStatus::ContractViolation,
            StoreError::Io(_) => OgStatus::Io,
            StoreError::Invalid(_) | StoreError::Json(_) => OgStatus::InvalidArgument,
            _ => OgStatus::Internal,
        };
        Failure(status, message)
    }

    fn null(what: &str) -> Self {
        Failure(OgStatus::NullArgument, format!("{what} is NULL"))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure(OgStatus::InvalidArgument, message.into())
    }
}

/// Run `f`, converting failures and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OgStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("panic inside og-core");
            OgStatus::Panic
        }
    }
}

/// # Safety
/// `p` is NULL or a NUL-terminated string valid for the call.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::invalid(format!("{what} is not UTF-8")))
}

/// # Safety
/// As [`text`]; NULL maps to `None`.
unsafe fn opt_text<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

/// # Safety
/// `out` is NULL or valid for one pointer write.
unsafe fn put_string(out: *mut *mut c_char, value: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("output pointer"));
    }
    let c = CString::new(value).map_err(|_| Failure(OgStatus::Internal, "string holds NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// # Safety
/// `dir` is NULL or a live handle from [`og_data_dir_open`].
unsafe fn data_dir<'a>(dir: *const OgDataDir) -> Result<&'a OgDataDir, Failure> {
    dir.as_ref().ok_or_else(|| Failure::null("dir"))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string(value).map_err(|e| Failure(OgStatus::Internal, e.to_string()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn og_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn og_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string handed out by this library. NULL is ignored.
///
/// # Safety
/// `s` is NULL or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn og_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Great-circle distance in km. Returns NaN for coordinates out of range.
#[no_mangle]
pub extern "C" fn og_haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    haversine_km(LatLon::new(lat1, lon1), LatLon::new(lat2, lon2)).unwrap_or(f64::NAN)
}

/// Open (without creating) a data directory.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn og_data_dir_open(path: *const c_char, break_stale_locks: bool, out: *mut *mut OgDataDir) -> OgStatus {
    guard(|| {
        let path = text(path, "path")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let handle = OgDataDir { dir: DataDir::new(path), lock: LockOptions { break_stale: break_stale_locks } };
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// # Safety
/// `dir` is NULL or a handle from [`og_data_dir_open`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn og_data_dir_free(dir: *mut OgDataDir) {
    if !dir.is_null() {
        drop(Box::from_raw(dir));
    }
}

/// Generate a seeded synthetic snapshot; writes its id to `out_snapshot_id`.
///
/// # Safety
/// `dir` is a live handle; `out_snapshot_id` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn og_generate(
    dir: *const OgDataDir,
    seed: u64,
    n_objects: u32,
    duration_s: i64,
    out_snapshot_id: *mut *mut c_char,
) -> OgStatus {
    guard(|| {
        let d = data_dir(dir)?;
        let params = SynthParams::new(seed, n_objects as usize, duration_s);
        let out = pipelines::synth_generate(&params, &d.dir.data_store())?;
        let manifest = out.manifest.ok_or_else(|| Failure(OgStatus::Internal, "no snapshot written".into()))?;
        put_string(out_snapshot_id, &manifest.snapshot_id)
    })
}

/// Which trainer [`og_train`] runs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OgTrainer {
    Rule = 0,
    Ml = 1,
}

/// Train and register a model.
///
/// `hyperparams_json` is NULL or a JSON object; `created_ts` is NULL (wall
/// clock) or a fixed creation time. Writes `name:version` to `out_model_id`.
///
/// # Safety
/// Pointers are NULL where allowed or valid as described.
#[no_mangle]
pub unsafe extern "C" fn og_train(
    dir: *const OgDataDir,
    trainer: OgTrainer,
    snapshot_id: *const c_char,
    hyperparams_json: *const c_char,
    created_ts: *const i64,
    out_model_id: *mut *mut c_char,
) -> OgStatus {
    guard(|| {
        let d = data_dir(dir)?;
        let snapshot = text(snapshot_id, "snapshot_id")?;
        let hyper: Hyperparams = match opt_text(hyperparams_json, "hyperparams_json")? {
            Some(j) => serde_json::from_str(j).map_err(|e| Failure::invalid(format!("hyperparams_json: {e}")))?,
            None => Hyperparams::new(),
        };
        let opts = TrainOptions { created_ts: created_ts.as_ref().copied(), lock: d.lock, model_name: None };
        let outcome = match trainer {
            OgTrainer::Rule => pipelines::train_rule(&d.dir, snapshot, &hyper, &opts)?,
            OgTrainer::Ml => pipelines::train_ml(&d.dir, snapshot, &hyper, &opts)?,
        };
        put_string(out_model_id, &outcome.model_id.to_string())
    })
}

/// Batch prediction into the Prediction Store over a snapshot, or over the
/// raw store when `snapshot_id` is NULL. Writes the JSON report.
///
/// # Safety
/// Pointers are NULL where allowed or valid as described.
#[no_mangle]
pub unsafe extern "C" fn og_batch_predict(
    dir: *const OgDataDir,
    model_ref: *const c_char,
    snapshot_id: *const c_char,
    out_report_json: *mut *mut c_char,
) -> OgStatus {
    guard(|| {
        let d = data_dir(dir)?;
        let model: ModelRef = text(model_ref, "model_ref")?.parse()?;
        let input = match opt_text(snapshot_id, "snapshot_id")? {
            Some(id) => BatchInput::Snapshot(id.to_string()),
            None => BatchInput::Raw,
        };
        let report = pipelines::batch_predict(&d.dir, &model, &input, None, d.lock)?;
        put_string(out_report_json, &to_json(&report)?)
    })
}

/// Load a registered model (`name[:version|latest]`), checking its
/// registry entry against the model contract.
///
/// # Safety
/// `dir` is a live handle; `model_ref` a string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn og_detector_open(dir: *const OgDataDir, model_ref: *const c_char, out: *mut *mut OgDetector) -> OgStatus {
    guard(|| {
        let d = data_dir(dir)?;
        let model: ModelRef = text(model_ref, "model_ref")?.parse()?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let (entry, detector) = load_detector(&d.dir, &model)?;
        let model_id = CString::new(entry.model_id.to_string()).map_err(|_| Failure::invalid("model id holds NUL"))?;
        *out = Box::into_raw(Box::new(OgDetector { model_id, detector }));
        Ok(())
    })
}

/// `name:version` of a loaded detector, owned by the handle.
///
/// # Safety
/// `detector` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn og_detector_model_id(detector: *const OgDetector) -> *const c_char {
    detector.as_ref().map_or(ptr::null(), |d| d.model_id.as_ptr())
}

/// Detect over a JSON array of fixes (any objects, any order). Writes a
/// JSON array of anomalies; nothing is persisted.
///
/// # Safety
/// `detector` is a live handle; `fixes_json` a string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn og_detector_detect(
    detector: *const OgDetector,
    fixes_json: *const c_char,
    out_anomalies_json: *mut *mut c_char,
) -> OgStatus {
    guard(|| {
        let det = detector.as_ref().ok_or_else(|| Failure::null("detector"))?;
        let fixes: Vec<GeoFix> =
            serde_json::from_str(text(fixes_json, "fixes_json")?).map_err(|e| Failure::invalid(format!("fixes_json: {e}")))?;
        for (i, f) in fixes.iter().enumerate() {
            f.validate().map_err(|e| Failure::invalid(format!("fixes_json[{i}]: {e}")))?;
        }
        let (_, anomalies) = detect_fixes(&det.detector, fixes)?;
        put_string(out_anomalies_json, &to_json(&anomalies)?)
    })
}

/// # Safety
/// `detector` is NULL or a live handle, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn og_detector_free(detector: *mut OgDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Run an `og` command line (without the program name) in-process.
/// Writes the exit code and captured stdout; stderr goes to
/// `og_last_error` when the exit code is non-zero.
///
/// # Safety
/// `argv` holds `argc` NUL-terminated strings; outputs are valid for one write.
#[no_mangle]
pub unsafe extern "C" fn og_cli_run(
    argc: usize,
    argv: *const *const c_char,
    out_exit_code: *mut i32,
    out_stdout: *mut *mut c_char,
) -> OgStatus {
    guard(|| {
        if argv.is_null() && argc > 0 {
            return Err(Failure::null("argv"));
        }
        if out_exit_code.is_null() {
            return Err(Failure::null("out_exit_code"));
        }
        let mut args = vec!["og".to_string()];
        for i in 0..argc {
            args.push(text(*argv.add(i), "argv entry")?.to_string());
        }
        let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
        let code = og_core::cli::run(args, &mut stdout, &mut stderr);
        *out_exit_code = code;
        put_string(out_stdout, &String::from_utf8_lossy(&stdout))?;
        if code != 0 {
            return Err(Failure(OgStatus::Ok, String::from_utf8_lossy(&stderr).into_owned()));
        }
        Ok(())
    })
}
