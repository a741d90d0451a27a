//! C ABI over the `natafbeta` classifier.
//!
//! Every function returns an [`NbStatus`]; on failure [`nb_last_error`] gives a message
//! for the calling thread. Handles are opaque and must be released with their `_free`
//! function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use natafbeta::classifier::{fit_multiclass, predict_multiclass, FitConfig, Model, ModelFile};
use natafbeta::data::{impute_means, load_csv, simulate, CsvOptions, Dataset, Observation, SimulationSpec};
use natafbeta::evaluation::{binary_decisions, cross_validate, CvConfig, PccMode};
use natafbeta::kernel::{LengthScales, QuerySet};
use natafbeta::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Singular = 4,
    DimensionMismatch = 5,
    Unfittable = 6,
    Parse = 7,
    Io = 8,
    Serialization = 9,
    NumericRange = 10,
    Panic = 11,
}

impl From<&Error> for NbStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) | Error::Empty(_) => NbStatus::Domain,
            Error::Singular { .. } => NbStatus::Singular,
            Error::DimensionMismatch { .. } | Error::Consistency { .. } => NbStatus::DimensionMismatch,
            Error::NumericRange(_) => NbStatus::NumericRange,
            Error::Unfittable(_) => NbStatus::Unfittable,
            Error::Parse { .. } | Error::Csv(_) => NbStatus::Parse,
            Error::Io { .. } => NbStatus::Io,
            Error::Serialization(_) => NbStatus::Serialization,
        }
    }
}

/// Opaque dataset handle.
pub struct NbDataset(Dataset);

/// Opaque fitted-model handle.
pub struct NbModel(Model);

/// Fitting options; obtain defaults from [`nb_fit_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NbFitConfig {
    pub rel_tol: f64,
    pub max_iter: u32,
    pub wall_clock_limit_secs: f64,
    pub fd_step: f64,
    pub prior_mean: f64,
}

impl From<NbFitConfig> for FitConfig {
    fn from(c: NbFitConfig) -> Self {
        FitConfig {
            start: None,
            rel_tol: c.rel_tol,
            max_iter: c.max_iter as usize,
            wall_clock_limit_secs: c.wall_clock_limit_secs,
            fd_step: c.fd_step,
            prior_mean: c.prior_mean,
        }
    }
}

/// Aggregates of a cross-validation run, as fractions.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NbCvSummary {
    pub mean_ccr: f64,
    pub std_ccr: f64,
    pub mean_pcc: f64,
    pub std_pcc: f64,
    pub folds_completed: u32,
    pub folds_failed: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(NbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(NbStatus::from(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(NbStatus::InvalidArgument, msg.to_string())
}

fn null(name: &str) -> Failure {
    Failure(NbStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `body`, converting errors and panics into a status plus thread-local message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> NbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".into());
            set_error(format!("panic: {msg}"));
            NbStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("`{name}` is not valid UTF-8")))
}

/// Message for the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn nb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a dataset from a row-major `n_rows × dim` matrix and class ids `0..n_classes`.
///
/// # Safety
/// `x` must hold `n_rows * dim` doubles, `labels` `n_rows` values, `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nb_dataset_from_arrays(
    x: *const f64,
    n_rows: usize,
    dim: usize,
    labels: *const u32,
    n_classes: u32,
    out: *mut *mut NbDataset,
) -> NbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if dim == 0 || n_classes == 0 {
            return Err(invalid("dim and n_classes must be positive"));
        }
        if n_rows > 0 && (x.is_null() || labels.is_null()) {
            return Err(null("x/labels"));
        }
        let len = n_rows.checked_mul(dim).ok_or_else(|| invalid("size overflow"))?;
        let xs: &[f64] = if n_rows == 0 { &[] } else { std::slice::from_raw_parts(x, len) };
        let ls: &[u32] = if n_rows == 0 { &[] } else { std::slice::from_raw_parts(labels, n_rows) };
        let rows = xs
            .chunks_exact(dim)
            .zip(ls)
            .map(|(r, &c)| Observation {
                x: r.to_vec(),
                class: c as usize,
            })
            .collect();
        let ds = Dataset::new(
            rows,
            (0..dim).map(|k| format!("x{k}")).collect(),
            (0..n_classes).map(|c| c.to_string()).collect(),
            "ffi",
        )?;
        *out = Box::into_raw(Box::new(NbDataset(ds)));
        Ok(())
    })
}

/// Loads a CSV file whose last column is the class label; missing cells ("?") are mean-imputed.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nb_dataset_load_csv(path: *const c_char, out: *mut *mut NbDataset) -> NbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = c_str(path, "path")?;
        let ds = impute_means(&load_csv(path, &CsvOptions::default())?)?;
        *out = Box::into_raw(Box::new(NbDataset(ds)));
        Ok(())
    })
}

/// Replaces missing (NaN) cells by column means in place.
///
/// # Safety
/// `ds` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn nb_dataset_impute(ds: *mut NbDataset) -> NbStatus {
    guard(|| {
        let ds = ds.as_mut().ok_or_else(|| null("ds"))?;
        ds.0 = impute_means(&ds.0)?;
        Ok(())
    })
}

/// Number of rows; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nb_dataset_len(ds: *const NbDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Attribute count; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nb_dataset_dim(ds: *const NbDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.dim())
}

/// Class count; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nb_dataset_n_classes(ds: *const NbDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_classes())
}

/// # Safety
/// `ds` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nb_dataset_free(ds: *mut NbDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

#[no_mangle]
pub extern "C" fn nb_fit_config_default() -> NbFitConfig {
    let d = FitConfig::default();
    NbFitConfig {
        rel_tol: d.rel_tol,
        max_iter: d.max_iter as u32,
        wall_clock_limit_secs: d.wall_clock_limit_secs,
        fd_step: d.fd_step,
        prior_mean: d.prior_mean,
    }
}

fn config_or_default(config: *const NbFitConfig) -> FitConfig {
    // SAFETY: callers pass null or a valid pointer
    unsafe { config.as_ref() }.map_or_else(FitConfig::default, |c| (*c).into())
}

/// Fits one-vs-rest models to every class. `config` may be null for defaults.
///
/// # Safety
/// `ds` must come from this library; `config` null or valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nb_fit(
    ds: *const NbDataset,
    config: *const NbFitConfig,
    out: *mut *mut NbModel,
) -> NbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ds = ds.as_ref().ok_or_else(|| null("ds"))?;
        let model = fit_multiclass(&ds.0, &config_or_default(config))?;
        *out = Box::into_raw(Box::new(NbModel(Model::Multiclass(model))));
        Ok(())
    })
}

/// Number of classes the model predicts over.
///
/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nb_model_n_classes(model: *const NbModel) -> usize {
    match model.as_ref().map(|m| &m.0) {
        Some(Model::Multiclass(m)) => m.n_classes(),
        Some(Model::Binary(_)) => 2,
        None => 0,
    }
}

/// Attribute count the model expects.
///
/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nb_model_dim(model: *const NbModel) -> usize {
    model.as_ref().and_then(|m| m.0.dim()).unwrap_or(0)
}

/// Predicts `n_rows` row-major points.
///
/// Writes `n_rows × n_classes` one-vs-rest probabilities to `probs` (row-major) and the
/// argmax class of each row to `labels`. Either output may be null.
///
/// # Safety
/// Buffers must have the sizes stated above.
#[no_mangle]
pub unsafe extern "C" fn nb_predict(
    model: *const NbModel,
    x: *const f64,
    n_rows: usize,
    dim: usize,
    probs: *mut f64,
    labels: *mut u32,
) -> NbStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if n_rows == 0 {
            return Ok(());
        }
        if x.is_null() {
            return Err(null("x"));
        }
        let len = n_rows.checked_mul(dim).ok_or_else(|| invalid("size overflow"))?;
        let query = QuerySet::new(dim.max(1), std::slice::from_raw_parts(x, len).to_vec())?;
        let (rows, picked): (Vec<Vec<f64>>, Vec<usize>) = match &model.0 {
            Model::Multiclass(m) => {
                let p = predict_multiclass(m, &query)?;
                (p.probs, p.labels)
            }
            Model::Binary(m) => {
                let p = m.predict(&query)?.prob_class1;
                let labels = binary_decisions(&p);
                (p.iter().map(|&v| vec![1.0 - v, v]).collect(), labels)
            }
        };
        if !probs.is_null() {
            let k = rows.first().map_or(0, Vec::len);
            let out = std::slice::from_raw_parts_mut(probs, n_rows * k);
            for (j, row) in rows.iter().enumerate() {
                out[j * k..(j + 1) * k].copy_from_slice(row);
            }
        }
        if !labels.is_null() {
            let out = std::slice::from_raw_parts_mut(labels, n_rows);
            for (o, &l) in out.iter_mut().zip(&picked) {
                *o = l as u32;
            }
        }
        Ok(())
    })
}

/// Serializes the model to a newly allocated JSON string; free it with [`nb_string_free`].
///
/// # Safety
/// `model` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nb_model_to_json(model: *const NbModel, out: *mut *mut c_char) -> NbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let text = ModelFile::new(model.0.clone()).to_json()?;
        *out = CString::new(text)
            .map_err(|_| invalid("model JSON contains NUL"))?
            .into_raw();
        Ok(())
    })
}

/// Parses a model written by [`nb_model_to_json`] or the command-line tool.
///
/// # Safety
/// `json` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nb_model_from_json(json: *const c_char, out: *mut *mut NbModel) -> NbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = c_str(json, "json")?;
        let file = ModelFile::from_json(text)?;
        *out = Box::into_raw(Box::new(NbModel(file.model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nb_model_free(model: *mut NbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn nb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// k-fold cross-validation with geometric-mean PCC. `config` may be null.
///
/// # Safety
/// `ds` must come from this library; `config` null or valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nb_cross_validate(
    ds: *const NbDataset,
    k: u32,
    seed: u64,
    stratify: bool,
    config: *const NbFitConfig,
    out: *mut NbCvSummary,
) -> NbStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let ds = ds.as_ref().ok_or_else(|| null("ds"))?;
        let cfg = CvConfig {
            k: k as usize,
            seed,
            stratify,
            pcc_mode: PccMode::Geometric,
            fit: config_or_default(config),
        };
        let r = cross_validate(&ds.0, "ffi", &cfg)?;
        *out = NbCvSummary {
            mean_ccr: r.mean_ccr,
            std_ccr: r.std_ccr,
            mean_pcc: r.mean_pcc,
            std_pcc: r.std_pcc,
            folds_completed: r.per_fold.len() as u32,
            folds_failed: r.failures.len() as u32,
        };
        Ok(())
    })
}

/// Simulated 1-D dataset on (0, 10) with one length scale for every field.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nb_simulate(
    seed: u64,
    n: usize,
    length_scale: f64,
    out: *mut *mut NbDataset,
) -> NbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let l = LengthScales::new(vec![length_scale])?;
        let spec = SimulationSpec {
            l_a: l.clone(),
            l_b: l.clone(),
            l_p: l,
            n,
            seed,
            ..SimulationSpec::default()
        };
        let sim = simulate(&spec)?;
        *out = Box::into_raw(Box::new(NbDataset(sim.data)));
        Ok(())
    })
}
