//! C ABI over the `bwml` toolkit.
//!
//! Tables and models cross the boundary as opaque handles that the caller
//! releases with the matching `*_free` function. Every fallible call returns a
//! [`BwStatus`]; on failure [`bw_last_error`] describes the most recent error
//! raised on the calling thread. Missing cells are exchanged as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use bwml::dataset::{load_csv, write_csv, DataMatrix};
use bwml::error::ErrorClass;
use bwml::imputation::{hybrid_impute, ImputationConfig};
use bwml::models::{fit, ModelFamily, ModelSpec, TrainedModel};
use bwml::synthgen::{calibrate_noise, generate_cohort, CohortSpec};
use bwml::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BwStatus {
    Ok = 0,
    /// Invalid argument or unknown name.
    Usage = 1,
    /// Malformed, missing or inconsistent data.
    Data = 2,
    /// Singular system, non-convergence or undefined statistic.
    Numerical = 3,
    NullPointer = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// Opaque data table.
pub struct BwData(DataMatrix);

/// Opaque trained model.
pub struct BwModel(TrainedModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BwStatus {
    match e.class() {
        ErrorClass::Usage => BwStatus::Usage,
        ErrorClass::Data => BwStatus::Data,
        ErrorClass::Numerical => BwStatus::Numerical,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

type FfiResult<T> = Result<T, Fail>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> BwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BwStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            BwStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            BwStatus::Panic
        }
    }
}

unsafe fn cstr<'a>(p: *const c_char, what: &'static str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(Error::InvalidInput(format!("{what} is not valid UTF-8"))))
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<T>(p: *mut *mut T, value: T) -> FfiResult<()> {
    if p.is_null() {
        return Err(Fail::Null("out"));
    }
    *p = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last error on this thread, or null if none. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn bw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a CSV file with a header row; empty cells are missing.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn bw_data_load_csv(path: *const c_char, out_data: *mut *mut BwData) -> BwStatus {
    guard(|| {
        let path = cstr(path, "path")?;
        out(out_data, BwData(load_csv(path, None)?))
    })
}

/// Build a table from column-major `values` (`n_rows * n_cols`, NaN = missing).
///
/// # Safety
/// `names` must hold `n_cols` nul-terminated strings and `values` must hold
/// `n_rows * n_cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn bw_data_from_columns(
    names: *const *const c_char,
    values: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_data: *mut *mut BwData,
) -> BwStatus {
    guard(|| {
        if names.is_null() {
            return Err(Fail::Null("names"));
        }
        if values.is_null() {
            return Err(Fail::Null("values"));
        }
        let len = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Fail::Core(Error::InvalidInput("table size overflows".into())))?;
        let names = std::slice::from_raw_parts(names, n_cols)
            .iter()
            .map(|&p| cstr(p, "column name").map(str::to_string))
            .collect::<FfiResult<Vec<_>>>()?;
        let flat = std::slice::from_raw_parts(values, len);
        let columns = flat
            .chunks(n_rows.max(1))
            .take(n_cols)
            .map(|c| c.iter().map(|v| (!v.is_nan()).then_some(*v)).collect())
            .collect();
        out(out_data, BwData(DataMatrix::from_columns(names, columns)?))
    })
}

/// Release a table. Null is ignored.
///
/// # Safety
/// `data` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bw_data_free(data: *mut BwData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// # Safety
/// `data` must be a live handle; `n_rows` and `n_cols` writable.
#[no_mangle]
pub unsafe extern "C" fn bw_data_shape(data: *const BwData, n_rows: *mut usize, n_cols: *mut usize) -> BwStatus {
    guard(|| {
        let d = borrow(data, "data")?;
        if n_rows.is_null() || n_cols.is_null() {
            return Err(Fail::Null("shape output"));
        }
        *n_rows = d.0.n_rows();
        *n_cols = d.0.n_cols();
        Ok(())
    })
}

/// Read one cell; missing cells yield NaN.
///
/// # Safety
/// `data` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn bw_data_get(data: *const BwData, row: usize, col: usize, value: *mut f64) -> BwStatus {
    guard(|| {
        let d = borrow(data, "data")?;
        if value.is_null() {
            return Err(Fail::Null("value"));
        }
        if row >= d.0.n_rows() || col >= d.0.n_cols() {
            return Err(Error::InvalidInput(format!("cell ({row}, {col}) is out of range")).into());
        }
        *value = d.0.get(row, col).unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Number of missing cells in the table.
///
/// # Safety
/// `data` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn bw_data_missing_count(data: *const BwData, count: *mut usize) -> BwStatus {
    guard(|| {
        let d = borrow(data, "data")?;
        if count.is_null() {
            return Err(Fail::Null("count"));
        }
        *count = d.0.missing_count();
        Ok(())
    })
}

/// Index of a named column.
///
/// # Safety
/// `data` must be a live handle, `name` nul-terminated and `index` writable.
#[no_mangle]
pub unsafe extern "C" fn bw_data_column_index(data: *const BwData, name: *const c_char, index: *mut usize) -> BwStatus {
    guard(|| {
        let d = borrow(data, "data")?;
        let name = cstr(name, "name")?;
        if index.is_null() {
            return Err(Fail::Null("index"));
        }
        *index = d.0.column_index(name)?;
        Ok(())
    })
}

/// # Safety
/// `data` must be a live handle and `path` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn bw_data_write_csv(data: *const BwData, path: *const c_char) -> BwStatus {
    guard(|| {
        let d = borrow(data, "data")?;
        write_csv(&d.0, Path::new(cstr(path, "path")?))?;
        Ok(())
    })
}

/// Complete every missing cell with the default hybrid imputer.
///
/// # Safety
/// `data` must be a live handle and `out_data` writable.
#[no_mangle]
pub unsafe extern "C" fn bw_impute(data: *const BwData, seed: u64, out_data: *mut *mut BwData) -> BwStatus {
    guard(|| {
        let d = borrow(data, "data")?;
        let cfg = ImputationConfig {
            seed,
            ..Default::default()
        };
        out(out_data, BwData(hybrid_impute(&d.0, &cfg)?.completed))
    })
}

/// Generate a synthetic cohort of `n` rows. A positive `noise_sd` is used as
/// is; otherwise the noise is calibrated to a reference R^2 of 0.62.
///
/// # Safety
/// `out_data` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bw_synth_cohort(n: usize, seed: u64, noise_sd: f64, out_data: *mut *mut BwData) -> BwStatus {
    guard(|| {
        let mut spec = CohortSpec {
            n,
            seed,
            ..Default::default()
        };
        spec.noise_sd = if noise_sd > 0.0 { noise_sd } else { calibrate_noise(&spec, 0.62)? };
        out(out_data, BwData(generate_cohort(&spec)?.0))
    })
}

/// Fit a model of the named family with default hyperparameters, using every
/// column except `target` as a feature. The table must be complete.
///
/// # Safety
/// `data` must be a live handle, `target` and `family` nul-terminated and
/// `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn bw_model_train(
    data: *const BwData,
    target: *const c_char,
    family: *const c_char,
    seed: u64,
    out_model: *mut *mut BwModel,
) -> BwStatus {
    guard(|| {
        let d = borrow(data, "data")?;
        let family: ModelFamily = cstr(family, "family")?.parse()?;
        let (x, y) = d.0.split_target(cstr(target, "target")?)?;
        out(out_model, BwModel(fit(&ModelSpec::new(family, seed), &x, &y)?))
    })
}

/// Predict every row of `data` into `predictions` (length `len`, which must
/// equal the row count). Columns are matched by name; extra columns such as
/// the target are ignored.
///
/// # Safety
/// `model` and `data` must be live handles and `predictions` must hold `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn bw_model_predict(
    model: *const BwModel,
    data: *const BwData,
    predictions: *mut f64,
    len: usize,
) -> BwStatus {
    guard(|| {
        let m = &borrow(model, "model")?.0;
        let d = &borrow(data, "data")?.0;
        if predictions.is_null() {
            return Err(Fail::Null("predictions"));
        }
        if len != d.n_rows() {
            return Err(Error::InvalidInput(format!("buffer holds {len} values, table has {} rows", d.n_rows())).into());
        }
        let mut missing = Vec::new();
        let mut idx = Vec::new();
        for name in &m.feature_names {
            match d.column_index(name) {
                Ok(i) => idx.push(i),
                Err(_) => missing.push(name.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::FeatureMismatch {
                missing,
                unexpected: Vec::new(),
            }
            .into());
        }
        let pred = m.predict(&d.to_features(&idx)?)?;
        std::slice::from_raw_parts_mut(predictions, len).copy_from_slice(&pred);
        Ok(())
    })
}

/// Number of features the model expects.
///
/// # Safety
/// `model` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn bw_model_n_features(model: *const BwModel, count: *mut usize) -> BwStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        if count.is_null() {
            return Err(Fail::Null("count"));
        }
        *count = m.0.feature_names.len();
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn bw_model_save(model: *const BwModel, path: *const c_char) -> BwStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        m.0.save(Path::new(cstr(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `path` must be nul-terminated and `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn bw_model_load(path: *const c_char, out_model: *mut *mut BwModel) -> BwStatus {
    guard(|| {
        let m = TrainedModel::load(Path::new(cstr(path, "path")?))?;
        out(out_model, BwModel(m))
    })
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bw_model_free(model: *mut BwModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
