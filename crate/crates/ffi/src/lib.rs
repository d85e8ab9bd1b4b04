//! C ABI over `rkbs-svm`.
//!
//! Every function returns an [`RkbsStatus`]. On failure the message is kept
//! per thread and can be read with [`rkbs_last_error_message`]. Models are
//! opaque [`RkbsModel`] handles released with [`rkbs_model_free`]; strings
//! handed out by the library are released with [`rkbs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use rkbs_svm::cli::{train, RunConfig};
use rkbs_svm::function_space::{RkbsModel as Model, TrainingSet};
use rkbs_svm::kernels::SpectralKernel;
use rkbs_svm::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RkbsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidData = 3,
    NumericRange = 4,
    ResourceLimit = 5,
    Unsupported = 6,
    Consistency = 7,
    Singular = 8,
    /// The solver stopped early; the best iterate is still returned.
    NonConvergence = 9,
    Config = 10,
    Io = 11,
    Panic = 12,
}

/// Opaque trained model.
pub struct RkbsModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(err: &Error) -> RkbsStatus {
    match err {
        Error::InvalidArgument(_) => RkbsStatus::InvalidArgument,
        Error::Data(_) => RkbsStatus::InvalidData,
        Error::NumericRange(_) => RkbsStatus::NumericRange,
        Error::ResourceLimit(_) => RkbsStatus::ResourceLimit,
        Error::Unsupported(_) => RkbsStatus::Unsupported,
        Error::Consistency(_) => RkbsStatus::Consistency,
        Error::Singular { .. } => RkbsStatus::Singular,
        Error::NonConvergence { .. } => RkbsStatus::NonConvergence,
        Error::Config(_) | Error::Json(_) => RkbsStatus::Config,
        Error::Io(_) | Error::Csv(_) => RkbsStatus::Io,
    }
}

fn fail(err: Error) -> RkbsStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn null(what: &str) -> RkbsStatus {
    set_error(format!("{what} is null"));
    RkbsStatus::NullPointer
}

fn guard(body: impl FnOnce() -> RkbsStatus) -> RkbsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => {
            if status == RkbsStatus::Ok {
                set_error("");
            }
            status
        }
        Err(_) => {
            set_error("internal panic");
            RkbsStatus::Panic
        }
    }
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, RkbsStatus> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        RkbsStatus::InvalidArgument
    })
}

/// Rows of a row-major `rows × cols` matrix.
///
/// # Safety
/// `data` must be null or point to `rows * cols` readable doubles.
unsafe fn read_rows(data: *const f64, rows: usize, cols: usize, what: &str) -> Result<Vec<Vec<f64>>, RkbsStatus> {
    if rows == 0 {
        return Ok(Vec::new());
    }
    if data.is_null() {
        return Err(null(what));
    }
    let Some(total) = rows.checked_mul(cols) else {
        set_error(format!("{what}: {rows} x {cols} overflows"));
        return Err(RkbsStatus::InvalidArgument);
    };
    Ok(slice::from_raw_parts(data, total)
        .chunks(cols.max(1))
        .map(|r| r.to_vec())
        .collect())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rkbs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rkbs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Frees a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle obtained from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rkbs_model_free(model: *mut RkbsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Trains on `n_points` row-major points of dimension `dim` with real
/// `labels`, configured by a run-configuration JSON document. On
/// [`RkbsStatus::Ok`] and [`RkbsStatus::NonConvergence`] a model is stored in
/// `*out_model`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string, `points` must hold
/// `n_points * dim` doubles, `labels` `n_points` doubles, and `out_model` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn rkbs_train(
    config_json: *const c_char,
    points: *const f64,
    labels: *const f64,
    n_points: usize,
    dim: usize,
    out_model: *mut *mut RkbsModel,
) -> RkbsStatus {
    guard(|| {
        if out_model.is_null() {
            return null("out_model");
        }
        *out_model = ptr::null_mut();
        let text = match read_str(config_json, "config_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let rows = match read_rows(points, n_points, dim, "points") {
            Ok(r) => r,
            Err(s) => return s,
        };
        if n_points > 0 && labels.is_null() {
            return null("labels");
        }
        let labels = if n_points == 0 {
            &[][..]
        } else {
            slice::from_raw_parts(labels, n_points)
        };
        let config = match RunConfig::from_json(text) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        let data = match TrainingSet::from_real(rows, labels) {
            Ok(d) => d,
            Err(e) => return fail(e),
        };
        match train(&config, &data) {
            Ok((model, _, converged)) => {
                *out_model = Box::into_raw(Box::new(RkbsModel { inner: model }));
                if converged {
                    RkbsStatus::Ok
                } else {
                    set_error("solver did not reach its gradient tolerance");
                    RkbsStatus::NonConvergence
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// Parses a model document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn rkbs_model_from_json(json: *const c_char, out_model: *mut *mut RkbsModel) -> RkbsStatus {
    guard(|| {
        if out_model.is_null() {
            return null("out_model");
        }
        *out_model = ptr::null_mut();
        let text = match read_str(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Model::from_json(text) {
            Ok(m) => {
                *out_model = Box::into_raw(Box::new(RkbsModel { inner: m }));
                RkbsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Serializes a model; free the result with [`rkbs_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn rkbs_model_to_json(model: *const RkbsModel, out_json: *mut *mut c_char) -> RkbsStatus {
    guard(|| {
        if model.is_null() {
            return null("model");
        }
        if out_json.is_null() {
            return null("out_json");
        }
        *out_json = ptr::null_mut();
        match (*model).inner.to_json() {
            Ok(text) => match CString::new(text) {
                Ok(c) => {
                    *out_json = c.into_raw();
                    RkbsStatus::Ok
                }
                Err(_) => {
                    set_error("model document contains NUL");
                    RkbsStatus::Consistency
                }
            },
            Err(e) => fail(e),
        }
    })
}

/// Exponent, input dimension and number of centers.
///
/// # Safety
/// `model` must be a live handle; each output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn rkbs_model_info(
    model: *const RkbsModel,
    out_p: *mut usize,
    out_dim: *mut usize,
    out_centers: *mut usize,
    out_converged: *mut c_int,
) -> RkbsStatus {
    guard(|| {
        if model.is_null() {
            return null("model");
        }
        let m = &(*model).inner;
        if !out_p.is_null() {
            *out_p = m.p();
        }
        if !out_dim.is_null() {
            *out_dim = m.kernel().dim();
        }
        if !out_centers.is_null() {
            *out_centers = m.centers().len();
        }
        if !out_converged.is_null() {
            *out_converged = c_int::from(m.converged());
        }
        RkbsStatus::Ok
    })
}

/// Norm of the model function.
///
/// # Safety
/// `model` must be a live handle and `out_norm` writable.
#[no_mangle]
pub unsafe extern "C" fn rkbs_model_norm(model: *const RkbsModel, out_norm: *mut f64) -> RkbsStatus {
    guard(|| {
        if model.is_null() {
            return null("model");
        }
        if out_norm.is_null() {
            return null("out_norm");
        }
        match (*model).inner.rkbs_norm() {
            Ok(v) => {
                *out_norm = v;
                RkbsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Evaluates the model at `n_points` row-major points of the model's
/// dimension, writing real and imaginary parts.
///
/// # Safety
/// `points` must hold `n_points * dim` doubles; `out_re` and `out_im` must
/// each have room for `n_points` doubles.
#[no_mangle]
pub unsafe extern "C" fn rkbs_model_predict(
    model: *const RkbsModel,
    points: *const f64,
    n_points: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> RkbsStatus {
    guard(|| {
        if model.is_null() {
            return null("model");
        }
        if n_points == 0 {
            return RkbsStatus::Ok;
        }
        if out_re.is_null() || out_im.is_null() {
            return null("output buffer");
        }
        let m = &(*model).inner;
        let rows = match read_rows(points, n_points, m.kernel().dim(), "points") {
            Ok(r) => r,
            Err(s) => return s,
        };
        let re = slice::from_raw_parts_mut(out_re, n_points);
        let im = slice::from_raw_parts_mut(out_im, n_points);
        for (i, x) in rows.iter().enumerate() {
            match m.evaluate(x) {
                Ok(v) => {
                    re[i] = v.re;
                    im[i] = v.im;
                }
                Err(e) => return fail(e),
            }
        }
        RkbsStatus::Ok
    })
}

/// Normalized Matérn kernel with spectral density `(θ² + |ω|²)^{-n}` at `x`.
///
/// # Safety
/// `x` must hold `dim` doubles and `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkbs_kernel_evaluate(
    theta: f64,
    degree: f64,
    dim: usize,
    x: *const f64,
    out_value: *mut f64,
) -> RkbsStatus {
    guard(|| {
        if x.is_null() {
            return null("x");
        }
        if out_value.is_null() {
            return null("out_value");
        }
        let point = slice::from_raw_parts(x, dim);
        match SpectralKernel::new(theta, degree, dim).and_then(|k| k.evaluate(point)) {
            Ok(v) => {
                *out_value = v;
                RkbsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
