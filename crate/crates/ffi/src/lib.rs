//! C interface to `isocal`.
//!
//! Conventions:
//!
//! * Every fallible function returns an [`IsocalStatus`]; on failure a
//!   message is available from [`isocal_last_error_message`] on the same
//!   thread.
//! * Objects are opaque handles created by `*_fit` / `*_load` functions and
//!   released with the matching `*_free`. Handles are not thread-safe to
//!   free concurrently but may be read from several threads.
//! * Arrays are caller-owned, contiguous and row-major; lengths are passed
//!   explicitly. Output arrays must already have the documented length.
//! * Panics never cross the boundary; they are reported as
//!   `ISOCAL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use isocal::calibrate::{fit_surface, CalibrationConfig, CalibrationInputs};
use isocal::coxfit::{fit_cox, CoxConfig, CoxModel};
use isocal::data::{
    CalibratedSurface, CurveSource, Interpolation, Method, ProbabilityRole, RiskScores,
    SurvivalDataset, SurvivalProbabilityGrid, TimeGrid,
};
use isocal::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsocalStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range (length, enum value, non-UTF-8 path).
    InvalidArgument = 2,
    /// Reading or writing a file failed.
    Io = 3,
    /// A file could not be parsed.
    Parse = 4,
    /// Inputs violate a documented invariant.
    Validation = 5,
    /// Inputs disagree in size or subject alignment.
    Alignment = 6,
    /// Model fitting or projection failed.
    Numerical = 7,
    /// A metric is undefined for the inputs.
    UndefinedMetric = 8,
    /// An internal panic was caught.
    Panic = 9,
}

/// Calibration estimators, passed as `uint32_t`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub enum IsocalMethod {
    Rw = 0,
    RwPlus = 1,
    Ht = 2,
    HtPlus = 3,
    Dr = 4,
}

/// Risk interpolation between calibration rows, passed as `uint32_t`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub enum IsocalInterpolation {
    Bilinear = 0,
    Step = 1,
}

/// A fitted Cox proportional hazards model.
pub struct IsocalCoxModel {
    inner: CoxModel,
}

/// A calibrated survival surface.
pub struct IsocalSurface {
    inner: CalibratedSurface,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

struct Failure(IsocalStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => IsocalStatus::Io,
            Error::Parse { .. } | Error::Json { .. } => IsocalStatus::Parse,
            Error::Validation(_) => IsocalStatus::Validation,
            Error::Alignment(_) => IsocalStatus::Alignment,
            Error::UndefinedMetric(_) => IsocalStatus::UndefinedMetric,
            Error::Usage(_) | Error::InvalidSetting(_) => IsocalStatus::InvalidArgument,
            Error::NoEvents
            | Error::CoxNonConvergence { .. }
            | Error::Separation { .. }
            | Error::Degenerate(_)
            | Error::DegenerateTime { .. }
            | Error::ProjectionNonConvergence { .. } => IsocalStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(IsocalStatus::InvalidArgument, message.into())
}

/// Runs `body`, recording any failure as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> IsocalStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => IsocalStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {message}"));
            IsocalStatus::Panic
        }
    }
}

/// Borrows `len` elements, rejecting null unless `len` is zero.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure(
            IsocalStatus::NullPointer,
            format!("{name} is null"),
        ));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(Failure(
            IsocalStatus::NullPointer,
            format!("{name} is null"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn out_ptr<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut()
        .ok_or_else(|| Failure(IsocalStatus::NullPointer, format!("{name} is null")))
}

unsafe fn handle<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    ptr.as_ref()
        .ok_or_else(|| Failure(IsocalStatus::NullPointer, format!("{name} is null")))
}

unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, Failure> {
    if ptr.is_null() {
        return Err(Failure(IsocalStatus::NullPointer, "path is null".into()));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

fn method_arg(value: u32) -> Result<Method, Failure> {
    Ok(match value {
        0 => Method::Rw,
        1 => Method::RwPlus,
        2 => Method::Ht,
        3 => Method::HtPlus,
        4 => Method::Dr,
        other => return Err(invalid(format!("unknown method {other}"))),
    })
}

fn interpolation_arg(value: u32) -> Result<Interpolation, Failure> {
    match value {
        0 => Ok(Interpolation::Bilinear),
        1 => Ok(Interpolation::Step),
        other => Err(invalid(format!("unknown interpolation {other}"))),
    }
}

fn subject_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn isocal_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buffer` (always
/// NUL-terminated when `capacity > 0`, truncated if needed) and returns the
/// full message length in bytes, excluding the terminator. Returns 0 when
/// the last call succeeded.
///
/// # Safety
/// `buffer` must be null or point to `capacity` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn isocal_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buffer.is_null() && capacity > 0 {
                *buffer = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buffer.cast::<u8>(), n);
            *buffer.add(n) = 0;
        }
        bytes.len()
    })
}

/// Weighted least-squares non-increasing fit of `y` (pool adjacent
/// violators). `weights` may be null for unit weights. Writes `n` values.
///
/// # Safety
/// `y`, `out` (and `weights` if non-null) must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn isocal_pava_nonincreasing(
    y: *const f64,
    weights: *const f64,
    n: usize,
    out: *mut f64,
) -> IsocalStatus {
    guard(|| {
        let y = slice(y, n, "y")?;
        let unit;
        let w = if weights.is_null() {
            unit = vec![1.0; n];
            &unit[..]
        } else {
            slice(weights, n, "weights")?
        };
        let out = slice_mut(out, n, "out")?;
        out.copy_from_slice(&isocal::isotonic::pava_nonincreasing(y, w)?);
        Ok(())
    })
}

/// Euclidean projection of a row-major `rows x cols` matrix onto matrices
/// non-increasing along both rows and columns.
///
/// # Safety
/// `matrix` and `out` must point to `rows * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn isocal_project_doubly_monotone(
    matrix: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> IsocalStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| invalid("matrix size overflows"))?;
        let m = slice(matrix, len, "matrix")?;
        let out = slice_mut(out, len, "out")?;
        let config = isocal::isotonic::ProjectionConfig::default();
        let p = isocal::isotonic::project_doubly_monotone(m, rows, cols, &config)?;
        out.copy_from_slice(&p.matrix);
        Ok(())
    })
}

/// Harrell's concordance index; `events` holds 0/1 flags.
///
/// # Safety
/// `risks`, `times` and `events` must point to `n` elements.
#[no_mangle]
pub unsafe extern "C" fn isocal_c_index(
    risks: *const f64,
    times: *const f64,
    events: *const u8,
    n: usize,
    out: *mut f64,
) -> IsocalStatus {
    guard(|| {
        let risks = slice(risks, n, "risks")?;
        let times = slice(times, n, "times")?;
        let events: Vec<bool> = slice(events, n, "events")?
            .iter()
            .map(|e| *e != 0)
            .collect();
        *out_ptr(out, "out")? = isocal::metrics::c_index(risks, times, &events)?;
        Ok(())
    })
}

/// True survival probability `S(t | x)` in simulation `setting` (1 to 6).
///
/// # Safety
/// `x` must point to `p` doubles, the setting's covariate count.
#[no_mangle]
pub unsafe extern "C" fn isocal_oracle_survival(
    setting: u8,
    x: *const f64,
    p: usize,
    t: f64,
    out: *mut f64,
) -> IsocalStatus {
    guard(|| {
        let s = isocal::simgen::Setting::new(setting)?;
        if p != s.n_covariates() {
            return Err(invalid(format!(
                "setting {setting} has {} covariates, got {p}",
                s.n_covariates()
            )));
        }
        if !(t > 0.0) {
            return Err(invalid("t must be positive"));
        }
        *out_ptr(out, "out")? = s.survival(slice(x, p, "x")?, t);
        Ok(())
    })
}

/// Builds a dataset with ids `0..n` from flat arrays.
unsafe fn dataset(
    times: *const f64,
    events: *const u8,
    covariates: *const f64,
    n: usize,
    p: usize,
) -> Result<SurvivalDataset, Failure> {
    let times = slice(times, n, "times")?.to_vec();
    let events = slice(events, n, "events")?
        .iter()
        .map(|e| *e != 0)
        .collect();
    let len = n
        .checked_mul(p)
        .ok_or_else(|| invalid("covariate size overflows"))?;
    let x = slice(covariates, len, "covariates")?.to_vec();
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Ok(SurvivalDataset::new(
        subject_ids(n),
        times,
        events,
        names,
        x,
    )?)
}

/// Fits a Cox model by Newton-Raphson with an optional ridge penalty.
/// `covariates` is row-major `n x p`.
///
/// # Safety
/// Array arguments must have the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isocal_cox_fit(
    times: *const f64,
    events: *const u8,
    covariates: *const f64,
    n: usize,
    p: usize,
    ridge: f64,
    out: *mut *mut IsocalCoxModel,
) -> IsocalStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let data = dataset(times, events, covariates, n, p)?;
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(invalid("ridge must be finite and non-negative"));
        }
        let config = CoxConfig {
            ridge,
            ..CoxConfig::default()
        };
        let inner = fit_cox(&data, &config)?;
        *out = Box::into_raw(Box::new(IsocalCoxModel { inner }));
        Ok(())
    })
}

/// Number of coefficients (covariates) of `model`, or 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn isocal_cox_num_coefficients(model: *const IsocalCoxModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.coefficients.len())
}

/// Copies the coefficients and their standard errors (either may be null).
///
/// # Safety
/// Non-null outputs must hold `isocal_cox_num_coefficients(model)` doubles.
#[no_mangle]
pub unsafe extern "C" fn isocal_cox_coefficients(
    model: *const IsocalCoxModel,
    coefficients: *mut f64,
    standard_errors: *mut f64,
) -> IsocalStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        let p = m.coefficients.len();
        if !coefficients.is_null() {
            slice_mut(coefficients, p, "coefficients")?.copy_from_slice(&m.coefficients);
        }
        if !standard_errors.is_null() {
            slice_mut(standard_errors, p, "standard_errors")?
                .copy_from_slice(&m.diagnostics.standard_errors);
        }
        Ok(())
    })
}

/// Survival curve `exp(-Lambda0(t) exp(risk))` for covariates `x` at
/// increasing positive `times`, floored at `clip_floor`.
///
/// # Safety
/// `x` must hold the model's coefficient count; `times` and `out` `k`.
#[no_mangle]
pub unsafe extern "C" fn isocal_cox_survival(
    model: *const IsocalCoxModel,
    x: *const f64,
    times: *const f64,
    k: usize,
    clip_floor: f64,
    out: *mut f64,
) -> IsocalStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        let x = slice(x, m.coefficients.len(), "x")?;
        let grid = TimeGrid::new(slice(times, k, "times")?.to_vec())?;
        let curve = m.predict_survival(m.risk(x), &grid, clip_floor);
        slice_mut(out, k, "out")?.copy_from_slice(&curve);
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn isocal_cox_free(model: *mut IsocalCoxModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Calibrates risk scores against observed outcomes.
///
/// `times`, `events`, `risks` describe the `n` calibration subjects.
/// `grid` holds `k` increasing positive times, which must include every
/// observed event time. `survival` (required for the DR method, otherwise
/// may be null) and `censoring` are row-major `n x k` tables of the
/// initial event and censoring survival curves at the grid times.
/// `method` is an [`IsocalMethod`], `interpolation` an
/// [`IsocalInterpolation`].
///
/// # Safety
/// Array arguments must have the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isocal_surface_fit(
    times: *const f64,
    events: *const u8,
    risks: *const f64,
    n: usize,
    grid: *const f64,
    k: usize,
    survival: *const f64,
    censoring: *const f64,
    method: u32,
    interpolation: u32,
    out: *mut *mut IsocalSurface,
) -> IsocalStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let method = method_arg(method)?;
        let interpolation = interpolation_arg(interpolation)?;
        let cal = dataset(times, events, std::ptr::null(), n, 0)?;
        let risks = RiskScores::new(subject_ids(n), slice(risks, n, "risks")?.to_vec())?;
        let grid = TimeGrid::new(slice(grid, k, "grid")?.to_vec())?;
        let len = n
            .checked_mul(k)
            .ok_or_else(|| invalid("table size overflows"))?;
        let table = |ptr: *const f64, role, name| -> Result<SurvivalProbabilityGrid, Failure> {
            let probs = slice(ptr, len, name)?.to_vec();
            Ok(SurvivalProbabilityGrid::new(
                role,
                grid.clone(),
                subject_ids(n),
                probs,
            )?)
        };
        let g = table(censoring, ProbabilityRole::Censoring, "censoring")?;
        let s = if survival.is_null() {
            None
        } else {
            Some(table(survival, ProbabilityRole::Survival, "survival")?)
        };
        let s_ref = s.as_ref().map(|s| s as &dyn CurveSource);
        let inputs = CalibrationInputs::new(&cal, &risks, s_ref, &g, grid.clone())?;
        let config = CalibrationConfig {
            interpolation,
            ..CalibrationConfig::default()
        };
        let inner = fit_surface(&inputs, method, &config)?;
        *out = Box::into_raw(Box::new(IsocalSurface { inner }));
        Ok(())
    })
}

/// Loads a surface saved by this library or the command-line tool.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isocal_surface_load(
    path: *const c_char,
    out: *mut *mut IsocalSurface,
) -> IsocalStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let inner = CalibratedSurface::load_json(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(IsocalSurface { inner }));
        Ok(())
    })
}

/// Writes `surface` as JSON, creating parent directories.
///
/// # Safety
/// `surface` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn isocal_surface_save(
    surface: *const IsocalSurface,
    path: *const c_char,
) -> IsocalStatus {
    guard(|| {
        let s = &handle(surface, "surface")?.inner;
        s.save_json(path_arg(path)?)?;
        Ok(())
    })
}

/// Number of calibration rows and grid times of `surface`.
///
/// # Safety
/// `surface` must be a live handle; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn isocal_surface_dims(
    surface: *const IsocalSurface,
    rows: *mut usize,
    times: *mut usize,
) -> IsocalStatus {
    guard(|| {
        let s = &handle(surface, "surface")?.inner;
        if let Some(r) = rows.as_mut() {
            *r = s.n_rows();
        }
        if let Some(t) = times.as_mut() {
            *t = s.grid().len();
        }
        Ok(())
    })
}

/// Calibrated survival probability at each `(risks[i], times[i])`.
///
/// # Safety
/// `risks`, `times` and `out` must point to `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn isocal_surface_predict(
    surface: *const IsocalSurface,
    risks: *const f64,
    times: *const f64,
    m: usize,
    out: *mut f64,
) -> IsocalStatus {
    guard(|| {
        let s = &handle(surface, "surface")?.inner;
        let risks = slice(risks, m, "risks")?;
        let times = slice(times, m, "times")?;
        let out = slice_mut(out, m, "out")?;
        for ((o, r), t) in out.iter_mut().zip(risks).zip(times) {
            if !r.is_finite() || t.is_nan() {
                return Err(invalid("risks must be finite and times not NaN"));
            }
            *o = s.predict(*r, *t);
        }
        Ok(())
    })
}

/// Releases a surface; null is ignored.
///
/// # Safety
/// `surface` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn isocal_surface_free(surface: *mut IsocalSurface) {
    if !surface.is_null() {
        drop(Box::from_raw(surface));
    }
}
