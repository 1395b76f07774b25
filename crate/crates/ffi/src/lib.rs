//! C ABI over `tsclass`.
//!
//! Every fallible call returns a [`TscStatus`]; on failure the thread-local
//! last error holds a machine-readable code and a message. Objects cross the
//! boundary as opaque handles released by their `_free` function. Strings
//! returned as `char *` are owned by the caller and released with
//! [`tsc_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tsclass::bench::{gen_synthetic, run_scenario, RunConfig, SynthKind};
use tsclass::classic::{fit_classic, Family, ModelSpec, ParamSet, TrainedModel};
use tsclass::dataio::{label_by_quantiles, load_csv, Frame};
use tsclass::error::ExitKind;
use tsclass::evalbt::backtest;
use tsclass::Matrix;

/// Result of every fallible call. The error values match the CLI exit codes
/// where one exists.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TscStatus {
    Ok = 0,
    Config = 2,
    Data = 3,
    Numeric = 4,
    NullPointer = 10,
    InvalidUtf8 = 11,
    Panic = 12,
}

/// A loaded or generated data frame.
pub struct TscFrame(Frame);

/// A run configuration.
pub struct TscConfig(RunConfig);

/// A fitted classic model.
pub struct TscModel(TrainedModel);

struct Fail {
    status: TscStatus,
    code: String,
    message: String,
}

impl Fail {
    fn new(status: TscStatus, code: &str, message: impl Into<String>) -> Fail {
        Fail { status, code: code.into(), message: message.into() }
    }

    fn null(what: &str) -> Fail {
        Fail::new(TscStatus::NullPointer, "NULL_POINTER", format!("`{what}` is null"))
    }
}

impl<E: Into<tsclass::Error>> From<E> for Fail {
    fn from(e: E) -> Fail {
        let e = e.into();
        let status = match e.exit_kind() {
            ExitKind::Config => TscStatus::Config,
            ExitKind::Data => TscStatus::Data,
            ExitKind::Numeric => TscStatus::Numeric,
        };
        Fail::new(status, e.code(), e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<(CString, CString)>> = const { RefCell::new(None) };
}

fn c_string(s: &str) -> CString {
    CString::new(s.replace('\0', " ")).unwrap_or_default()
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> TscStatus {
    let outcome = catch_unwind(AssertUnwindSafe(body))
        .unwrap_or_else(|_| Err(Fail::new(TscStatus::Panic, "PANIC", "internal panic")));
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = outcome.as_ref().err().map(|f| (c_string(&f.code), c_string(&f.message)));
    });
    match outcome {
        Ok(()) => TscStatus::Ok,
        Err(f) => f.status,
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::new(TscStatus::InvalidUtf8, "INVALID_UTF8", format!("`{what}` is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail::null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::null(what))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

fn owned_string(s: &str) -> *mut c_char {
    c_string(s).into_raw()
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tsc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Code of the last failed call on this thread (e.g. `UNPARSABLE_CELL`),
/// or NULL after a successful call. Valid until the next call.
#[no_mangle]
pub extern "C" fn tsc_last_error_code() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |(c, _)| c.as_ptr()))
}

/// Message of the last failed call on this thread, or NULL.
#[no_mangle]
pub extern "C" fn tsc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |(_, m)| m.as_ptr()))
}

#[no_mangle]
pub unsafe extern "C" fn tsc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a CSV. `schema` may be NULL or `key=value` lines using the
/// `data.*` configuration keys (e.g. `data.timestamp=ts`).
#[no_mangle]
pub unsafe extern "C" fn tsc_frame_load_csv(
    path: *const c_char,
    schema: *const c_char,
    out: *mut *mut TscFrame,
) -> TscStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let cfg = if schema.is_null() { RunConfig::default() } else { RunConfig::parse_str(str_arg(schema, "schema")?)? };
        *out = boxed(TscFrame(load_csv(Path::new(path), &cfg.schema)?));
        Ok(())
    })
}

/// `kind` is `planted_signal`, `regime_shift` or `random_walk`.
#[no_mangle]
pub unsafe extern "C" fn tsc_frame_synthetic(
    kind: *const c_char,
    n: usize,
    d: usize,
    seed: u64,
    out: *mut *mut TscFrame,
) -> TscStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let kind: SynthKind = str_arg(kind, "kind")?.parse()?;
        *out = boxed(TscFrame(gen_synthetic(kind, n, d, seed)?));
        Ok(())
    })
}

/// Number of rows; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn tsc_frame_len(frame: *const TscFrame) -> usize {
    frame.as_ref().map_or(0, |f| f.0.len())
}

/// Copies the frame's per-period returns into `out` (at least `tsc_frame_len` slots).
#[no_mangle]
pub unsafe extern "C" fn tsc_frame_returns(frame: *const TscFrame, out: *mut f64) -> TscStatus {
    guard(|| {
        let f = handle(frame, "frame")?;
        let r = f.0.returns();
        if out.is_null() {
            return Err(Fail::null("out"));
        }
        ptr::copy_nonoverlapping(r.as_ptr(), out, r.len());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tsc_frame_free(frame: *mut TscFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

/// Three-class labels of `n` next-period returns; `out_labels` gets `n`
/// values in {-1, 0, 1}. The thresholds pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn tsc_label_by_quantiles(
    next_returns: *const f64,
    n: usize,
    q_low: f64,
    q_high: f64,
    out_labels: *mut i8,
    out_lower: *mut f64,
    out_upper: *mut f64,
) -> TscStatus {
    guard(|| {
        let r = slice_arg(next_returns, n, "next_returns")?;
        if out_labels.is_null() {
            return Err(Fail::null("out_labels"));
        }
        let (labels, t) = label_by_quantiles(r, q_low, q_high)?;
        ptr::copy_nonoverlapping(labels.as_ptr(), out_labels, n);
        if let Some(l) = out_lower.as_mut() {
            *l = t.lower;
        }
        if let Some(u) = out_upper.as_mut() {
            *u = t.upper;
        }
        Ok(())
    })
}

/// Signal backtest. `out_strategy_curve` (n slots) and the finals may be NULL.
#[no_mangle]
pub unsafe extern "C" fn tsc_backtest(
    market_returns: *const f64,
    signals: *const i8,
    n: usize,
    random_seed: u64,
    out_strategy_curve: *mut f64,
    out_final_strategy: *mut f64,
    out_final_market: *mut f64,
) -> TscStatus {
    guard(|| {
        let r = slice_arg(market_returns, n, "market_returns")?;
        let s = slice_arg(signals, n, "signals")?;
        let rep = backtest(r, s, random_seed, "ffi")?;
        if !out_strategy_curve.is_null() {
            ptr::copy_nonoverlapping(rep.strategy_curve.as_ptr(), out_strategy_curve, n);
        }
        if let Some(v) = out_final_strategy.as_mut() {
            *v = rep.final_strategy;
        }
        if let Some(v) = out_final_market.as_mut() {
            *v = rep.final_market;
        }
        Ok(())
    })
}

/// A configuration with every default.
#[no_mangle]
pub unsafe extern "C" fn tsc_config_new(out: *mut *mut TscConfig) -> TscStatus {
    guard(|| {
        *out_arg(out, "out")? = boxed(TscConfig(RunConfig::default()));
        Ok(())
    })
}

/// Parses configuration text (`key=value` lines, `[section]` headers).
#[no_mangle]
pub unsafe extern "C" fn tsc_config_parse(text: *const c_char, out: *mut *mut TscConfig) -> TscStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = boxed(TscConfig(RunConfig::parse_str(str_arg(text, "text")?)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tsc_config_set(cfg: *mut TscConfig, key: *const c_char, value: *const c_char) -> TscStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        cfg.0.set(str_arg(key, "key")?, str_arg(value, "value")?)?;
        Ok(())
    })
}

/// Hex SHA-256 of the result-relevant settings; free with `tsc_string_free`.
/// NULL for a NULL handle.
#[no_mangle]
pub unsafe extern "C" fn tsc_config_hash(cfg: *const TscConfig) -> *mut c_char {
    cfg.as_ref().map_or(ptr::null_mut(), |c| owned_string(&c.0.config_hash()))
}

#[no_mangle]
pub unsafe extern "C" fn tsc_config_free(cfg: *mut TscConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs every configured family on `frame`, writing artifacts to the
/// configured output directory. `out_manifest` receives the manifest JSON.
#[no_mangle]
pub unsafe extern "C" fn tsc_run_scenario(
    cfg: *const TscConfig,
    frame: *const TscFrame,
    out_manifest: *mut *mut c_char,
) -> TscStatus {
    guard(|| {
        let out = out_arg(out_manifest, "out_manifest")?;
        let outcome = run_scenario(&handle(cfg, "cfg")?.0, &handle(frame, "frame")?.0)?;
        *out = owned_string(&serde_json::to_string(&outcome.manifest)?);
        Ok(())
    })
}

/// Fits a classic family on a row-major `rows x cols` matrix and labels
/// in {-1, 0, 1}. `params_json` is NULL (family defaults) or an object such
/// as `{"C": 1.0, "kernel": "rbf"}`.
#[no_mangle]
pub unsafe extern "C" fn tsc_model_fit(
    family: *const c_char,
    params_json: *const c_char,
    x: *const f64,
    rows: usize,
    cols: usize,
    y: *const i8,
    seed: u64,
    out: *mut *mut TscModel,
) -> TscStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let family: Family = str_arg(family, "family")?.parse()?;
        let params: ParamSet = if params_json.is_null() {
            ParamSet::new()
        } else {
            serde_json::from_str(str_arg(params_json, "params_json")?)?
        };
        let xs = slice_arg(x, rows * cols, "x")?;
        let ys = slice_arg(y, rows, "y")?;
        let m = Matrix::from_vec(rows, cols, xs.to_vec());
        *out = boxed(TscModel(fit_classic(&ModelSpec { family, params }, &m, ys, seed)?));
        Ok(())
    })
}

/// Writes `rows` predicted labels into `out_labels`.
#[no_mangle]
pub unsafe extern "C" fn tsc_model_predict(
    model: *const TscModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    out_labels: *mut i8,
) -> TscStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let xs = slice_arg(x, rows * cols, "x")?;
        if out_labels.is_null() && rows > 0 {
            return Err(Fail::null("out_labels"));
        }
        let pred = model.0.predict(&Matrix::from_vec(rows, cols, xs.to_vec()))?;
        ptr::copy_nonoverlapping(pred.as_ptr(), out_labels, pred.len());
        Ok(())
    })
}

/// Versioned JSON of a fitted model; free with `tsc_string_free`.
#[no_mangle]
pub unsafe extern "C" fn tsc_model_to_json(model: *const TscModel, out: *mut *mut c_char) -> TscStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = owned_string(&handle(model, "model")?.0.to_json()?);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tsc_model_from_json(text: *const c_char, out: *mut *mut TscModel) -> TscStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = boxed(TscModel(TrainedModel::from_json(str_arg(text, "text")?)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tsc_model_free(model: *mut TscModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
