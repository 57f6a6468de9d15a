//! C ABI over `mslab`.
//!
//! Every fallible function returns an [`MslabStatus`]. Objects cross the
//! boundary as opaque pointers written to an `out` argument and released
//! with the matching `*_free`. After a failure, [`mslab_last_error`]
//! describes it.

// `!(a > b)` is used throughout so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use mslab::cli::{strong_curve, RunConfig};
use mslab::dsl::{parse_expression, EvalArgs, Expr, Var};
use mslab::experiments::{fit_rate, ErrorCurve};
use mslab::model::{predicted_strong_rate, RateModel, RegimeClass};
use mslab::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

/// Result of every exported call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MslabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Rejected input; the command line exits with 1 for these.
    InvalidInput = 3,
    /// Numerical failure; the command line exits with 2 for these.
    Numerical = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// Averaging regime codes returned by [`mslab_config_regime`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MslabRegime {
    NoHomogenization = 0,
    Regime1 = 1,
    Regime2 = 2,
    Unclassified = 3,
}

/// Least-squares fit of `log2 error` against `log2 eps`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MslabFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    /// NaN when no prediction is available.
    pub predicted_slope: f64,
}

/// Validated run configuration.
pub struct MslabConfig(RunConfig);

/// Error curve over the eps list.
pub struct MslabCurve(ErrorCurve);

/// Parsed scalar expression.
pub struct MslabExpr(Expr);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn fail(e: &Error) -> MslabStatus {
    set_error(e.to_string());
    if e.exit_code() == 1 {
        MslabStatus::InvalidInput
    } else {
        MslabStatus::Numerical
    }
}

/// Runs `f`, turning panics into [`MslabStatus::Panic`].
fn guard(f: impl FnOnce() -> MslabStatus) -> MslabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            MslabStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, MslabStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(MslabStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        MslabStatus::InvalidUtf8
    })
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> Result<&'a [f64], MslabStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        set_error("null array argument with non-zero length");
        return Err(MslabStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(p, n))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("null pointer: ", stringify!($p)));
            return MslabStatus::NullPointer;
        })+
    };
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mslab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mslab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads and validates a TOML run configuration from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mslab_config_load(path: *const c_char, out: *mut *mut MslabConfig) -> MslabStatus {
    guard(|| {
        non_null!(out);
        let path = try_status!(read_str(path));
        match RunConfig::load(Path::new(path)) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(MslabConfig(c)));
                MslabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Parses a configuration from TOML text; relative output paths resolve
/// against the current directory.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mslab_config_parse(text: *const c_char, out: *mut *mut MslabConfig) -> MslabStatus {
    guard(|| {
        non_null!(out);
        let text = try_status!(read_str(text));
        match RunConfig::from_toml(text, Path::new(".")) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(MslabConfig(c)));
                MslabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `cfg` must come from a config constructor and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mslab_config_free(cfg: *mut MslabConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Replaces the master seed and every seed derived from it.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn mslab_config_set_seed(cfg: *mut MslabConfig, seed: u64) -> MslabStatus {
    guard(|| {
        non_null!(cfg);
        let c = &mut (*cfg).0;
        *c = c.clone().with_seed(seed);
        MslabStatus::Ok
    })
}

/// Replaces the eps list; it must be strictly decreasing in (0, 1).
///
/// # Safety
/// `cfg` must be a live config handle and `eps` point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn mslab_config_set_eps(
    cfg: *mut MslabConfig,
    eps: *const f64,
    n: usize,
) -> MslabStatus {
    guard(|| {
        non_null!(cfg);
        let eps = try_status!(slice(eps, n)).to_vec();
        match (*cfg).0.clone().with_eps(eps) {
            Ok(c) => {
                (*cfg).0 = c;
                MslabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Sets the number of Monte Carlo replicas per eps.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn mslab_config_set_replicas(cfg: *mut MslabConfig, n_mc: usize) -> MslabStatus {
    guard(|| {
        non_null!(cfg);
        if n_mc < 2 {
            set_error("n_mc must be at least 2");
            return MslabStatus::InvalidInput;
        }
        (*cfg).0.experiment.n_mc = n_mc;
        MslabStatus::Ok
    })
}

/// Averaging regime of the configured schedule.
///
/// # Safety
/// `cfg` must be a live config handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_config_regime(cfg: *const MslabConfig, out: *mut MslabRegime) -> MslabStatus {
    guard(|| {
        non_null!(cfg, out);
        *out = match (*cfg).0.averaging_class() {
            RegimeClass::NoHomogenization => MslabRegime::NoHomogenization,
            RegimeClass::Regime1 => MslabRegime::Regime1,
            RegimeClass::Regime2 => MslabRegime::Regime2,
            RegimeClass::Unclassified => MslabRegime::Unclassified,
        };
        MslabStatus::Ok
    })
}

/// Deviation tag such as `R1_2`, copied NUL-terminated into `buf`. Fails with
/// `OUT_OF_RANGE` if `len` is too small; `eta_exp` may be null.
///
/// # Safety
/// `cfg` must be a live config handle and `buf` hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn mslab_config_deviation(
    cfg: *const MslabConfig,
    buf: *mut c_char,
    len: usize,
    eta_exp: *mut f64,
) -> MslabStatus {
    guard(|| {
        non_null!(cfg, buf);
        let dev = match (*cfg).0.deviation() {
            Ok(d) => d,
            Err(e) => return fail(&e),
        };
        let tag = dev.tag.as_str().as_bytes();
        if len < tag.len() + 1 {
            set_error(format!("buffer of {len} bytes cannot hold the tag"));
            return MslabStatus::OutOfRange;
        }
        ptr::copy_nonoverlapping(tag.as_ptr(), buf.cast::<u8>(), tag.len());
        *buf.add(tag.len()) = 0;
        if !eta_exp.is_null() {
            *eta_exp = dev.eta_exp;
        }
        MslabStatus::Ok
    })
}

/// Predicted slope of the strong error curve, including the moment order q.
///
/// # Safety
/// `cfg` must be a live config handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_config_predicted_strong_slope(
    cfg: *const MslabConfig,
    out: *mut f64,
) -> MslabStatus {
    guard(|| {
        non_null!(cfg, out);
        let c = &(*cfg).0;
        let r = RateModel::new(1.0, 1.0, c.experiment.q)
            .and_then(|m| predicted_strong_rate(&c.normalized_schedule(), c.averaging_class(), &m));
        match r {
            Ok(r) => {
                *out = c.experiment.q * r;
                MslabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Estimates the averaged drift and runs the strong error experiment.
///
/// # Safety
/// `cfg` must be a live config handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_strong_error(
    cfg: *const MslabConfig,
    out: *mut *mut MslabCurve,
) -> MslabStatus {
    guard(|| {
        non_null!(cfg, out);
        match strong_curve(&(*cfg).0) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(MslabCurve(c)));
                MslabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `curve` must come from an experiment call and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mslab_curve_free(curve: *mut MslabCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Number of eps levels in the curve.
///
/// # Safety
/// `curve` must be a live curve handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_curve_len(curve: *const MslabCurve, out: *mut usize) -> MslabStatus {
    guard(|| {
        non_null!(curve, out);
        *out = (*curve).0.points.len();
        MslabStatus::Ok
    })
}

/// Point `i` of the curve. Any output pointer may be null.
///
/// # Safety
/// `curve` must be a live curve handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_curve_point(
    curve: *const MslabCurve,
    i: usize,
    eps: *mut f64,
    error: *mut f64,
    stderr: *mut f64,
) -> MslabStatus {
    guard(|| {
        non_null!(curve);
        let c = &(*curve).0;
        let Some(p) = c.points.get(i) else {
            set_error(format!("point {i} out of range"));
            return MslabStatus::OutOfRange;
        };
        for (dst, v) in [(eps, p.eps), (error, p.error), (stderr, p.stderr)] {
            if !dst.is_null() {
                *dst = v;
            }
        }
        MslabStatus::Ok
    })
}

/// Fits the rate of the curve.
///
/// # Safety
/// `curve` must be a live curve handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_curve_fit(curve: *const MslabCurve, out: *mut MslabFit) -> MslabStatus {
    guard(|| {
        non_null!(curve, out);
        match fit_rate(&(*curve).0) {
            Ok(f) => {
                *out = MslabFit {
                    slope: f.slope,
                    intercept: f.intercept,
                    r_squared: f.r_squared,
                    slope_stderr: f.slope_stderr,
                    predicted_slope: f.predicted_slope.unwrap_or(f64::NAN),
                };
                MslabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Writes `eps,error,stderr,exploded_fraction` to `path`.
///
/// # Safety
/// `curve` must be a live curve handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mslab_curve_write_csv(curve: *const MslabCurve, path: *const c_char) -> MslabStatus {
    guard(|| {
        non_null!(curve);
        let path = try_status!(read_str(path));
        let r = File::create(path)
            .map_err(Error::from)
            .and_then(|f| (*curve).0.write_csv(BufWriter::new(f)));
        match r {
            Ok(()) => MslabStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Parses an expression over `t`, `x1..`, `y1..` and `z1..`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_expr_parse(text: *const c_char, out: *mut *mut MslabExpr) -> MslabStatus {
    guard(|| {
        non_null!(out);
        let text = try_status!(read_str(text));
        match parse_expression(text) {
            Ok(e) => {
                *out = Box::into_raw(Box::new(MslabExpr(e)));
                MslabStatus::Ok
            }
            Err(e) => fail(&Error::from(e)),
        }
    })
}

/// # Safety
/// `expr` must come from an expression constructor and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mslab_expr_free(expr: *mut MslabExpr) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// Evaluates at `(t, x, y)`.
///
/// # Safety
/// `expr` must be a live expression handle, `x` and `y` point to `nx` and
/// `ny` doubles, and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_expr_eval(
    expr: *const MslabExpr,
    t: f64,
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    out: *mut f64,
) -> MslabStatus {
    guard(|| {
        non_null!(expr, out);
        let x = try_status!(slice(x, nx));
        let y = try_status!(slice(y, ny));
        match (*expr).0.eval(&EvalArgs::new(t, x, y)) {
            Ok(v) => {
                *out = v;
                MslabStatus::Ok
            }
            Err(e) => fail(&Error::from(e)),
        }
    })
}

/// Symbolic partial derivative. `var` is `'t'`, `'x'`, `'y'` or `'z'`;
/// `index` is one-based and ignored for `'t'`.
///
/// # Safety
/// `expr` must be a live expression handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_expr_derivative(
    expr: *const MslabExpr,
    var: c_char,
    index: usize,
    out: *mut *mut MslabExpr,
) -> MslabStatus {
    guard(|| {
        non_null!(expr, out);
        let v = match (var as u8, index) {
            (b't', _) => Var::T,
            (_, 0) => {
                set_error("variable indices are one-based");
                return MslabStatus::OutOfRange;
            }
            (b'x', i) => Var::X(i - 1),
            (b'y', i) => Var::Y(i - 1),
            (b'z', i) => Var::Z(i - 1),
            (c, _) => {
                set_error(format!("unknown variable kind '{}'", c as char));
                return MslabStatus::InvalidInput;
            }
        };
        let d = (*expr).0.differentiate(v).simplify();
        *out = Box::into_raw(Box::new(MslabExpr(d)));
        MslabStatus::Ok
    })
}
