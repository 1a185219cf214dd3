//! C interface to `thetawalk`.
//!
//! Conventions:
//! * every fallible function returns a [`TwStatus`]; on failure a message is
//!   available from [`tw_last_error`] until the next call on the same thread;
//! * objects are opaque handles created by `*_new` functions and released by
//!   the matching `*_free` (passing NULL to a `*_free` is a no-op);
//! * strings are copied into caller buffers: pass `len` bytes of storage and
//!   receive the required size (including the terminating NUL) in `needed`.
//!   With too small a buffer nothing is written and the status is
//!   `TW_BUFFER_TOO_SMALL`.
#![allow(clippy::missing_safety_doc, non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rug::{Float, Rational};
use thetawalk::amodel::{am_harmonic_gf_coeffs, ModelParams};
use thetawalk::error::Error;
use thetawalk::kreweras::kw_transfer_asymptotics;
use thetawalk::ring::Cf;
use thetawalk::theta::StepSet;
use thetawalk::walk::{dp_count, fit_asymptotics, Backend, CountTable, Template, Track};

/// Status codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwStatus {
    TW_OK = 0,
    TW_NULL_POINTER = 1,
    TW_INVALID_ARGUMENT = 2,
    TW_BUFFER_TOO_SMALL = 3,
    /// a series coefficient beyond its truncation order was requested
    TW_TRUNCATED = 4,
    TW_NOT_REPRESENTABLE = 5,
    TW_NO_CONVERGENCE = 6,
    TW_INSUFFICIENT_DATA = 7,
    TW_MEMORY = 8,
    TW_ILL_CONDITIONED = 9,
    TW_VERIFICATION = 10,
    /// a bug: the library panicked
    TW_INTERNAL = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwBackend {
    /// exact rationals
    TW_BACKEND_EXACT = 0,
    /// doubles times scaleⁿ with renormalisation
    TW_BACKEND_SCALED = 1,
    /// residues modulo a prime
    TW_BACKEND_MODULAR = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwTemplate {
    /// κ μⁿ n^(−α)(1 + c₁/n + …)
    TW_TEMPLATE_PLAIN = 0,
    /// adds a (log n)/n correction
    TW_TEMPLATE_LOG_CORRECTED = 1,
}

/// Result of [`tw_fit_asymptotics`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct TwFit {
    pub mu: f64,
    pub alpha: f64,
    pub kappa: f64,
    /// NaN for the plain template
    pub log_coeff: f64,
    pub alpha_spread: f64,
    pub mu_spread: f64,
    pub rms_residual: f64,
    pub condition: f64,
    pub richardson_mu: f64,
    pub richardson_alpha: f64,
    pub points: usize,
}

/// Leading asymptotics of Kreweras excursions:
/// `[t^{3n}] Q(0,0) ~ amplitude · growth^{3n} · n^exponent`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct TwKrewerasAsymptotics {
    pub amplitude: f64,
    pub exponent: f64,
    pub growth_per_step: f64,
    pub period: u32,
}

/// Opaque step set.
pub struct TwStepSet(StepSet);

/// Opaque table of walk counts.
pub struct TwCountTable(CountTable);

/// Opaque a-model parameters.
pub struct TwAmodel(ModelParams);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TwStatus {
    match e {
        Error::Truncated { .. } => TwStatus::TW_TRUNCATED,
        Error::NotRepresentable(_) => TwStatus::TW_NOT_REPRESENTABLE,
        Error::NoConvergence { .. } => TwStatus::TW_NO_CONVERGENCE,
        Error::InsufficientData(_) => TwStatus::TW_INSUFFICIENT_DATA,
        Error::Memory { .. } => TwStatus::TW_MEMORY,
        Error::IllConditioned(_) => TwStatus::TW_ILL_CONDITIONED,
        Error::Verification(_) => TwStatus::TW_VERIFICATION,
        _ => TwStatus::TW_INVALID_ARGUMENT,
    }
}

enum Fail {
    Null,
    Status(TwStatus, String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Status(status_of(&e), e.to_string())
    }
}

/// Runs `f`, catching panics and recording errors.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TwStatus::TW_OK,
        Ok(Err(Fail::Null)) => {
            set_error("null pointer argument");
            TwStatus::TW_NULL_POINTER
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal error: {msg}"));
            TwStatus::TW_INTERNAL
        }
    }
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null)
}

unsafe fn cstr<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null);
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Status(TwStatus::TW_INVALID_ARGUMENT, "string is not UTF-8".into()))
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null);
    }
    out.write(v);
    Ok(())
}

unsafe fn copy_out(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), Fail> {
    let n = s.len() + 1;
    if !needed.is_null() {
        needed.write(n);
    }
    if len < n || buf.is_null() {
        return Err(Fail::Status(
            TwStatus::TW_BUFFER_TOO_SMALL,
            format!("buffer of {len} bytes, {n} needed"),
        ));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

fn invalid(msg: &str) -> Fail {
    Fail::Status(TwStatus::TW_INVALID_ARGUMENT, msg.into())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the last failure on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// ---------------------------------------------------------------------------
// Step sets

/// Parse `"dx,dy,w;dx,dy,w;…"` (weights are rationals such as `1/2`).
#[no_mangle]
pub unsafe extern "C" fn tw_steps_parse(spec: *const c_char, out: *mut *mut TwStepSet) -> TwStatus {
    guard(|| {
        let s = StepSet::parse(cstr(spec)?)?;
        put(out, Box::into_raw(Box::new(TwStepSet(s))))
    })
}

/// Kreweras steps W, S, NE.
#[no_mangle]
pub unsafe extern "C" fn tw_steps_kreweras(out: *mut *mut TwStepSet) -> TwStatus {
    guard(|| put(out, Box::into_raw(Box::new(TwStepSet(StepSet::kreweras())))))
}

/// N, E, S, W and NE with weight `a_num/a_den`.
#[no_mangle]
pub unsafe extern "C" fn tw_steps_amodel(
    a_num: i64,
    a_den: i64,
    out: *mut *mut TwStepSet,
) -> TwStatus {
    guard(|| {
        if a_den == 0 {
            return Err(invalid("zero denominator"));
        }
        let s = StepSet::amodel(&Rational::from((a_num, a_den)))?;
        put(out, Box::into_raw(Box::new(TwStepSet(s))))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tw_steps_free(s: *mut TwStepSet) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Canonical string form of a step set.
#[no_mangle]
pub unsafe extern "C" fn tw_steps_to_string(
    s: *const TwStepSet,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> TwStatus {
    guard(|| copy_out(&deref(s)?.0.to_spec_string(), buf, len, needed))
}

// ---------------------------------------------------------------------------
// Counting

/// Count quadrant walks from the origin up to length `n_max`, tracking the
/// `ncells` cells `(cells[2k], cells[2k+1])`. `param` is the scale for the
/// scaled backend and the modulus for the modular one (0: the default).
#[no_mangle]
pub unsafe extern "C" fn tw_count(
    steps: *const TwStepSet,
    n_max: usize,
    backend: TwBackend,
    param: f64,
    cells: *const usize,
    ncells: usize,
    out: *mut *mut TwCountTable,
) -> TwStatus {
    guard(|| {
        let st = &deref(steps)?.0;
        if cells.is_null() || ncells == 0 {
            return Err(invalid("no cells to track"));
        }
        let flat = std::slice::from_raw_parts(cells, 2 * ncells);
        let list = flat.chunks(2).map(|c| (c[0], c[1])).collect();
        let backend = match backend {
            TwBackend::TW_BACKEND_EXACT => Backend::Exact,
            TwBackend::TW_BACKEND_SCALED => {
                if !(param > 0.0 && param.is_finite()) {
                    return Err(invalid("scale must be positive"));
                }
                Backend::Scaled { scale: param }
            }
            TwBackend::TW_BACKEND_MODULAR => Backend::Modular {
                modulus: if param == 0.0 {
                    thetawalk::walk::DEFAULT_MODULUS
                } else {
                    param as u64
                },
            },
        };
        let t = dp_count(st, n_max, backend, Track::Cells(list))?;
        put(out, Box::into_raw(Box::new(TwCountTable(t))))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tw_count_free(t: *mut TwCountTable) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

#[no_mangle]
pub unsafe extern "C" fn tw_count_n_max(t: *const TwCountTable, out: *mut usize) -> TwStatus {
    guard(|| put(out, deref(t)?.0.n_max))
}

/// Count as a double (may overflow to infinity for long walks).
#[no_mangle]
pub unsafe extern "C" fn tw_count_value(
    t: *const TwCountTable,
    i: usize,
    j: usize,
    n: usize,
    out: *mut f64,
) -> TwStatus {
    guard(|| put(out, deref(t)?.0.value_f64(i, j, n)?))
}

/// `ln(count · scaleⁿ)` for scaled tables.
#[no_mangle]
pub unsafe extern "C" fn tw_count_log_scaled(
    t: *const TwCountTable,
    i: usize,
    j: usize,
    n: usize,
    out: *mut f64,
) -> TwStatus {
    guard(|| put(out, deref(t)?.0.log_scaled(i, j, n)?))
}

/// Exact count as a decimal rational string (exact tables only).
#[no_mangle]
pub unsafe extern "C" fn tw_count_exact(
    t: *const TwCountTable,
    i: usize,
    j: usize,
    n: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> TwStatus {
    guard(|| {
        let v = deref(t)?.0.exact(i, j, n)?;
        copy_out(&v.to_string(), buf, len, needed)
    })
}

/// Residue of the count (modular tables only).
#[no_mangle]
pub unsafe extern "C" fn tw_count_modular(
    t: *const TwCountTable,
    i: usize,
    j: usize,
    n: usize,
    out: *mut u64,
) -> TwStatus {
    guard(|| put(out, deref(t)?.0.modular(i, j, n)?))
}

/// Fit `κ μⁿ n^(−α)` to cell `(i, j)` over `lo ≤ n ≤ hi`, using every
/// `period`-th length counted back from `hi`.
#[no_mangle]
pub unsafe extern "C" fn tw_fit_asymptotics(
    t: *const TwCountTable,
    i: usize,
    j: usize,
    template: TwTemplate,
    lo: usize,
    hi: usize,
    period: usize,
    out: *mut TwFit,
) -> TwStatus {
    guard(|| {
        let tpl = match template {
            TwTemplate::TW_TEMPLATE_PLAIN => Template::Plain,
            TwTemplate::TW_TEMPLATE_LOG_CORRECTED => Template::LogCorrected,
        };
        let r = fit_asymptotics(&deref(t)?.0, i, j, tpl, lo, hi, period)?;
        put(
            out,
            TwFit {
                mu: r.mu,
                alpha: r.alpha,
                kappa: r.kappa,
                log_coeff: r.log_coeff.unwrap_or(f64::NAN),
                alpha_spread: r.alpha_spread,
                mu_spread: r.mu_spread,
                rms_residual: r.rms_residual,
                condition: r.condition,
                richardson_mu: r.richardson_mu,
                richardson_alpha: r.richardson_alpha,
                points: r.points,
            },
        )
    })
}

// ---------------------------------------------------------------------------
// Closed forms

#[no_mangle]
pub unsafe extern "C" fn tw_kreweras_asymptotics(out: *mut TwKrewerasAsymptotics) -> TwStatus {
    guard(|| {
        let k = kw_transfer_asymptotics(&Cf::zero(128))?;
        put(
            out,
            TwKrewerasAsymptotics {
                amplitude: k.amplitude,
                exponent: k.exponent,
                growth_per_step: k.growth_per_step,
                period: k.period,
            },
        )
    })
}

/// Parameters of the a-model at weight `a`, computed with `precision` bits.
#[no_mangle]
pub unsafe extern "C" fn tw_amodel_new(
    a: f64,
    precision: u32,
    out: *mut *mut TwAmodel,
) -> TwStatus {
    guard(|| {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("a must be positive"));
        }
        if !(64..=1 << 16).contains(&precision) {
            return Err(invalid("precision outside [64, 65536]"));
        }
        let m = ModelParams::new(&Float::with_val(precision, a))?;
        put(out, Box::into_raw(Box::new(TwAmodel(m))))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tw_amodel_free(m: *mut TwAmodel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Critical point `t_c`, exponent `ρ` (counts decay like `n^{-1-ρ}`),
/// amplitude `C`, modulus-like parameter `k` and angle `β₀`.
#[no_mangle]
pub unsafe extern "C" fn tw_amodel_constants(
    m: *const TwAmodel,
    t_c: *mut f64,
    rho: *mut f64,
    c: *mut f64,
    k: *mut f64,
    beta0: *mut f64,
) -> TwStatus {
    guard(|| {
        let m = &deref(m)?.0;
        put(t_c, m.t_c.to_f64())?;
        put(rho, m.rho.to_f64())?;
        put(c, m.c.to_f64())?;
        put(k, m.k.to_f64())?;
        put(beta0, m.beta0.to_f64())
    })
}

/// First `count` coefficients `V(0), V(1), …` of the boundary harmonic
/// function; `q(i,0;n) ~ C·V(i)·t_c^{-n}·n^{-1-ρ}`.
#[no_mangle]
pub unsafe extern "C" fn tw_amodel_harmonic(
    m: *const TwAmodel,
    count: usize,
    out: *mut f64,
) -> TwStatus {
    guard(|| {
        let m = &deref(m)?.0;
        if count == 0 {
            return Ok(());
        }
        if out.is_null() {
            return Err(Fail::Null);
        }
        let v = am_harmonic_gf_coeffs(&m.a, count - 1)?;
        for (k, x) in v.iter().take(count).enumerate() {
            out.add(k).write(x.to_f64());
        }
        Ok(())
    })
}

/// All parameters as JSON with full-precision decimal strings.
#[no_mangle]
pub unsafe extern "C" fn tw_amodel_to_json(
    m: *const TwAmodel,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> TwStatus {
    guard(|| copy_out(&deref(m)?.0.to_json().to_string(), buf, len, needed))
}
