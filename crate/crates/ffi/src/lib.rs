//! C ABI for lamperti-kit.
//!
//! Conventions:
//! - every fallible call returns an [`LkStatus`]; on failure the message is
//!   available from [`lk_last_error_message`] on the same thread;
//! - specs and paths are opaque handles, released with the matching
//!   `lk_*_free`;
//! - strings returned through `char **` are owned by the caller and released
//!   with [`lk_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lamperti_kit::io::{map_path_csv, mssmp_path_csv};
use lamperti_kit::lamperti::{forward_transform, inverse_transform, Lifetime, MssmpPath};
use lamperti_kit::model::{exponent_matrix, validate_spec, MapSpec};
use lamperti_kit::sampler::{sample_map_path, MapPath, SimConfig};
use lamperti_kit::spectral::{classify, ClassifyOptions};
use lamperti_kit::Error;

/// Result codes. `LK_STATUS_OK` is zero; everything else is an error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Spec = 4,
    Domain = 5,
    Grid = 6,
    Partition = 7,
    Reducible = 8,
    Condition = 9,
    Config = 10,
    Io = 11,
    OutOfRange = 12,
    BufferTooSmall = 13,
    Panic = 99,
}

impl From<&Error> for LkStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => LkStatus::Domain,
            Error::Spec(_) => LkStatus::Spec,
            Error::Grid(_) => LkStatus::Grid,
            Error::Partition(_) => LkStatus::Partition,
            Error::Reducible(_) => LkStatus::Reducible,
            Error::Condition(_) => LkStatus::Condition,
            Error::Config(_) => LkStatus::Config,
            Error::Parse(_) => LkStatus::Parse,
            Error::Io(_) => LkStatus::Io,
        }
    }
}

/// A validated MAP specification.
pub struct LkSpec(MapSpec);

/// A simulated MAP path `(J, xi)`.
pub struct LkMapPath(MapPath);

/// An mssMp path on its time grid.
pub struct LkMssmpPath(MssmpPath);

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

struct Failure(LkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(LkStatus::from(&e), e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> LkStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Failure(LkStatus::Panic, format!("panic: {msg}")))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LkStatus::Ok
        }
        Err(Failure(code, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
            code
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(LkStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    // SAFETY: the caller passes either null or a live handle from this library.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and NUL-terminated per the API contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(LkStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller guarantees `len` readable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null, caller-owned storage for one `T`.
    unsafe { out.write(value) };
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    let c = CString::new(s).map_err(|_| Failure(LkStatus::InvalidUtf8, "interior NUL in output".into()))?;
    // SAFETY: as for `put`.
    unsafe { put(out, c.into_raw(), "out") }
}

unsafe fn boxed<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    // SAFETY: as for `put`.
    unsafe { put(out, Box::into_raw(Box::new(value)), "out") }
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: `p` came from `Box::into_raw` in this library and is freed once.
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Free it with
/// [`lk_string_free`].
#[no_mangle]
pub extern "C" fn lk_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .and_then(|m| CString::new(m.as_str()).ok())
            .map_or(ptr::null_mut(), CString::into_raw)
    })
}

/// # Safety
/// `s` is NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lk_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: per the contract above.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Parses and validates a spec document.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lk_spec_from_json(json: *const c_char, out: *mut *mut LkSpec) -> LkStatus {
    guard(|| unsafe {
        let spec = MapSpec::from_json(text(json, "json")?)?;
        spec.validate()?;
        boxed(out, LkSpec(spec))
    })
}

/// Writes the violations of a spec document as a JSON array of
/// `{"field", "message"}` objects (empty when valid). Returns `LK_STATUS_SPEC` when
/// there is at least one violation.
///
/// # Safety
/// As for [`lk_spec_from_json`].
#[no_mangle]
pub unsafe extern "C" fn lk_spec_validate_json(json: *const c_char, violations: *mut *mut c_char) -> LkStatus {
    guard(|| unsafe {
        let spec = MapSpec::from_json(text(json, "json")?)?;
        let found = validate_spec(&spec);
        put_string(violations, serde_json::to_string(&found).map_err(Error::from)?)?;
        if found.is_empty() {
            Ok(())
        } else {
            Err(Error::Spec(found).into())
        }
    })
}

/// # Safety
/// `spec` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lk_spec_free(spec: *mut LkSpec) {
    unsafe { release(spec) }
}

/// # Safety
/// `spec` is a live handle; `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lk_spec_to_json(spec: *const LkSpec, out: *mut *mut c_char) -> LkStatus {
    guard(|| unsafe { put_string(out, borrow(spec, "spec")?.0.to_json()?) })
}

/// Dimension `d` of the spec, or 0 for a NULL handle.
///
/// # Safety
/// `spec` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lk_spec_dimension(spec: *const LkSpec) -> usize {
    unsafe { spec.as_ref() }.map_or(0, |s| s.0.dimension())
}

/// Number of chain states, or 0 for a NULL handle.
///
/// # Safety
/// `spec` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lk_spec_states(spec: *const LkSpec) -> usize {
    unsafe { spec.as_ref() }.map_or(0, |s| s.0.n_states())
}

/// Fills `out` (row-major, `n * n` doubles) with the matrix exponent `A(u)`.
/// Returns `LK_STATUS_DOMAIN` when some Lévy exponent is infinite at `u`; finite
/// entries are still written and infinite ones are `+inf`.
///
/// # Safety
/// `u` holds `u_len` doubles and `out` has room for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lk_exponent_matrix(
    spec: *const LkSpec,
    u: *const f64,
    u_len: usize,
    out: *mut f64,
    out_len: usize,
) -> LkStatus {
    guard(|| unsafe {
        let spec = &borrow(spec, "spec")?.0;
        let u = slice(u, u_len, "u")?;
        if u.len() != spec.dimension() {
            return Err(Error::Config(format!("u has {} entries, dimension is {}", u.len(), spec.dimension())).into());
        }
        let n = spec.n_states();
        if out_len < n * n {
            return Err(Failure(LkStatus::BufferTooSmall, format!("need {} doubles", n * n)));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let a = exponent_matrix(spec, u);
        for i in 0..n {
            for j in 0..n {
                let v = if a.entry_valid(i, j) { a.entries[(i, j)] } else { f64::INFINITY };
                out.add(i * n + j).write(v);
            }
        }
        if a.is_valid() {
            Ok(())
        } else {
            Err(Error::Domain(format!("A(u) is not finite at u = {u:?}")).into())
        }
    })
}

/// Classification report as JSON. `alpha` may be NULL to use the spec's
/// index; `tol <= 0` selects the default tolerance.
///
/// # Safety
/// `alpha` is NULL or holds `alpha_len` doubles; `out` points to writable
/// storage.
#[no_mangle]
pub unsafe extern "C" fn lk_classify_json(
    spec: *const LkSpec,
    alpha: *const f64,
    alpha_len: usize,
    tol: f64,
    out: *mut *mut c_char,
) -> LkStatus {
    guard(|| unsafe {
        let spec = &borrow(spec, "spec")?.0;
        let alpha = if alpha.is_null() { spec.alpha.clone() } else { slice(alpha, alpha_len, "alpha")?.to_vec() };
        let mut opts = ClassifyOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        let report = classify(spec, &alpha, &opts)?;
        put_string(out, serde_json::to_string(&report).map_err(Error::from)?)
    })
}

/// Samples one MAP path from state 0 at the origin.
///
/// # Safety
/// `spec` is a live handle; `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lk_sample_map_path(
    spec: *const LkSpec,
    horizon: f64,
    dt: f64,
    seed: u64,
    replication: u64,
    out: *mut *mut LkMapPath,
) -> LkStatus {
    guard(|| unsafe {
        let spec = &borrow(spec, "spec")?.0;
        let path = sample_map_path(spec, &SimConfig::new(horizon, dt, seed).replication(replication))?;
        boxed(out, LkMapPath(path))
    })
}

/// # Safety
/// `path` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lk_map_path_free(path: *mut LkMapPath) {
    unsafe { release(path) }
}

/// Writes the killing time through `at` and returns 1 if the path was
/// killed, 0 otherwise (also for a NULL handle).
///
/// # Safety
/// `path` is NULL or a live handle; `at` is NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn lk_map_path_killed_at(path: *const LkMapPath, at: *mut f64) -> i32 {
    match unsafe { path.as_ref() }.and_then(|p| p.0.killed_at) {
        Some(t) => {
            if !at.is_null() {
                unsafe { at.write(t) };
            }
            1
        }
        None => 0,
    }
}

/// The path as CSV (`t,state_index,J1..Jd,xi1..xid`).
///
/// # Safety
/// `path` is a live handle; `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lk_map_path_csv(path: *const LkMapPath, out: *mut *mut c_char) -> LkStatus {
    guard(|| unsafe {
        let bytes = map_path_csv(&borrow(path, "path")?.0)?;
        put_string(out, String::from_utf8(bytes).expect("CSV output is UTF-8"))
    })
}

/// Lamperti transform with index `alpha`.
///
/// # Safety
/// `path` is a live handle; `alpha` holds `alpha_len` doubles; `out` points to
/// writable storage.
#[no_mangle]
pub unsafe extern "C" fn lk_forward_transform(
    path: *const LkMapPath,
    alpha: *const f64,
    alpha_len: usize,
    out: *mut *mut LkMssmpPath,
) -> LkStatus {
    guard(|| unsafe {
        let path = &borrow(path, "path")?.0;
        let x = forward_transform(path, slice(alpha, alpha_len, "alpha")?)?;
        boxed(out, LkMssmpPath(x))
    })
}

/// Recovers the MAP path from an mssMp path.
///
/// # Safety
/// As for [`lk_forward_transform`].
#[no_mangle]
pub unsafe extern "C" fn lk_inverse_transform(
    path: *const LkMssmpPath,
    alpha: *const f64,
    alpha_len: usize,
    out: *mut *mut LkMapPath,
) -> LkStatus {
    guard(|| unsafe {
        let path = &borrow(path, "path")?.0;
        let back = inverse_transform(path, slice(alpha, alpha_len, "alpha")?)?;
        boxed(out, LkMapPath(back))
    })
}

/// # Safety
/// `path` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lk_mssmp_path_free(path: *mut LkMssmpPath) {
    unsafe { release(path) }
}

/// Number of grid points, or 0 for a NULL handle.
///
/// # Safety
/// `path` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lk_mssmp_path_len(path: *const LkMssmpPath) -> usize {
    unsafe { path.as_ref() }.map_or(0, |p| p.0.len())
}

/// Dimension of the path, or 0 for a NULL handle.
///
/// # Safety
/// `path` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lk_mssmp_path_dim(path: *const LkMssmpPath) -> usize {
    unsafe { path.as_ref() }.map_or(0, |p| p.0.dim())
}

/// Grid point `k`: its time, `d` coordinates into `x` and the orthant index
/// (-1 once absorbed).
///
/// # Safety
/// `path` is a live handle; `t` and `label` are writable; `x` has room for
/// `x_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lk_mssmp_path_point(
    path: *const LkMssmpPath,
    k: usize,
    t: *mut f64,
    x: *mut f64,
    x_len: usize,
    label: *mut i64,
) -> LkStatus {
    guard(|| unsafe {
        let p = &borrow(path, "path")?.0;
        if k >= p.len() {
            return Err(Failure(LkStatus::OutOfRange, format!("index {k} >= {}", p.len())));
        }
        let d = p.dim();
        if x_len < d {
            return Err(Failure(LkStatus::BufferTooSmall, format!("need {d} doubles")));
        }
        if x.is_null() {
            return Err(null("x"));
        }
        put(t, p.times[k], "t")?;
        ptr::copy_nonoverlapping(p.values[k].as_ptr(), x, d);
        put(label, p.labels[k].map_or(-1, |l| l as i64), "label")
    })
}

/// Lifetime: returns 1 and writes `zeta` if absorbed, 0 and writes the
/// censoring time otherwise; -1 for a NULL handle.
///
/// # Safety
/// `path` is NULL or a live handle; `time` is NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn lk_mssmp_path_lifetime(path: *const LkMssmpPath, time: *mut f64) -> i32 {
    let Some(p) = (unsafe { path.as_ref() }) else { return -1 };
    let (flag, t) = match p.0.lifetime {
        Lifetime::Absorbed { zeta } => (1, zeta),
        Lifetime::Censored { at } => (0, at),
    };
    if !time.is_null() {
        unsafe { time.write(t) };
    }
    flag
}

/// The path as CSV (`t,X1..Xd,orthant_index`).
///
/// # Safety
/// `path` is a live handle; `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lk_mssmp_path_csv(path: *const LkMssmpPath, out: *mut *mut c_char) -> LkStatus {
    guard(|| unsafe {
        let bytes = mssmp_path_csv(&borrow(path, "path")?.0)?;
        put_string(out, String::from_utf8(bytes).expect("CSV output is UTF-8"))
    })
}
