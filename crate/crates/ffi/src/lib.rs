//! C ABI for the isospec toolkit.
//!
//! Objects cross the boundary as opaque handles (`IsoJMap`) or as
//! NUL-terminated JSON strings owned by the library. Every fallible function
//! returns an [`IsoStatus`]; on failure a description is available from
//! [`iso_last_error_message`] until the next call on the same thread.
//! Strings returned through `char **` must be released with
//! [`iso_string_free`], handles with [`iso_jmap_free`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use isospec::config::RunConfig;
use isospec::continuation::generate_isospectral_family;
use isospec::io::{jmap_from_json, jmap_to_json};
use isospec::jmap::{is_generic, non_equivalence_certificate, spectral_deviation, trace_invariant, JMap};
use isospec::orbit::{orbit_angle, stratum_area, stratum_gram, OrbitStratum};
use isospec::sphere::SpaceParams;
use isospec::su_algebra::DEFAULT_RANK_TOL;
use isospec::verify::{canonical_json, verify_pair};
use isospec::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsoStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A parameter is out of range (dimension, step size, tolerance...).
    InvalidArgument = 3,
    /// A JSON document did not match its schema.
    Schema = 4,
    /// A numerical precondition failed (singular point, divergence...).
    Numerical = 5,
    /// Two j-maps have different spectra where equal ones are required.
    SpectraDiffer = 6,
    Io = 7,
    /// A bug: the library panicked. The call had no effect.
    Internal = 8,
}

/// Opaque j-map handle.
pub struct IsoJMap(JMap);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> IsoStatus {
    match e {
        Error::SchemaError { .. } => IsoStatus::Schema,
        Error::Io(_) => IsoStatus::Io,
        Error::SpectraDiffer { .. } => IsoStatus::SpectraDiffer,
        Error::InvalidParameter(_)
        | Error::DomainError(_)
        | Error::DimensionMismatch { .. }
        | Error::NotSquare { .. }
        | Error::NotSkewHermitian { .. }
        | Error::NotTraceless { .. } => IsoStatus::InvalidArgument,
        _ => IsoStatus::Numerical,
    }
}

struct Fail(IsoStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> IsoStatus {
    set_last_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IsoStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            IsoStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(IsoStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn handle<'a>(p: *const IsoJMap, what: &str) -> Result<&'a JMap, Fail> {
    p.as_ref().map(|h| &h.0).ok_or_else(|| null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn string_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(IsoStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(IsoStatus::Internal, "string contains NUL".into()))
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call into the library.
#[no_mangle]
pub extern "C" fn iso_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn iso_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn iso_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a j-map document `{"m": ..., "j1": ..., "j2": ...}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn iso_jmap_from_json(json: *const c_char, out: *mut *mut IsoJMap) -> IsoStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let j = jmap_from_json(string_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(IsoJMap(j)));
        Ok(())
    })
}

/// Canonical JSON text of a j-map.
///
/// # Safety
/// `j` must be a live handle; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn iso_jmap_to_json(j: *const IsoJMap, out: *mut *mut c_char) -> IsoStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = into_c_string(jmap_to_json(handle(j, "j")?))?;
        Ok(())
    })
}

/// A Gaussian random j-map in `su(m)`, `m >= 3`, drawn from `seed`.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn iso_jmap_random(seed: u64, m: usize, out: *mut *mut IsoJMap) -> IsoStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        *out = Box::into_raw(Box::new(IsoJMap(JMap::random(&mut rng, m)?)));
        Ok(())
    })
}

/// Frobenius bound on `A A^H - I` accepted by [`iso_jmap_conjugate`].
pub const UNITARY_TOL: f64 = 1e-10;

/// `A j A^H` for a unitary `A` given row-major as `2 m^2` doubles
/// (interleaved real and imaginary parts).
///
/// # Safety
/// `a` must point to `2 m^2` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn iso_jmap_conjugate(
    j: *const IsoJMap,
    a: *const f64,
    out: *mut *mut IsoJMap,
) -> IsoStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let j = handle(j, "j")?;
        if a.is_null() {
            return Err(null("a"));
        }
        let m = j.m();
        let raw = std::slice::from_raw_parts(a, 2 * m * m);
        let mat = isospec::su_algebra::ComplexMatrix::from_fn(m, m, |r, c| {
            let k = 2 * (r * m + c);
            num_complex::Complex64::new(raw[k], raw[k + 1])
        });
        let defect = (&mat * mat.adjoint() - isospec::su_algebra::ComplexMatrix::identity(m, m)).norm();
        if !(defect <= UNITARY_TOL) {
            return Err(Fail(
                IsoStatus::InvalidArgument,
                format!("`a` is not unitary: |A A^H - I| = {defect:e}"),
            ));
        }
        *out = Box::into_raw(Box::new(IsoJMap(j.conjugate_by(&mat)?)));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `j` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn iso_jmap_free(j: *mut IsoJMap) {
    if !j.is_null() {
        drop(Box::from_raw(j));
    }
}

/// Matrix size `m` of the j-map.
///
/// # Safety
/// `j` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iso_jmap_dim(j: *const IsoJMap, out: *mut usize) -> IsoStatus {
    guard(|| {
        *out_ref(out, "out")? = handle(j, "j")?.m();
        Ok(())
    })
}

/// Largest eigenvalue gap of `j_Z` and `j'_Z` over the sampling directions.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iso_spectral_deviation(a: *const IsoJMap, b: *const IsoJMap, out: *mut f64) -> IsoStatus {
    guard(|| {
        *out_ref(out, "out")? = spectral_deviation(handle(a, "a")?, handle(b, "b")?)?;
        Ok(())
    })
}

/// Whether the spectral deviation is at most `tol`.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iso_is_isospectral_pair(
    a: *const IsoJMap,
    b: *const IsoJMap,
    tol: f64,
    out: *mut bool,
) -> IsoStatus {
    guard(|| {
        *out_ref(out, "out")? = isospec::jmap::is_isospectral_pair(handle(a, "a")?, handle(b, "b")?, tol)?;
        Ok(())
    })
}

/// Genericity at the default rank tolerance.
///
/// # Safety
/// `j` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iso_is_generic(j: *const IsoJMap, out: *mut bool) -> IsoStatus {
    guard(|| {
        *out_ref(out, "out")? = is_generic(handle(j, "j")?, DEFAULT_RANK_TOL);
        Ok(())
    })
}

/// `tr((j1^2 + j2^2)^2)`.
///
/// # Safety
/// `j` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iso_trace_invariant(j: *const IsoJMap, out: *mut f64) -> IsoStatus {
    guard(|| {
        *out_ref(out, "out")? = trace_invariant(handle(j, "j")?)?;
        Ok(())
    })
}

/// Non-equivalence certificate as JSON; `inequivalent` is set when the
/// certificate proves the maps inequivalent. Either output may be null.
///
/// # Safety
/// Handles must be live; non-null outputs writable.
#[no_mangle]
pub unsafe extern "C" fn iso_certify(
    a: *const IsoJMap,
    b: *const IsoJMap,
    json_out: *mut *mut c_char,
    inequivalent: *mut bool,
) -> IsoStatus {
    guard(|| {
        let cert = non_equivalence_certificate(handle(a, "a")?, handle(b, "b")?)?;
        if let Some(flag) = inequivalent.as_mut() {
            *flag = cert.is_inequivalent();
        }
        if let Some(out) = json_out.as_mut() {
            let v = serde_json::to_value(&cert).map_err(|e| Fail(IsoStatus::Internal, e.to_string()))?;
            *out = into_c_string(canonical_json(&v))?;
        }
        Ok(())
    })
}

/// Orbit geometry of the stratum `|v1| = a, |v2| = b` in `S^{2n+1}` with
/// weights `(p, q)`: the Gram matrix (row-major, 4 doubles) and the area.
///
/// # Safety
/// `gram_out` must hold 4 doubles or be null; `area_out` writable or null.
#[no_mangle]
pub unsafe extern "C" fn iso_orbit_stratum(
    n: usize,
    p: u32,
    q: u32,
    a: f64,
    b: f64,
    gram_out: *mut f64,
    area_out: *mut f64,
) -> IsoStatus {
    guard(|| {
        let params = SpaceParams::new(n, p, q)?;
        let st = OrbitStratum::new(a, b)?;
        if !gram_out.is_null() {
            let g = stratum_gram(&params, &st).g;
            std::slice::from_raw_parts_mut(gram_out, 4).copy_from_slice(&[g[0][0], g[0][1], g[1][0], g[1][1]]);
        }
        if let Some(area) = area_out.as_mut() {
            *area = stratum_area(&params, &st);
        }
        Ok(())
    })
}

/// Angle between the two torus generators on `|v1| = |v2| = a`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn iso_orbit_angle(n: usize, p: u32, q: u32, a: f64, out: *mut f64) -> IsoStatus {
    guard(|| {
        let params = SpaceParams::new(n, p, q)?;
        *out_ref(out, "out")? = orbit_angle(&params, a)?;
        Ok(())
    })
}

/// Full verification report for a pair, as canonical JSON. `config_json` is
/// a run configuration document or null for the defaults. The call succeeds
/// even when checks fail; `all_passed` (optional) carries the verdict.
///
/// # Safety
/// Handles must be live; `config_json` null or NUL-terminated; `report_out`
/// writable; `all_passed` writable or null.
#[no_mangle]
pub unsafe extern "C" fn iso_verify_pair(
    a: *const IsoJMap,
    b: *const IsoJMap,
    config_json: *const c_char,
    report_out: *mut *mut c_char,
    all_passed: *mut bool,
) -> IsoStatus {
    guard(|| {
        let out = out_ref(report_out, "report_out")?;
        let cfg = if config_json.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_json(string_arg(config_json, "config_json")?)?
        };
        let report = verify_pair(handle(a, "a")?, handle(b, "b")?, &cfg)?;
        if let Some(flag) = all_passed.as_mut() {
            *flag = report.all_passed();
        }
        *out = into_c_string(report.to_canonical_json())?;
        Ok(())
    })
}

/// Traces an isospectral family; writes `{"trivial", "restarts", "members"}`
/// with members in the j-map schema.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn iso_generate_family(
    seed: u64,
    m: usize,
    steps: usize,
    step_size: f64,
    out: *mut *mut c_char,
) -> IsoStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let family = generate_isospectral_family(seed, m, steps, step_size)?;
        let members: Vec<Value> = family
            .members
            .iter()
            .map(|j| serde_json::from_str(&jmap_to_json(j)).expect("own output parses"))
            .collect();
        let doc = json!({
            "trivial": family.trivial,
            "restarts": family.restarts,
            "members": members,
        });
        *out = into_c_string(canonical_json(&doc))?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn last_error_is_cleared_on_success() {
        let mut h = ptr::null_mut();
        assert_eq!(unsafe { iso_jmap_random(1, 2, &mut h) }, IsoStatus::InvalidArgument);
        let msg = unsafe { CStr::from_ptr(iso_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("m must be >= 3"));
        assert_eq!(unsafe { iso_jmap_random(1, 3, &mut h) }, IsoStatus::Ok);
        assert!(unsafe { CStr::from_ptr(iso_last_error_message()) }.is_empty());
        unsafe { iso_jmap_free(h) };
    }
}
