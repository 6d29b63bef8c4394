//! C interface to `berglab`.
//!
//! Weights, measures and Toeplitz operators cross the boundary as opaque
//! heap handles, created by a constructor that writes through an out-pointer
//! and released with the matching `*_free`. Every fallible call returns a
//! [`BlStatus`]; on failure [`bl_last_error`] describes what went wrong.
//! Panics are caught at the boundary and reported as [`BlStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use berglab::carleson::{embedding_norm, m0_sup, ShellGrid, DEFAULT_CUTOFF};
use berglab::error::Error;
use berglab::estimate::{Budget, SearchSpace};
use berglab::geometry::DiskPoint;
use berglab::kernel::kernel_coeffs;
use berglab::measures::{Measure, MeasureSpec};
use berglab::toeplitz::{toeplitz_norm_exact_22, ToeplitzOperator};
use berglab::weights::RadialWeight;
use num_complex::Complex64;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Accuracy = 4,
    Unsupported = 5,
    Config = 6,
    Internal = 7,
    Panic = 8,
}

/// Radial weight handle.
pub struct BlWeight(RadialWeight);

/// Positive measure handle.
pub struct BlMeasure(Measure);

/// Toeplitz operator handle; owns copies of its measure and weight.
pub struct BlOperator(ToeplitzOperator);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(BlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Domain(_) => BlStatus::Domain,
            Error::InvalidParameter(_) | Error::NonIntegrable(_) => BlStatus::InvalidArgument,
            Error::Accuracy { .. } => BlStatus::Accuracy,
            Error::Unsupported(_) => BlStatus::Unsupported,
            Error::Config(_) | Error::Json(_) => BlStatus::Config,
            Error::Internal(_) | Error::Io(_) => BlStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn null(name: &str) -> Failure {
    Failure(BlStatus::NullPointer, format!("`{name}` is null"))
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Outcome>(f: F) -> BlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BlStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            BlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Outcome {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> Outcome {
    write(out, Box::into_raw(Box::new(value)), "out")
}

fn free<T>(p: *mut T) {
    if !p.is_null() {
        // Panics in drop must not cross the boundary.
        let _ = catch_unwind(AssertUnwindSafe(|| drop(unsafe { Box::from_raw(p) })));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Standard weight `(α+1)(1-r²)^α`, `α > -1`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn bl_weight_standard(alpha: f64, out: *mut *mut BlWeight) -> BlStatus {
    guard(|| write_handle(out, BlWeight(RadialWeight::standard(alpha)?)))
}

/// Power weight `(1-r)^a`, `a > -1`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn bl_weight_power(exponent: f64, out: *mut *mut BlWeight) -> BlStatus {
    guard(|| write_handle(out, BlWeight(RadialWeight::power(exponent)?)))
}

/// `ω(r)` for `0 <= r < 1`.
///
/// # Safety
/// `w` must come from a weight constructor; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_weight_eval(w: *const BlWeight, r: f64, out: *mut f64) -> BlStatus {
    guard(|| {
        let w = deref(w, "w")?;
        write(out, w.0.eval(r)?, "out")
    })
}

/// Moment `ω_x = ∫₀¹ r^x ω(r) dr`.
///
/// # Safety
/// `w` must come from a weight constructor; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_weight_moment(w: *const BlWeight, x: f64, out: *mut f64) -> BlStatus {
    guard(|| {
        let w = deref(w, "w")?;
        write(out, w.0.moment(x)?, "out")
    })
}

/// # Safety
/// `w` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bl_weight_free(w: *mut BlWeight) {
    free(w)
}

/// Finite sum of point masses at `re[i] + i·im[i]`.
///
/// # Safety
/// `re`, `im` and `masses` must each hold `len` values (they may be null
/// when `len` is 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_measure_atomic(
    re: *const f64,
    im: *const f64,
    masses: *const f64,
    len: usize,
    out: *mut *mut BlMeasure,
) -> BlStatus {
    guard(|| {
        let slice = |p: *const f64, name: &str| -> Result<&[f64], Failure> {
            match (p.is_null(), len) {
                (_, 0) => Ok(&[]),
                (true, _) => Err(null(name)),
                (false, _) => Ok(std::slice::from_raw_parts(p, len)),
            }
        };
        let (re, im, masses) = (slice(re, "re")?, slice(im, "im")?, slice(masses, "masses")?);
        let points = re
            .iter()
            .zip(im)
            .map(|(&x, &y)| DiskPoint::new(Complex64::new(x, y)))
            .collect::<berglab::error::Result<Vec<_>>>()?;
        write_handle(out, BlMeasure(Measure::atomic(points, masses.to_vec())?))
    })
}

/// `w dA`.
///
/// # Safety
/// `w` must come from a weight constructor; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_measure_radial(w: *const BlWeight, out: *mut *mut BlMeasure) -> BlStatus {
    guard(|| {
        let w = deref(w, "w")?;
        write_handle(out, BlMeasure(Measure::radial(w.0.clone())))
    })
}

/// Measure from its JSON description, e.g. `{"type": "power", "a": 0.5}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_measure_from_json(json: *const c_char, out: *mut *mut BlMeasure) -> BlStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(BlStatus::Config, format!("json is not UTF-8: {e}")))?;
        let spec: MeasureSpec = serde_json::from_str(text).map_err(Error::from)?;
        write_handle(out, BlMeasure(spec.build()?))
    })
}

/// `μ(𝔻)`.
///
/// # Safety
/// `m` must come from a measure constructor; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_measure_total_mass(m: *const BlMeasure, out: *mut f64) -> BlStatus {
    guard(|| {
        let m = deref(m, "m")?;
        write(out, m.0.total_mass(), "out")
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bl_measure_free(m: *mut BlMeasure) {
    free(m)
}

/// Reproducing kernel `B_z(ξ)` of `A_w^2` from its first `terms + 1`
/// coefficients. Fails with [`BlStatus::Accuracy`] when that truncation is
/// too short at `|z̄ξ|`.
///
/// # Safety
/// `w` must come from a weight constructor; `out_re`, `out_im` writable.
#[no_mangle]
pub unsafe extern "C" fn bl_kernel_eval(
    w: *const BlWeight,
    terms: usize,
    z_re: f64,
    z_im: f64,
    xi_re: f64,
    xi_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> BlStatus {
    guard(|| {
        let w = deref(w, "w")?;
        let z = DiskPoint::new(Complex64::new(z_re, z_im))?;
        let xi = DiskPoint::new(Complex64::new(xi_re, xi_im))?;
        let v = kernel_coeffs(&w.0, terms)?.eval(z.z(), xi.z())?;
        write(out_re, v.re, "out_re")?;
        write(out_im, v.im, "out_im")
    })
}

/// `T_μ` on `A_w^2`.
///
/// # Safety
/// `m` and `w` must come from their constructors; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_toeplitz_new(
    m: *const BlMeasure,
    w: *const BlWeight,
    out: *mut *mut BlOperator,
) -> BlStatus {
    guard(|| {
        let (m, w) = (deref(m, "m")?, deref(w, "w")?);
        write_handle(out, BlOperator(ToeplitzOperator::new(&m.0, &w.0)?))
    })
}

/// # Safety
/// `op` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bl_toeplitz_free(op: *mut BlOperator) {
    free(op)
}

/// Norm of `T_μ: A_w^2 → A_w^2`, starting from `basis` monomials.
///
/// # Safety
/// `op` must come from [`bl_toeplitz_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_toeplitz_norm_22(op: *const BlOperator, basis: usize, out: *mut f64) -> BlStatus {
    guard(|| {
        let op = deref(op, "op")?;
        write(out, toeplitz_norm_exact_22(&op.0, basis)?.value, "out")
    })
}

/// Galerkin matrix `⟨T e_k, e_j⟩` on the first `m` orthonormal monomials,
/// row-major into `re` and `im` (each `m * m` values).
///
/// # Safety
/// `op` must come from [`bl_toeplitz_new`]; `re` and `im` must be writable
/// for `m * m` values.
#[no_mangle]
pub unsafe extern "C" fn bl_toeplitz_matrix(
    op: *const BlOperator,
    m: usize,
    re: *mut f64,
    im: *mut f64,
) -> BlStatus {
    guard(|| {
        let op = deref(op, "op")?;
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let mat = op.0.matrix(m)?;
        let (re, im) = (
            std::slice::from_raw_parts_mut(re, m * m),
            std::slice::from_raw_parts_mut(im, m * m),
        );
        for j in 0..m {
            for k in 0..m {
                re[j * m + k] = mat[(j, k)].re;
                im[j * m + k] = mat[(j, k)].im;
            }
        }
        Ok(())
    })
}

/// Lower bound for `‖I_d‖_{A_w^p → L_μ^q}` from the standard search space.
///
/// # Safety
/// `w` and `m` must come from their constructors; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_embedding_norm(
    w: *const BlWeight,
    p: f64,
    m: *const BlMeasure,
    q: f64,
    budget: usize,
    seed: u64,
    out: *mut f64,
) -> BlStatus {
    guard(|| {
        let (w, m) = (deref(w, "w")?, deref(m, "m")?);
        let space = SearchSpace::standard(DEFAULT_CUTOFF, 4, &[]);
        let budget = Budget {
            evaluations: budget,
            seed,
        };
        write(out, embedding_norm(&w.0, p, &m.0, q, &space, &budget)?.value, "out")
    })
}

/// `M₀` with `ω = η = υ = w` over Bergman disks of radius `r`, on the
/// geometric grid with `shells` shells (`p <= q`).
///
/// # Safety
/// `m` and `w` must come from their constructors; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_m0_sup(
    m: *const BlMeasure,
    w: *const BlWeight,
    p: f64,
    q: f64,
    r: f64,
    shells: u32,
    out: *mut f64,
) -> BlStatus {
    guard(|| {
        let (m, w) = (deref(m, "m")?, deref(w, "w")?);
        let grid = ShellGrid::geometric(shells);
        let rep = m0_sup(&m.0, &w.0, &w.0, &w.0, p, q, r, &grid)?;
        write(out, rep.value, "out")
    })
}
