//! C interface to `sps-core`.
//!
//! Objects are opaque handles created by `sps_*_new`/producer functions and
//! released with the matching `sps_*_free`. Every fallible call returns an
//! [`SpsStatus`]; the message of the most recent failure on the calling
//! thread is available through [`sps_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64;
use sps_core::minimize::{self, GroundStateResult, MinimizeConfig};
use sps_core::{constants, identities, snapshot, spectral};
use sps_core::{Error, Field, Grid, Params, Variant};

/// Status codes. Values 2 to 5 coincide with the `sps` exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpsStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Numerical = 3,
    Unbounded = 4,
    Verification = 5,
    Parse = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Opaque grid handle.
pub struct SpsGrid(Grid);

/// Opaque field handle.
pub struct SpsField(Field);

/// Opaque handle to a finished minimization.
pub struct SpsGroundState(GroundStateResult);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpsEnergy {
    pub kinetic: f64,
    pub hartree: f64,
    pub potential: f64,
    pub total: f64,
    pub l2_sq: f64,
    pub lp_p: f64,
    pub h_half_sq: f64,
    pub hdot_half_sq: f64,
    pub h_minus_half_sq: f64,
    pub d_value: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpsIdentityReport {
    pub virial_residual: f64,
    pub virial_relative: f64,
    pub pohozaev_residual: f64,
    pub pohozaev_relative: f64,
    pub el_residual_rel: f64,
    pub omega: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SpsStatus {
    match e {
        Error::Parse(_) => SpsStatus::Parse,
        Error::Io(_) => SpsStatus::Io,
        Error::Unbounded { .. } => SpsStatus::Unbounded,
        Error::Verification(_) => SpsStatus::Verification,
        Error::Config(_) | Error::Json(_) => SpsStatus::Config,
        _ => SpsStatus::Numerical,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), SpsStatus>) -> SpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside sps".into());
            SpsStatus::Panic
        }
    }
}

fn lift<T>(r: sps_core::Result<T>) -> Result<T, SpsStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, SpsStatus> {
    if p.is_null() {
        set_error("null pointer argument".into());
        Err(SpsStatus::NullPointer)
    } else {
        Ok(&*p)
    }
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, SpsStatus> {
    if p.is_null() {
        set_error("null output pointer".into());
        Err(SpsStatus::NullPointer)
    } else {
        Ok(&mut *p)
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, SpsStatus> {
    let s = CStr::from_ptr(deref(p)?).to_str().map_err(|_| {
        set_error("path is not valid UTF-8".into());
        SpsStatus::Config
    })?;
    Ok(Path::new(s))
}

fn params(alpha: f64, beta: f64, p: f64, rho: f64) -> Result<Params, SpsStatus> {
    lift(Params::new(alpha, beta, p, rho))
}

/// Couplings for evaluating a field whose mass sets `ρ`.
fn params_for(field: &Field, alpha: f64, beta: f64, p: f64) -> Result<Params, SpsStatus> {
    let m = field.mass();
    params(alpha, beta, p, if m > 0.0 { m } else { 1.0 })
}

/// Copies the last error message (NUL-terminated) into `buf`. Returns the
/// message length in bytes excluding the terminator; nothing is written
/// when `buf` is null or `len` is too small.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sps_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > bytes.len() {
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
            *buf.add(bytes.len()) = 0;
        }
        bytes.len()
    })
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn sps_grid_new(n: usize, box_length: f64, out: *mut *mut SpsGrid) -> SpsStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let g = lift(Grid::new(n, box_length))?;
        *out = Box::into_raw(Box::new(SpsGrid(g)));
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle from [`sps_grid_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sps_grid_free(grid: *mut SpsGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of grid points `n³`.
///
/// # Safety
/// `grid` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sps_grid_len(grid: *const SpsGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// `A·exp(−|x|²/w²)` centered in the box.
///
/// # Safety
/// `grid` must be a live handle, `out` valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn sps_field_gaussian(
    grid: *const SpsGrid,
    amplitude: f64,
    width: f64,
    out: *mut *mut SpsField,
) -> SpsStatus {
    guard(|| {
        let g = deref(grid)?;
        let out = out_ptr(out)?;
        if !(amplitude.is_finite() && width.is_finite() && width > 0.0) {
            set_error(format!("invalid gaussian amplitude {amplitude} or width {width}"));
            return Err(SpsStatus::Config);
        }
        let f = Field::gaussian(&g.0, amplitude, width, [0.0; 3]);
        *out = Box::into_raw(Box::new(SpsField(f)));
        Ok(())
    })
}

/// Builds a field from `len = 2n³` doubles holding `(re, im)` pairs,
/// x fastest.
///
/// # Safety
/// `values` must be valid for reading `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sps_field_from_values(
    grid: *const SpsGrid,
    values: *const f64,
    len: usize,
    out: *mut *mut SpsField,
) -> SpsStatus {
    guard(|| {
        let g = deref(grid)?;
        let v = deref(values)?;
        let out = out_ptr(out)?;
        if len != 2 * g.0.len() {
            set_error(format!("expected {} doubles, got {len}", 2 * g.0.len()));
            return Err(SpsStatus::Config);
        }
        let raw = std::slice::from_raw_parts(v as *const f64, len);
        let vals = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let f = lift(Field::from_values(&g.0, vals))?;
        *out = Box::into_raw(Box::new(SpsField(f)));
        Ok(())
    })
}

/// Writes the `(re, im)` pairs of `field` into `buf` (`len = 2n³`).
///
/// # Safety
/// `buf` must be valid for writing `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sps_field_values(field: *const SpsField, buf: *mut f64, len: usize) -> SpsStatus {
    guard(|| {
        let f = deref(field)?;
        let buf = out_ptr(buf)?;
        let vals = f.0.values();
        if len < 2 * vals.len() {
            set_error(format!("buffer holds {len} doubles, need {}", 2 * vals.len()));
            return Err(SpsStatus::BufferTooSmall);
        }
        let dst = std::slice::from_raw_parts_mut(buf as *mut f64, 2 * vals.len());
        for (d, v) in dst.chunks_exact_mut(2).zip(vals) {
            d[0] = v.re;
            d[1] = v.im;
        }
        Ok(())
    })
}

/// `‖u‖₂²`, or NaN for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sps_field_mass(field: *const SpsField) -> f64 {
    field.as_ref().map_or(f64::NAN, |f| f.0.mass())
}

/// # Safety
/// `field` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sps_field_free(field: *mut SpsField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string, `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sps_field_read(path: *const c_char, out: *mut *mut SpsField) -> SpsStatus {
    guard(|| {
        let p = path_arg(path)?;
        let out = out_ptr(out)?;
        let f = lift(snapshot::read_snapshot(p))?;
        *out = Box::into_raw(Box::new(SpsField(f)));
        Ok(())
    })
}

/// # Safety
/// `field` must be a live handle, `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sps_field_write(field: *const SpsField, path: *const c_char) -> SpsStatus {
    guard(|| {
        let f = deref(field)?;
        let p = path_arg(path)?;
        lift(snapshot::write_snapshot(p, &f.0))
    })
}

/// Energy breakdown with `ρ` taken from the field.
///
/// # Safety
/// `field` must be a live handle, `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sps_energy(
    field: *const SpsField,
    alpha: f64,
    beta: f64,
    p: f64,
    homogeneous: bool,
    out: *mut SpsEnergy,
) -> SpsStatus {
    guard(|| {
        let f = deref(field)?;
        let out = out_ptr(out)?;
        let prm = params_for(&f.0, alpha, beta, p)?;
        let variant = if homogeneous {
            Variant::Homogeneous
        } else {
            Variant::Inhomogeneous
        };
        let e = lift(spectral::energy(&f.0, &prm, variant))?;
        *out = SpsEnergy {
            kinetic: e.kinetic,
            hartree: e.hartree,
            potential: e.potential,
            total: e.total,
            l2_sq: e.norms.l2_sq,
            lp_p: e.norms.lp_p,
            h_half_sq: e.norms.h_half_sq,
            hdot_half_sq: e.norms.hdot_half_sq,
            h_minus_half_sq: e.norms.h_minus_half_sq,
            d_value: e.d_value,
        };
        Ok(())
    })
}

/// Identity residuals; `omega` is extracted from the field when NaN.
///
/// # Safety
/// `field` must be a live handle, `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sps_identity_report(
    field: *const SpsField,
    alpha: f64,
    beta: f64,
    p: f64,
    omega: f64,
    out: *mut SpsIdentityReport,
) -> SpsStatus {
    guard(|| {
        let f = deref(field)?;
        let out = out_ptr(out)?;
        let prm = params_for(&f.0, alpha, beta, p)?;
        let w = (!omega.is_nan()).then_some(omega);
        let r = lift(identities::identity_report(&f.0, &prm, w))?;
        *out = SpsIdentityReport {
            virial_residual: r.virial_residual,
            virial_relative: r.virial_relative(),
            pohozaev_residual: r.pohozaev_residual,
            pohozaev_relative: r.pohozaev_relative(),
            el_residual_rel: r.el_residual_rel,
            omega: r.omega,
        };
        Ok(())
    })
}

/// Weinstein quotient of `field`.
///
/// # Safety
/// `field` must be a live handle, `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sps_weinstein_quotient(field: *const SpsField, out: *mut f64) -> SpsStatus {
    guard(|| {
        let f = deref(field)?;
        let out = out_ptr(out)?;
        *out = lift(constants::weinstein_quotient(&f.0))?;
        Ok(())
    })
}

/// Minimizes from the default Gaussian start; other settings keep their
/// library defaults. `max_iters = 0` returns the projected start.
///
/// # Safety
/// `grid` must be a live handle, `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sps_minimize(
    grid: *const SpsGrid,
    alpha: f64,
    beta: f64,
    p: f64,
    rho: f64,
    max_iters: usize,
    grad_tol: f64,
    out: *mut *mut SpsGroundState,
) -> SpsStatus {
    guard(|| {
        let g = deref(grid)?;
        let out = out_ptr(out)?;
        let prm = params(alpha, beta, p, rho)?;
        let cfg = MinimizeConfig {
            max_iters,
            grad_tol,
            ..Default::default()
        };
        let r = lift(minimize::minimize(&g.0, &prm, &cfg))?;
        *out = Box::into_raw(Box::new(SpsGroundState(r)));
        Ok(())
    })
}

/// # Safety
/// `state` must be a live handle, the outputs valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sps_ground_state_summary(
    state: *const SpsGroundState,
    energy: *mut f64,
    omega: *mut f64,
    converged: *mut bool,
    iterations: *mut usize,
) -> SpsStatus {
    guard(|| {
        let s = &deref(state)?.0;
        *out_ptr(energy)? = s.energy.total;
        *out_ptr(omega)? = s.omega;
        *out_ptr(converged)? = s.converged;
        *out_ptr(iterations)? = s.iterations;
        Ok(())
    })
}

/// Copies the minimizer into a new field handle.
///
/// # Safety
/// `state` must be a live handle, `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sps_ground_state_field(state: *const SpsGroundState, out: *mut *mut SpsField) -> SpsStatus {
    guard(|| {
        let s = deref(state)?;
        let out = out_ptr(out)?;
        *out = Box::into_raw(Box::new(SpsField(s.0.field.clone())));
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sps_ground_state_free(state: *mut SpsGroundState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}
