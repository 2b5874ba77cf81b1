//! C ABI for the solver and the CVaR projection.
//!
//! Problems, settings and results cross the boundary as opaque handles that
//! the caller frees with the matching `*_free` function. Fallible calls
//! return a [`CvqpErrorCode`]; the text of the last failure on the calling
//! thread is available from [`cvqp_last_error_message`]. Matrices are
//! passed row-major.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cvqp::error::CvqpError;
use cvqp::problem::{CvarSpec, Quadratic};
use cvqp::solver::{SolverResult, SolverSettings, Status};
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqpErrorCode {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqpSolveStatus {
    Optimal = 0,
    MaxIterations = 1,
    TimeLimit = 2,
    InfeasibleInput = 3,
}

impl From<Status> for CvqpSolveStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Optimal => CvqpSolveStatus::Optimal,
            Status::MaxIterations => CvqpSolveStatus::MaxIterations,
            Status::TimeLimit => CvqpSolveStatus::TimeLimit,
            Status::InfeasibleInput => CvqpSolveStatus::InfeasibleInput,
        }
    }
}

/// Opaque problem handle.
pub struct CvqpProblem(cvqp::problem::CvqpProblem);

/// Opaque settings handle.
pub struct CvqpSettings(SolverSettings);

/// Opaque result handle.
pub struct CvqpResult(SolverResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(code: CvqpErrorCode, msg: impl Into<String>) -> CvqpErrorCode {
    set_last_error(msg);
    code
}

fn from_cvqp_error(err: CvqpError) -> CvqpErrorCode {
    let code = match err {
        CvqpError::Parse(_) => CvqpErrorCode::Parse,
        _ => CvqpErrorCode::InvalidArgument,
    };
    fail(code, err.to_string())
}

/// Runs `f`, turning a panic into `CvqpErrorCode::Panic`.
fn guard(f: impl FnOnce() -> CvqpErrorCode) -> CvqpErrorCode {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => fail(CvqpErrorCode::Panic, "internal panic"),
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Option<&'a [f64]> {
    if len == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, len))
    }
}

/// Message describing the last failure on this thread, or NULL if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cvqp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a problem from a NUL-terminated JSON document.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqp_problem_from_json(json: *const c_char, out: *mut *mut CvqpProblem) -> CvqpErrorCode {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(CvqpErrorCode::NullPointer, "null argument");
        }
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(_) => return fail(CvqpErrorCode::Parse, "document is not UTF-8"),
        };
        match cvqp::io::problem_from_json(text) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(CvqpProblem(p)));
                CvqpErrorCode::Ok
            }
            Err(e) => from_cvqp_error(e),
        }
    })
}

/// Builds a problem from dense row-major arrays.
///
/// `P` is `n x n`, `A` is `m x n`, `B` is `p x n`; `l` and `u` have `p`
/// entries and may hold infinities. Arrays of length zero may be NULL.
///
/// # Safety
/// Every non-null pointer must reference at least the stated number of
/// doubles, and `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments, non_snake_case)]
pub unsafe extern "C" fn cvqp_problem_new_dense(
    n: usize,
    m: usize,
    p: usize,
    P: *const f64,
    q: *const f64,
    A: *const f64,
    B: *const f64,
    l: *const f64,
    u: *const f64,
    beta: f64,
    kappa: f64,
    out: *mut *mut CvqpProblem,
) -> CvqpErrorCode {
    guard(|| {
        if out.is_null() {
            return fail(CvqpErrorCode::NullPointer, "null output pointer");
        }
        let (Some(pm), Some(q), Some(a), Some(b), Some(l), Some(u)) = (
            slice(P, n * n),
            slice(q, n),
            slice(A, m * n),
            slice(B, p * n),
            slice(l, p),
            slice(u, p),
        ) else {
            return fail(CvqpErrorCode::NullPointer, "null array with nonzero length");
        };
        let problem = cvqp::problem::CvqpProblem {
            p: Quadratic::Dense(DMatrix::from_row_slice(n, n, pm)),
            q: DVector::from_column_slice(q),
            a: DMatrix::from_row_slice(m, n, a),
            b: DMatrix::from_row_slice(p, n, b),
            l: DVector::from_column_slice(l),
            u: DVector::from_column_slice(u),
            beta,
            kappa,
        };
        if let Err(e) = problem.validate() {
            return from_cvqp_error(e);
        }
        *out = Box::into_raw(Box::new(CvqpProblem(problem)));
        CvqpErrorCode::Ok
    })
}

/// Writes the variable count, scenario count and side-constraint count.
///
/// # Safety
/// `problem` must be a live handle; the output pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn cvqp_problem_dims(
    problem: *const CvqpProblem,
    n: *mut usize,
    m: *mut usize,
    p: *mut usize,
) -> CvqpErrorCode {
    let Some(problem) = problem.as_ref() else {
        return fail(CvqpErrorCode::NullPointer, "null problem");
    };
    for (dst, v) in [(n, problem.0.n()), (m, problem.0.m()), (p, problem.0.p_rows())] {
        if !dst.is_null() {
            *dst = v;
        }
    }
    CvqpErrorCode::Ok
}

/// # Safety
/// `problem` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cvqp_problem_free(problem: *mut CvqpProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Default solver settings; free with `cvqp_settings_free`.
#[no_mangle]
pub extern "C" fn cvqp_settings_default() -> *mut CvqpSettings {
    Box::into_raw(Box::new(CvqpSettings(SolverSettings::default())))
}

/// # Safety
/// `settings` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cvqp_settings_free(settings: *mut CvqpSettings) {
    if !settings.is_null() {
        drop(Box::from_raw(settings));
    }
}

/// Applies `f` and rejects the change if the settings become invalid.
unsafe fn update_settings(settings: *mut CvqpSettings, f: impl FnOnce(&mut SolverSettings)) -> CvqpErrorCode {
    let Some(s) = settings.as_mut() else {
        return fail(CvqpErrorCode::NullPointer, "null settings");
    };
    let mut next = s.0.clone();
    f(&mut next);
    match next.validate() {
        Ok(()) => {
            s.0 = next;
            CvqpErrorCode::Ok
        }
        Err(e) => from_cvqp_error(e),
    }
}

/// # Safety
/// `settings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvqp_settings_set_tolerances(settings: *mut CvqpSettings, eps_abs: f64, eps_rel: f64) -> CvqpErrorCode {
    update_settings(settings, |s| {
        s.eps_abs = eps_abs;
        s.eps_rel = eps_rel;
    })
}

/// # Safety
/// `settings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvqp_settings_set_rho0(settings: *mut CvqpSettings, rho0: f64) -> CvqpErrorCode {
    update_settings(settings, |s| s.rho0 = rho0)
}

/// # Safety
/// `settings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvqp_settings_set_alpha(settings: *mut CvqpSettings, alpha: f64) -> CvqpErrorCode {
    update_settings(settings, |s| s.alpha = alpha)
}

/// # Safety
/// `settings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvqp_settings_set_max_iter(settings: *mut CvqpSettings, max_iter: usize) -> CvqpErrorCode {
    update_settings(settings, |s| s.max_iter = max_iter)
}

/// A nonpositive `seconds` removes the limit.
///
/// # Safety
/// `settings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvqp_settings_set_time_limit(settings: *mut CvqpSettings, seconds: f64) -> CvqpErrorCode {
    update_settings(settings, |s| s.time_limit = (seconds > 0.0).then_some(seconds))
}

/// # Safety
/// `settings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvqp_settings_set_adaptive_rho(settings: *mut CvqpSettings, enabled: c_int) -> CvqpErrorCode {
    update_settings(settings, |s| s.adaptive_rho = enabled != 0)
}

/// Solves `problem`. A NULL `settings` means defaults.
///
/// A limit being hit is not an error: check `cvqp_result_status`.
///
/// # Safety
/// `problem` must be a live handle, `settings` NULL or a live handle, and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvqp_solve(
    problem: *const CvqpProblem,
    settings: *const CvqpSettings,
    out: *mut *mut CvqpResult,
) -> CvqpErrorCode {
    guard(|| {
        let Some(problem) = problem.as_ref() else {
            return fail(CvqpErrorCode::NullPointer, "null problem");
        };
        if out.is_null() {
            return fail(CvqpErrorCode::NullPointer, "null output pointer");
        }
        let defaults = SolverSettings::default();
        let settings = settings.as_ref().map_or(&defaults, |s| &s.0);
        match cvqp::solver::solve(&problem.0, settings) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(CvqpResult(r)));
                CvqpErrorCode::Ok
            }
            Err(e) => from_cvqp_error(e),
        }
    })
}

/// # Safety
/// `result` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cvqp_result_free(result: *mut CvqpResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvqp_result_status(result: *const CvqpResult) -> CvqpSolveStatus {
    (*result).0.status.into()
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvqp_result_objective(result: *const CvqpResult) -> f64 {
    (*result).0.objective
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvqp_result_iterations(result: *const CvqpResult) -> usize {
    (*result).0.iterations
}

/// Length of the solution vector.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvqp_result_n(result: *const CvqpResult) -> usize {
    (*result).0.x.len()
}

/// Copies the solution into `x`, which holds `len` doubles.
///
/// # Safety
/// `result` must be a live handle and `x` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cvqp_result_x(result: *const CvqpResult, x: *mut f64, len: usize) -> CvqpErrorCode {
    let Some(r) = result.as_ref() else {
        return fail(CvqpErrorCode::NullPointer, "null result");
    };
    if len != r.0.x.len() {
        return fail(CvqpErrorCode::InvalidArgument, format!("buffer holds {len} values, solution has {}", r.0.x.len()));
    }
    if x.is_null() && len > 0 {
        return fail(CvqpErrorCode::NullPointer, "null buffer");
    }
    if len > 0 {
        ptr::copy_nonoverlapping(r.0.x.as_ptr(), x, len);
    }
    CvqpErrorCode::Ok
}

/// Final primal and dual residual norms and their tolerances.
///
/// # Safety
/// `result` must be a live handle; the output pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn cvqp_result_residuals(
    result: *const CvqpResult,
    r_norm: *mut f64,
    s_norm: *mut f64,
    eps_pri: *mut f64,
    eps_dual: *mut f64,
) -> CvqpErrorCode {
    let Some(r) = result.as_ref() else {
        return fail(CvqpErrorCode::NullPointer, "null result");
    };
    let res = r.0.residuals;
    for (dst, v) in [(r_norm, res.r_norm), (s_norm, res.s_norm), (eps_pri, res.eps_pri), (eps_dual, res.eps_dual)] {
        if !dst.is_null() {
            *dst = v;
        }
    }
    CvqpErrorCode::Ok
}

/// Projects `v` onto `{z : cvar_beta(z) <= kappa}`, writing `m` values to `out`.
///
/// # Safety
/// `v` and `out` must each hold `m` doubles; they may alias.
#[no_mangle]
pub unsafe extern "C" fn cvqp_project_cvar(v: *const f64, m: usize, beta: f64, kappa: f64, out: *mut f64) -> CvqpErrorCode {
    guard(|| {
        let Some(v) = slice(v, m) else {
            return fail(CvqpErrorCode::NullPointer, "null input");
        };
        if out.is_null() && m > 0 {
            return fail(CvqpErrorCode::NullPointer, "null output");
        }
        match cvqp::projection::project_cvar(v, beta, kappa) {
            Ok(z) => {
                ptr::copy(z.as_ptr(), out, m);
                CvqpErrorCode::Ok
            }
            Err(e) => from_cvqp_error(e),
        }
    })
}

/// Projects `v` onto `{z : sum of the k largest entries <= d}`.
///
/// # Safety
/// `v` and `out` must each hold `m` doubles; they may alias.
#[no_mangle]
pub unsafe extern "C" fn cvqp_project_sum_k_largest(
    v: *const f64,
    m: usize,
    k: usize,
    d: f64,
    out: *mut f64,
) -> CvqpErrorCode {
    guard(|| {
        let Some(v) = slice(v, m) else {
            return fail(CvqpErrorCode::NullPointer, "null input");
        };
        if out.is_null() && m > 0 {
            return fail(CvqpErrorCode::NullPointer, "null output");
        }
        let spec = CvarSpec::new(k, d);
        if let Err(e) = spec.check(m) {
            return from_cvqp_error(e);
        }
        match cvqp::projection::project_sum_k_largest(v, &spec) {
            Ok(z) => {
                ptr::copy(z.as_ptr(), out, m);
                CvqpErrorCode::Ok
            }
            Err(e) => from_cvqp_error(e),
        }
    })
}
