//! C ABI for gevrey-kit.
//!
//! Every function returns a [`GkStatus`]. On failure the message is kept per
//! thread and can be fetched with [`gk_last_error_message`]. Strings are
//! copied into caller buffers: `*len` always receives the byte length
//! without the terminating NUL, and `GK_STATUS_BUFFER_TOO_SMALL` is returned
//! when `cap < *len + 1`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use gevrey_kit::cli::{run_verify, solve_problem, ProblemConfig, SolveReport, VerifyConfig};
use gevrey_kit::combinatorics::schroeder_hipparchus;
use gevrey_kit::envelopes::{
    compose_envelopes, convergence_radius, implicit_envelope, GevreyEnvelope, StabilityConstant,
};
use gevrey_kit::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GkStatus {
    Ok = 0,
    InvalidArgument = 1,
    Numerical = 2,
    BoundViolation = 3,
    NullPointer = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// `(|α|!)^s · scale · rate^{|α|}`
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GkEnvelope {
    pub s: f64,
    pub scale: f64,
    pub rate: f64,
}

/// A configured 1D problem and, after [`gk_problem_solve`], its solution.
pub struct GkProblem {
    config: ProblemConfig,
    solved: Option<(Vec<f64>, Vec<f64>, SolveReport)>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(GkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_numerical() { GkStatus::Numerical } else { GkStatus::InvalidArgument };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(GkStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<GkStatus, Failure>) -> GkStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "unknown panic".into());
        Err(Failure(GkStatus::Panic, msg))
    });
    match outcome {
        Ok(status) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            status
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(GkStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn write_str(text: &str, buf: *mut c_char, cap: usize, len: *mut usize) -> Result<(), Failure> {
    if len.is_null() {
        return Err(null("len"));
    }
    *len = text.len();
    if buf.is_null() || cap < text.len() + 1 {
        return Err(Failure(
            GkStatus::BufferTooSmall,
            format!("need {} bytes, buffer holds {cap}", text.len() + 1),
        ));
    }
    std::ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
    *buf.add(text.len()) = 0;
    Ok(())
}

unsafe fn write_slice(src: &[f64], dst: *mut f64, cap: usize) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(null("output array"));
    }
    if cap < src.len() {
        return Err(Failure(GkStatus::BufferTooSmall, format!("need {} values, buffer holds {cap}", src.len())));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

fn to_envelope(e: &GkEnvelope) -> Result<GevreyEnvelope, Failure> {
    Ok(GevreyEnvelope::new(e.s, e.scale, e.rate)?)
}

fn from_envelope(e: &GevreyEnvelope) -> GkEnvelope {
    GkEnvelope { s: e.s, scale: e.scale, rate: e.rate }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the message of the last failed call on this thread. An empty
/// string means the last call succeeded.
///
/// # Safety
/// `buf` must hold `cap` bytes; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_last_error_message(buf: *mut c_char, cap: usize, len: *mut usize) -> GkStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    match write_str(&msg, buf, cap, len) {
        Ok(()) => GkStatus::Ok,
        Err(Failure(s, _)) => s,
    }
}

/// `κ_n` in decimal.
///
/// # Safety
/// `buf` must hold `cap` bytes; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_kappa(n: usize, buf: *mut c_char, cap: usize, len: *mut usize) -> GkStatus {
    guard(|| {
        let k = schroeder_hipparchus(n)?;
        write_str(&k.to_string(), buf, cap, len)?;
        Ok(GkStatus::Ok)
    })
}

/// Solution-map envelope from the stability constant `alpha ≥ 1` and a
/// residual envelope with `scale, rate ≥ 1`.
///
/// # Safety
/// `residual` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gk_implicit_envelope(
    alpha: f64,
    residual: *const GkEnvelope,
    out: *mut GkEnvelope,
) -> GkStatus {
    guard(|| {
        let r = residual.as_ref().ok_or_else(|| null("residual"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let env = implicit_envelope(StabilityConstant::new(alpha)?, &to_envelope(r)?)?;
        *out = from_envelope(&env);
        Ok(GkStatus::Ok)
    })
}

/// Guaranteed radius of convergence `1/rate` of an analytic (`s = 1`) envelope.
///
/// # Safety
/// `env` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gk_convergence_radius(env: *const GkEnvelope, out: *mut f64) -> GkStatus {
    guard(|| {
        let e = env.as_ref().ok_or_else(|| null("env"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = convergence_radius(&to_envelope(e)?)?;
        Ok(GkStatus::Ok)
    })
}

/// Envelope of `outer ∘ inner`.
///
/// # Safety
/// `inner` and `outer` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gk_compose_envelopes(
    inner: *const GkEnvelope,
    outer: *const GkEnvelope,
    out: *mut GkEnvelope,
) -> GkStatus {
    guard(|| {
        let i = inner.as_ref().ok_or_else(|| null("inner"))?;
        let o = outer.as_ref().ok_or_else(|| null("outer"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = from_envelope(&compose_envelopes(&to_envelope(i)?, &to_envelope(o)?));
        Ok(GkStatus::Ok)
    })
}

/// Parses a problem config (same JSON schema as the `solve` subcommand) and
/// validates it. Release the handle with [`gk_problem_free`].
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_problem_new_from_json(json: *const c_char, out: *mut *mut GkProblem) -> GkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let text = read_str(json, "json")?;
        let config: ProblemConfig =
            serde_json::from_str(text).map_err(|e| Failure(GkStatus::InvalidArgument, e.to_string()))?;
        config.build()?;
        *out = Box::into_raw(Box::new(GkProblem { config, solved: None }));
        Ok(GkStatus::Ok)
    })
}

/// Number of mesh nodes, the length of the arrays filled by [`gk_problem_solve`].
///
/// # Safety
/// `problem` must come from [`gk_problem_new_from_json`]; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gk_problem_num_nodes(problem: *const GkProblem, out: *mut usize) -> GkStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = p.config.mesh_n + 1;
        Ok(GkStatus::Ok)
    })
}

/// Solves and copies node positions and nodal values into `x` and `u`, each
/// holding `cap` doubles. Returns `GK_STATUS_BOUND_VIOLATION` when the
/// solution was computed but one of the a priori or stability checks failed.
///
/// # Safety
/// `problem` must come from [`gk_problem_new_from_json`]; `x` and `u` must
/// hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn gk_problem_solve(problem: *mut GkProblem, x: *mut f64, u: *mut f64, cap: usize) -> GkStatus {
    guard(|| {
        let p = problem.as_mut().ok_or_else(|| null("problem"))?;
        if p.solved.is_none() {
            p.solved = Some(solve_problem(&p.config)?);
        }
        let (xs, us, report) = p.solved.as_ref().expect("just solved");
        write_slice(xs, x, cap)?;
        write_slice(us, u, cap)?;
        let b = &report.bound_checks;
        if b.a_priori.holds && b.stability.holds {
            Ok(GkStatus::Ok)
        } else {
            Err(Failure(GkStatus::BoundViolation, "a bound check failed; see the solve report".into()))
        }
    })
}

/// JSON report of the last [`gk_problem_solve`].
///
/// # Safety
/// `problem` must come from [`gk_problem_new_from_json`]; `buf` must hold
/// `cap` bytes and `len` be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_problem_report_json(
    problem: *const GkProblem,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> GkStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let (_, _, report) = p
            .solved
            .as_ref()
            .ok_or_else(|| Failure(GkStatus::InvalidArgument, "problem has not been solved".into()))?;
        let json = serde_json::to_string(report).map_err(|e| Failure(GkStatus::InvalidArgument, e.to_string()))?;
        write_str(&json, buf, cap, len)?;
        Ok(GkStatus::Ok)
    })
}

/// # Safety
/// `problem` must come from [`gk_problem_new_from_json`] and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gk_problem_free(problem: *mut GkProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Runs the parametric bound check (same JSON schema as `verify-bounds`) and
/// copies its CSV. `*passed` is set to 1 or 0; a failed check also returns
/// `GK_STATUS_BOUND_VIOLATION` after the CSV has been written.
///
/// # Safety
/// `config_json` must be NUL-terminated; `buf` must hold `cap` bytes; `len`
/// and `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_verify_bounds_json(
    config_json: *const c_char,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
    passed: *mut c_int,
) -> GkStatus {
    guard(|| {
        let passed = passed.as_mut().ok_or_else(|| null("passed"))?;
        let text = read_str(config_json, "config_json")?;
        let cfg: VerifyConfig =
            serde_json::from_str(text).map_err(|e| Failure(GkStatus::InvalidArgument, e.to_string()))?;
        let outcome = run_verify(&cfg)?;
        *passed = c_int::from(outcome.passed);
        write_str(&outcome.csv, buf, cap, len)?;
        if outcome.passed {
            Ok(GkStatus::Ok)
        } else {
            Err(Failure(
                GkStatus::BoundViolation,
                format!("max ratio {:e} exceeds 1", outcome.max_ratio),
            ))
        }
    })
}
