//! C ABI for the anytime MPC controller: opaque handles, status codes,
//! and a JSON-configured constructor, so the controller can be driven
//! from C, C++, Python (ctypes/cffi) or any other language with a C FFI.
//!
//! The header `include/reapt.h` is generated at build time. All
//! functions are safe to call with NULL handles (they report
//! `REAPT_INVALID_ARGUMENT`); per-thread error text is available from
//! `reapt_last_error_message` after any failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::DVector;
use reapt::cli::{load_config, Overrides};
use reapt::sim::{BudgetSpec, ControllerContext, LetController};
use reapt::Error;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReaptStatus {
    ReaptOk = 0,
    /// A NULL pointer or a length that does not match the model.
    ReaptInvalidArgument = 1,
    /// The configuration could not be parsed or is dimensionally wrong.
    ReaptConfigError = 2,
    /// The configuration is well-formed but fails validation
    /// (controllability, observability, target, horizon, region of
    /// attraction).
    ReaptValidationError = 3,
    /// A numerical failure inside the solver.
    ReaptNumericalError = 4,
    /// The controller has not been started yet.
    ReaptNotStarted = 5,
    /// A panic escaped the library; the handle should be discarded.
    ReaptInternalError = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let cstring = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = cstring);
}

fn status_of(err: &Error) -> ReaptStatus {
    match err {
        Error::Config(_) => ReaptStatus::ReaptConfigError,
        Error::NotControllable
        | Error::NotObservable
        | Error::NotSteadyStateAdmissible
        | Error::TargetOnBoundary
        | Error::NotEquilibrium
        | Error::RegionOfAttraction
        | Error::HorizonInsufficient => ReaptStatus::ReaptValidationError,
        Error::OmegaStarCap | Error::BarrierDomain | Error::Numerical(_) => {
            ReaptStatus::ReaptNumericalError
        }
    }
}

fn fail(err: &Error) -> ReaptStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

/// Opaque controller handle.
pub struct ReaptController {
    ctx: ControllerContext,
    state: Option<LetController>,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn reapt_version() -> *const c_char {
    static VERSION: &[u8] = concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes();
    VERSION.as_ptr() as *const c_char
}

/// Message describing the most recent failure on the calling thread.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn reapt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

fn build_controller(json: &str) -> Result<ReaptController, Error> {
    let cfg: reapt::cli::RunConfig = serde_json_from(json)?;
    let prepared = cfg.prepare(&Overrides::default())?;
    Ok(ReaptController {
        ctx: prepared.ctx,
        state: None,
    })
}

fn serde_json_from(json: &str) -> Result<reapt::cli::RunConfig, Error> {
    reapt::cli::parse_config_str(json)
}

/// Create a controller from a JSON configuration string (same schema as
/// the CLI configuration files). Returns NULL on failure; consult
/// `reapt_last_error_message`.
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn reapt_controller_new_from_json(
    config_json: *const c_char,
) -> *mut ReaptController {
    if config_json.is_null() {
        set_last_error("config_json is NULL");
        return std::ptr::null_mut();
    }
    let text = match CStr::from_ptr(config_json).to_str() {
        Ok(t) => t.to_owned(),
        Err(_) => {
            set_last_error("config_json is not valid UTF-8");
            return std::ptr::null_mut();
        }
    };
    match catch_unwind(|| build_controller(&text)) {
        Ok(Ok(controller)) => Box::into_raw(Box::new(controller)),
        Ok(Err(err)) => {
            let _ = fail(&err);
            std::ptr::null_mut()
        }
        Err(_) => {
            set_last_error("internal panic while building the controller");
            std::ptr::null_mut()
        }
    }
}

/// Create a controller from a configuration file path.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn reapt_controller_new_from_file(
    path: *const c_char,
) -> *mut ReaptController {
    if path.is_null() {
        set_last_error("path is NULL");
        return std::ptr::null_mut();
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(p) => p.to_owned(),
        Err(_) => {
            set_last_error("path is not valid UTF-8");
            return std::ptr::null_mut();
        }
    };
    let build = || -> Result<ReaptController, Error> {
        let cfg = load_config(Path::new(&path))?;
        let prepared = cfg.prepare(&Overrides::default())?;
        Ok(ReaptController {
            ctx: prepared.ctx,
            state: None,
        })
    };
    match catch_unwind(build) {
        Ok(Ok(controller)) => Box::into_raw(Box::new(controller)),
        Ok(Err(err)) => {
            let _ = fail(&err);
            std::ptr::null_mut()
        }
        Err(_) => {
            set_last_error("internal panic while building the controller");
            std::ptr::null_mut()
        }
    }
}

/// Destroy a controller created by one of the constructors. NULL is
/// accepted and ignored.
///
/// # Safety
/// `handle` must be a pointer previously returned by a constructor and
/// not freed yet.
#[no_mangle]
pub unsafe extern "C" fn reapt_controller_free(handle: *mut ReaptController) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of plant states the controller expects in a measurement.
///
/// # Safety
/// `handle` must be a live controller pointer or NULL.
#[no_mangle]
pub unsafe extern "C" fn reapt_controller_num_states(handle: *const ReaptController) -> usize {
    handle.as_ref().map_or(0, |h| h.ctx.model.num_states())
}

/// Number of control inputs the controller produces.
///
/// # Safety
/// `handle` must be a live controller pointer or NULL.
#[no_mangle]
pub unsafe extern "C" fn reapt_controller_num_inputs(handle: *const ReaptController) -> usize {
    handle.as_ref().map_or(0, |h| h.ctx.model.num_inputs())
}

/// Number of plant outputs.
///
/// # Safety
/// `handle` must be a live controller pointer or NULL.
#[no_mangle]
pub unsafe extern "C" fn reapt_controller_num_outputs(handle: *const ReaptController) -> usize {
    handle.as_ref().map_or(0, |h| h.ctx.model.num_outputs())
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize, expected: usize) -> Option<&'a [f64]> {
    if ptr.is_null() || len != expected {
        return None;
    }
    Some(std::slice::from_raw_parts(ptr, len))
}

/// Start (or restart) the controller at the given initial state. Fails
/// with a validation error when the state is outside the region of
/// attraction.
///
/// # Safety
/// `x0` must point to `x0_len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn reapt_controller_start(
    handle: *mut ReaptController,
    x0: *const f64,
    x0_len: usize,
) -> ReaptStatus {
    let Some(controller) = handle.as_mut() else {
        set_last_error("handle is NULL");
        return ReaptStatus::ReaptInvalidArgument;
    };
    let n = controller.ctx.model.num_states();
    let Some(x0) = slice_arg(x0, x0_len, n) else {
        set_last_error("x0 is NULL or has the wrong length");
        return ReaptStatus::ReaptInvalidArgument;
    };
    let x0 = DVector::from_row_slice(x0);
    match catch_unwind(AssertUnwindSafe(|| {
        LetController::start(&controller.ctx, &x0)
    })) {
        Ok(Ok(state)) => {
            controller.state = Some(state);
            ReaptStatus::ReaptOk
        }
        Ok(Err(err)) => fail(&err),
        Err(_) => {
            set_last_error("internal panic in start");
            ReaptStatus::ReaptInternalError
        }
    }
}

/// Feed the measurement for the current sampling instant and receive the
/// input to apply now. The solver then runs for `budget_iterations`
/// flow steps to prepare the input of the next instant.
///
/// # Safety
/// `x` must point to `x_len` readable doubles and `u_out` to `u_len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn reapt_controller_step(
    handle: *mut ReaptController,
    x: *const f64,
    x_len: usize,
    budget_iterations: u64,
    u_out: *mut f64,
    u_len: usize,
) -> ReaptStatus {
    step_impl(
        handle,
        x,
        x_len,
        BudgetSpec::Iterations(budget_iterations as usize),
        u_out,
        u_len,
    )
}

/// Like `reapt_controller_step` with a wall-clock budget in
/// milliseconds instead of an iteration count.
///
/// # Safety
/// `x` must point to `x_len` readable doubles and `u_out` to `u_len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn reapt_controller_step_deadline(
    handle: *mut ReaptController,
    x: *const f64,
    x_len: usize,
    deadline_ms: f64,
    u_out: *mut f64,
    u_len: usize,
) -> ReaptStatus {
    step_impl(
        handle,
        x,
        x_len,
        BudgetSpec::DeadlineMs(deadline_ms),
        u_out,
        u_len,
    )
}

unsafe fn step_impl(
    handle: *mut ReaptController,
    x: *const f64,
    x_len: usize,
    budget: BudgetSpec,
    u_out: *mut f64,
    u_len: usize,
) -> ReaptStatus {
    let Some(controller) = handle.as_mut() else {
        set_last_error("handle is NULL");
        return ReaptStatus::ReaptInvalidArgument;
    };
    let n = controller.ctx.model.num_states();
    let p = controller.ctx.model.num_inputs();
    let Some(x) = slice_arg(x, x_len, n) else {
        set_last_error("x is NULL or has the wrong length");
        return ReaptStatus::ReaptInvalidArgument;
    };
    if u_out.is_null() || u_len != p {
        set_last_error("u_out is NULL or has the wrong length");
        return ReaptStatus::ReaptInvalidArgument;
    }
    let Some(state) = controller.state.as_mut() else {
        set_last_error("controller not started; call reapt_controller_start first");
        return ReaptStatus::ReaptNotStarted;
    };
    let x = DVector::from_row_slice(x);
    let ctx = &controller.ctx;
    match catch_unwind(AssertUnwindSafe(|| state.step(ctx, &x, budget))) {
        Ok(Ok(telemetry)) => {
            std::ptr::copy_nonoverlapping(telemetry.applied_u.as_ptr(), u_out, p);
            ReaptStatus::ReaptOk
        }
        Ok(Err(err)) => fail(&err),
        Err(_) => {
            set_last_error("internal panic in step");
            ReaptStatus::ReaptInternalError
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_nul_terminated() {
        let v = reapt_version();
        assert!(!v.is_null());
        let s = unsafe { CStr::from_ptr(v) }.to_str().unwrap();
        assert!(!s.is_empty());
    }
}
