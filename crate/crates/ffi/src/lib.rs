//! C ABI over the nlwr solver.
//!
//! Every entry point returns an [`NlwrStatus`]. On failure a message is
//! stored per thread and can be read with [`nlwr_last_error`]. Panics are
//! caught at the boundary and reported as [`NlwrStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nlwr::diagnostics::total_variation_of;
use nlwr::solver::Simulation;
use nlwr::{build_weights, Error, FluxFunction, FluxKind, Kernel, KernelProfile, RunConfig, WeightRule};

/// Result codes. `Io`, `Config` and `Numerical` share their values with the
/// exit codes of the `nlwr` binary.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlwrStatus {
    Ok = 0,
    Io = 1,
    Config = 2,
    Numerical = 3,
    Domain = 4,
    NullPointer = 5,
    InvalidUtf8 = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque time-stepping session created by [`nlwr_simulation_new`].
pub struct NlwrSimulation {
    inner: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> NlwrStatus {
    match err {
        Error::Io { .. } => NlwrStatus::Io,
        Error::Config(_) | Error::Json(_) => NlwrStatus::Config,
        Error::Numerical { .. } | Error::Reference(_) => NlwrStatus::Numerical,
        Error::Domain(_) => NlwrStatus::Domain,
    }
}

struct Fail(NlwrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(NlwrStatus::NullPointer, format!("{what} is null"))
}

/// Run `body` with panics and errors turned into a status code.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> NlwrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => NlwrStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            NlwrStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(NlwrStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Copy `src` into `buf`; `*len` always receives `src.len()`.
unsafe fn copy_out(src: &[f64], buf: *mut f64, capacity: usize, len: *mut usize) -> Result<(), Fail> {
    write_out(len, src.len(), "len")?;
    if capacity < src.len() {
        return Err(Fail(
            NlwrStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, {} needed", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

unsafe fn sim_ref<'a>(sim: *const NlwrSimulation) -> Result<&'a NlwrSimulation, Fail> {
    sim.as_ref().ok_or_else(|| null("sim"))
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nlwr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn nlwr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create a session from a run config in JSON form. The session starts at
/// level 0 with the discretized initial data.
///
/// # Safety
/// `config_json` must be a nul-terminated string and `out` a valid pointer.
/// The handle written to `*out` must be released with
/// [`nlwr_simulation_free`].
#[no_mangle]
pub unsafe extern "C" fn nlwr_simulation_new(
    config_json: *const c_char,
    out: *mut *mut NlwrSimulation,
) -> NlwrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let text = read_str(config_json, "config_json")?;
        let config = RunConfig::from_json(text)?;
        let inner = Simulation::from_config(&config)?;
        out.write(Box::into_raw(Box::new(NlwrSimulation { inner })));
        Ok(())
    })
}

/// Release a session. Null is accepted and ignored.
///
/// # Safety
/// `sim` must be null or a handle from [`nlwr_simulation_new`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn nlwr_simulation_free(sim: *mut NlwrSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advance `steps` levels. On a numerical failure the session keeps the
/// last finite level.
///
/// # Safety
/// `sim` must be a live handle not used concurrently from another thread.
#[no_mangle]
pub unsafe extern "C" fn nlwr_simulation_step(sim: *mut NlwrSimulation, steps: u64) -> NlwrStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("sim"))?;
        for _ in 0..steps {
            sim.inner.step()?;
        }
        Ok(())
    })
}

/// Current time level `n`.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlwr_simulation_level(sim: *const NlwrSimulation, out: *mut u64) -> NlwrStatus {
    guard(|| write_out(out, sim_ref(sim)?.inner.field().n, "out"))
}

/// Current time `n * tau`.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlwr_simulation_time(sim: *const NlwrSimulation, out: *mut f64) -> NlwrStatus {
    guard(|| write_out(out, sim_ref(sim)?.inner.field().time(), "out"))
}

/// Mesh width and time step.
///
/// # Safety
/// `sim` must be a live handle; `h` and `tau` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nlwr_simulation_steps(
    sim: *const NlwrSimulation,
    h: *mut f64,
    tau: *mut f64,
) -> NlwrStatus {
    guard(|| {
        let grid = sim_ref(sim)?.inner.field().grid;
        write_out(h, grid.h, "h")?;
        write_out(tau, grid.tau(), "tau")
    })
}

/// Number of cells on the padded grid.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlwr_simulation_len(sim: *const NlwrSimulation, out: *mut usize) -> NlwrStatus {
    guard(|| write_out(out, sim_ref(sim)?.inner.field().values.len(), "out"))
}

/// Copy the cell averages of the current level into `buf`. `*len` receives
/// the cell count even when `capacity` is too small.
///
/// # Safety
/// `sim` must be a live handle, `len` a valid pointer and `buf` valid for
/// `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn nlwr_simulation_values(
    sim: *const NlwrSimulation,
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> NlwrStatus {
    guard(|| copy_out(&sim_ref(sim)?.inner.field().values, buf, capacity, len))
}

/// Copy the cell centres matching [`nlwr_simulation_values`] into `buf`.
///
/// # Safety
/// Same contract as [`nlwr_simulation_values`].
#[no_mangle]
pub unsafe extern "C" fn nlwr_simulation_cell_centers(
    sim: *const NlwrSimulation,
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> NlwrStatus {
    guard(|| {
        let grid = sim_ref(sim)?.inner.field().grid;
        let x: Vec<f64> = (grid.j_min..=grid.j_max).map(|j| grid.x(j)).collect();
        copy_out(&x, buf, capacity, len)
    })
}

/// Quadrature weights `w_0..w_{m-1}` for a kernel profile (`linear`,
/// `exponential`, `constant`) and rule (`left`, `normalized-left`,
/// `exact`). `*len` receives `m` even when `capacity` is too small.
///
/// # Safety
/// `kernel` and `rule` must be nul-terminated strings, `len` a valid
/// pointer and `buf` valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn nlwr_weights(
    kernel: *const c_char,
    rule: *const c_char,
    delta: f64,
    h: f64,
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> NlwrStatus {
    guard(|| {
        let profile: KernelProfile = read_str(kernel, "kernel")?.parse()?;
        let rule: WeightRule = read_str(rule, "rule")?.parse()?;
        let w = build_weights(&Kernel::new(profile), delta, h, rule)?;
        copy_out(&w.weights, buf, capacity, len)
    })
}

/// Numerical flux `g(rho_l, rho_r, q_l, q_r)` for `lf`, `godunov` or `mlf`.
/// `alpha` is ignored by `godunov`.
///
/// # Safety
/// `flux` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlwr_flux_eval(
    flux: *const c_char,
    alpha: f64,
    rho_l: f64,
    rho_r: f64,
    q_l: f64,
    q_r: f64,
    out: *mut f64,
) -> NlwrStatus {
    guard(|| {
        let kind: FluxKind = read_str(flux, "flux")?.parse()?;
        let g = FluxFunction::new(kind, alpha).eval(rho_l, rho_r, q_l, q_r);
        write_out(out, g, "out")
    })
}

/// Total variation `sum |v_{j+1} - v_j|` of `len` values.
///
/// # Safety
/// `values` must be valid for `len` reads (may be null when `len` is 0) and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlwr_total_variation(values: *const f64, len: usize, out: *mut f64) -> NlwrStatus {
    guard(|| {
        let slice = if len == 0 {
            &[][..]
        } else if values.is_null() {
            return Err(null("values"));
        } else {
            std::slice::from_raw_parts(values, len)
        };
        write_out(out, total_variation_of(slice), "out")
    })
}
