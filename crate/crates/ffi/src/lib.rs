//! C ABI over the pinnscape objectives, optimizers and experiment runner.
//!
//! Every fallible function returns a [`PsStatus`]. On failure the message is
//! kept per thread and can be read with [`ps_last_error_message`]. Handles
//! are opaque; each `*_new` has a matching `*_free` that accepts null.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use pinnscape::autodiff::{hessian_vector_product, Differentiable};
use pinnscape::config::ExperimentConfig;
use pinnscape::error::Error;
use pinnscape::experiments::{run_experiment, Subcommand};
use pinnscape::network::{init_params, NetworkSpec};
use pinnscape::optimize::{train, OptimizerConfig, TrajectoryRecord};
use pinnscape::problems::{Objective, ObjectiveKind};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NonFinite = 4,
    ProbeFailed = 5,
    Io = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsObjectiveKind {
    Drm1d = 0,
    Pinn1d = 1,
    Drm2d = 2,
    Pinn2d = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsOptimizerKind {
    Adam = 0,
    Gd = 1,
}

/// Full-batch optimizer settings; ADAM moments use the usual defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PsOptimizer {
    pub kind: PsOptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

/// Opaque objective handle.
pub struct PsObjective(Objective);

/// Opaque training result.
pub struct PsTrajectory(TrajectoryRecord);

/// Opaque experiment configuration.
pub struct PsConfig(ExperimentConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PsStatus {
    match e {
        Error::Config(_) | Error::Schema { .. } | Error::Json(_) => PsStatus::Config,
        e if e.is_non_finite() => PsStatus::NonFinite,
        Error::Probe(_) | Error::NoNullDirection => PsStatus::ProbeFailed,
        Error::Io { .. } => PsStatus::Io,
        Error::Dimension { .. } | Error::Contract(_) => PsStatus::InvalidArgument,
        _ => PsStatus::Internal,
    }
}

struct Fail(PsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PsStatus::Internal
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(PsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn check_len(len: usize, expected: usize, what: &str) -> Result<(), Fail> {
    if len == expected {
        Ok(())
    } else {
        Err(Fail(PsStatus::InvalidArgument, format!("{what} has length {len}, expected {expected}")))
    }
}

fn emplace<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Objective with the default quadrature and a two-hidden-layer tanh
/// network of the given width.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ps_objective_new(kind: PsObjectiveKind, width: usize, out: *mut *mut PsObjective) -> PsStatus {
    guard(|| {
        if width == 0 {
            return Err(Fail(PsStatus::InvalidArgument, "width must be positive".into()));
        }
        let (kind, spec) = match kind {
            PsObjectiveKind::Drm1d => (ObjectiveKind::Drm1d, NetworkSpec::elliptic_1d(width)),
            PsObjectiveKind::Pinn1d => (ObjectiveKind::Pinn1d, NetworkSpec::elliptic_1d(width)),
            PsObjectiveKind::Drm2d => (ObjectiveKind::Drm2d, NetworkSpec::neohookean_2d(width)),
            PsObjectiveKind::Pinn2d => (ObjectiveKind::Pinn2d, NetworkSpec::neohookean_2d(width)),
        };
        emplace(out, PsObjective(Objective::new(kind, spec)?))
    })
}

/// Objective described by a configuration.
///
/// # Safety
/// `config` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ps_objective_from_config(config: *const PsConfig, out: *mut *mut PsObjective) -> PsStatus {
    guard(|| {
        let c = handle(config, "config")?;
        emplace(out, PsObjective(c.0.objective()?))
    })
}

/// # Safety
/// `objective` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ps_objective_free(objective: *mut PsObjective) {
    if !objective.is_null() {
        drop(Box::from_raw(objective));
    }
}

/// Number of network parameters, 0 for a null handle.
///
/// # Safety
/// `objective` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_objective_param_count(objective: *const PsObjective) -> usize {
    objective.as_ref().map_or(0, |o| o.0.param_count())
}

/// Default initialization scaled by `scale`, written to `params[0..len]`.
///
/// # Safety
/// `params` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ps_objective_init_params(objective: *const PsObjective, seed: u64, scale: f64, params: *mut f64, len: usize) -> PsStatus {
    guard(|| {
        let o = handle(objective, "objective")?;
        check_len(len, o.0.param_count(), "params")?;
        output(params, len, "params")?.copy_from_slice(&init_params(&o.0.spec, seed, scale));
        Ok(())
    })
}

/// # Safety
/// `params` must be valid for `len` reads and `loss` for one write.
#[no_mangle]
pub unsafe extern "C" fn ps_objective_evaluate(objective: *const PsObjective, params: *const f64, len: usize, loss: *mut f64) -> PsStatus {
    guard(|| {
        let o = handle(objective, "objective")?;
        check_len(len, o.0.param_count(), "params")?;
        let value = o.0.evaluate(input(params, len, "params")?)?;
        *loss.as_mut().ok_or_else(|| null("loss"))? = value;
        Ok(())
    })
}

/// Loss and gradient; `grad` receives `len` values.
///
/// # Safety
/// `params` and `grad` must be valid for `len` elements, `loss` for one.
#[no_mangle]
pub unsafe extern "C" fn ps_objective_gradient(objective: *const PsObjective, params: *const f64, len: usize, loss: *mut f64, grad: *mut f64) -> PsStatus {
    guard(|| {
        let o = handle(objective, "objective")?;
        check_len(len, o.0.param_count(), "params")?;
        let (value, g) = o.0.value_and_grad(input(params, len, "params")?)?;
        let loss = loss.as_mut().ok_or_else(|| null("loss"))?;
        output(grad, len, "grad")?.copy_from_slice(&g);
        *loss = value;
        Ok(())
    })
}

/// Hessian-vector product `H(params) · direction` into `out`.
///
/// # Safety
/// All three arrays must be valid for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn ps_objective_hvp(objective: *const PsObjective, params: *const f64, direction: *const f64, len: usize, out: *mut f64) -> PsStatus {
    guard(|| {
        let o = handle(objective, "objective")?;
        check_len(len, o.0.param_count(), "params")?;
        let hv = hessian_vector_product(&o.0, input(params, len, "params")?, input(direction, len, "direction")?)?;
        output(out, len, "out")?.copy_from_slice(&hv);
        Ok(())
    })
}

/// Trains from `init` and returns the trajectory (losses and final
/// parameters; snapshots are not kept).
///
/// # Safety
/// `init` must be valid for `len` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn ps_train(objective: *const PsObjective, init: *const f64, len: usize, optimizer: PsOptimizer, out: *mut *mut PsTrajectory) -> PsStatus {
    guard(|| {
        let o = handle(objective, "objective")?;
        check_len(len, o.0.param_count(), "init")?;
        let base = match optimizer.kind {
            PsOptimizerKind::Adam => OptimizerConfig::adam(optimizer.learning_rate, optimizer.epochs),
            PsOptimizerKind::Gd => OptimizerConfig::gd(optimizer.learning_rate, optimizer.epochs),
        };
        let config = OptimizerConfig { seed: optimizer.seed, keep_snapshots: false, ..base };
        config.validate()?;
        let run = train(&o.0, input(init, len, "init")?, &config)?;
        emplace(out, PsTrajectory(run))
    })
}

/// # Safety
/// `trajectory` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_trajectory_free(trajectory: *mut PsTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// Number of recorded losses (epochs + 1), 0 for a null handle.
///
/// # Safety
/// `trajectory` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_trajectory_loss_count(trajectory: *const PsTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.0.losses.len())
}

/// # Safety
/// `losses` must be valid for `len` writes; `len` must equal
/// [`ps_trajectory_loss_count`].
#[no_mangle]
pub unsafe extern "C" fn ps_trajectory_losses(trajectory: *const PsTrajectory, losses: *mut f64, len: usize) -> PsStatus {
    guard(|| {
        let t = handle(trajectory, "trajectory")?;
        check_len(len, t.0.losses.len(), "losses")?;
        output(losses, len, "losses")?.copy_from_slice(&t.0.losses);
        Ok(())
    })
}

/// # Safety
/// `params` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ps_trajectory_final_params(trajectory: *const PsTrajectory, params: *mut f64, len: usize) -> PsStatus {
    guard(|| {
        let t = handle(trajectory, "trajectory")?;
        check_len(len, t.0.final_params.len(), "params")?;
        output(params, len, "params")?.copy_from_slice(&t.0.final_params);
        Ok(())
    })
}

/// Parses and validates a JSON experiment configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ps_config_from_json(json: *const c_char, out: *mut *mut PsConfig) -> PsStatus {
    guard(|| {
        let text = string(json, "json")?;
        emplace(out, PsConfig(ExperimentConfig::from_json(text)?))
    })
}

/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_config_free(config: *mut PsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_config_set_seed(config: *mut PsConfig, seed: u64) -> PsStatus {
    guard(|| {
        config.as_mut().ok_or_else(|| null("config"))?.0.seed = seed;
        Ok(())
    })
}

/// Runs an experiment subcommand (e.g. "train", "hessian-walk") under
/// `out_root` and writes the run directory path, NUL-terminated, to
/// `dir_buf`. When the buffer is too short nothing is written to it and
/// `BufferTooSmall` is returned; `dir_len` (if not null) always receives the
/// length the path needs, terminator included. A probe failure still
/// produces a run directory and reports `ProbeFailed`.
///
/// # Safety
/// Strings must be NUL-terminated; `dir_buf` must be valid for `buf_len`
/// writes, or null with `buf_len` 0.
#[no_mangle]
pub unsafe extern "C" fn ps_run_experiment(config: *const PsConfig, subcommand: *const c_char, out_root: *const c_char, dir_buf: *mut c_char, buf_len: usize, dir_len: *mut usize) -> PsStatus {
    guard(|| {
        let c = handle(config, "config")?;
        let name = string(subcommand, "subcommand")?;
        let sub = Subcommand::from_name(name).ok_or_else(|| Fail(PsStatus::InvalidArgument, format!("unknown subcommand {name:?}")))?;
        let root = string(out_root, "out_root")?;
        let run = run_experiment(sub, &c.0, Path::new(root))?;
        let path = CString::new(run.dir.to_string_lossy().into_owned()).map_err(|_| Fail(PsStatus::Internal, "run path contains NUL".into()))?;
        let bytes = path.as_bytes_with_nul();
        if let Some(n) = dir_len.as_mut() {
            *n = bytes.len();
        }
        if bytes.len() > buf_len || dir_buf.is_null() {
            return Err(Fail(PsStatus::BufferTooSmall, format!("run path needs {} bytes", bytes.len())));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr().cast(), dir_buf, bytes.len());
        Ok(())
    })
}
