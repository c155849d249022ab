//! C ABI over the `homographic` library.
//!
//! Every fallible function returns an [`HgStatus`] and writes results through
//! out-pointers. Objects cross the boundary as opaque handles that the caller
//! releases with the matching `*_free` function. The message of the most
//! recent failure on the calling thread is available from
//! [`hg_last_error_message`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use homographic::analysis::{find_central_configs, gradient_norm, ConfigType};
use homographic::asymptotics::{verify_newton, verify_strong, EngineConfig, ExpansionReport};
use homographic::dynamics::{integrate, Initial, IntegratorConfig, Method, Termination, Trajectory};
use homographic::geometry::ShapePoint;
use homographic::model::{config_measure_eta, Alpha, Masses, ReducedState};
use homographic::Error;
use num_complex::Complex64;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Collision = 3,
    CriticalPoint = 4,
    PrecisionExhausted = 5,
    NotConverged = 6,
    BufferTooSmall = 7,
    Failure = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> HgStatus {
    match e {
        Error::InvalidInput(_) | Error::Unphysical { .. } | Error::InsufficientSamples { .. } => HgStatus::InvalidInput,
        Error::BinaryCollision { .. } | Error::TotalCollision { .. } | Error::StepSizeUnderflow { .. } => HgStatus::Collision,
        Error::CriticalPoint { .. } => HgStatus::CriticalPoint,
        Error::PrecisionExhausted(_) => HgStatus::PrecisionExhausted,
        Error::NewtonDivergence(_) | Error::RootFindingFailure(_) => HgStatus::NotConverged,
        _ => HgStatus::Failure,
    }
}

/// Runs `f`, mapping library errors and panics onto status codes.
fn guard(f: impl FnOnce() -> Result<(), HgFailure>) -> HgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HgStatus::Ok,
        Ok(Err(HgFailure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(HgFailure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Err(_) => {
            set_last_error("panic inside the library");
            HgStatus::Panic
        }
    }
}

enum HgFailure {
    Lib(Error),
    Status(HgStatus, String),
}

impl From<Error> for HgFailure {
    fn from(e: Error) -> Self {
        HgFailure::Lib(e)
    }
}

fn null(name: &str) -> HgFailure {
    HgFailure::Status(HgStatus::NullPointer, format!("{name} is null"))
}

/// A mass triple together with the potential exponent.
pub struct HgSystem {
    masses: Masses,
    alpha: Alpha,
}

/// Samples of an integrated trajectory.
pub struct HgTrajectory {
    inner: Trajectory,
}

/// Result of a series verification run.
pub struct HgReport {
    inner: ExpansionReport,
    json: CString,
}

/// Reduced state `(r, phi, eta, rdot, phidot, etadot)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HgReducedState {
    pub r: f64,
    pub phi: f64,
    pub eta_x: f64,
    pub eta_y: f64,
    pub rdot: f64,
    pub phidot: f64,
    pub etadot_x: f64,
    pub etadot_y: f64,
}

impl From<HgReducedState> for ReducedState {
    fn from(s: HgReducedState) -> Self {
        ReducedState {
            r: s.r,
            phi: s.phi,
            eta: Complex64::new(s.eta_x, s.eta_y),
            rdot: s.rdot,
            phidot: s.phidot,
            etadot: Complex64::new(s.etadot_x, s.etadot_y),
        }
    }
}

impl From<&ReducedState> for HgReducedState {
    fn from(s: &ReducedState) -> Self {
        HgReducedState {
            r: s.r,
            phi: s.phi,
            eta_x: s.eta.re,
            eta_y: s.eta.im,
            rdot: s.rdot,
            phidot: s.phidot,
            etadot_x: s.etadot.re,
            etadot_y: s.etadot.im,
        }
    }
}

/// One trajectory sample.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HgSample {
    pub t: f64,
    pub tau: f64,
    pub state: HgReducedState,
    pub inertia: f64,
    pub potential: f64,
    pub energy: f64,
    pub angular_momentum: f64,
    pub mu: f64,
    pub v2: f64,
}

/// How an integration ended.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HgTermination {
    Completed = 0,
    Collision = 1,
    StepSizeUnderflow = 2,
}

/// A central configuration; `kind` is 0 for Lagrange and 1 for Euler.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HgCentralConfig {
    pub eta_x: f64,
    pub eta_y: f64,
    pub kind: i32,
    pub grad_norm: f64,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a system handle.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn hg_system_new(m1: f64, m2: f64, m3: f64, alpha: f64, out: *mut *mut HgSystem) -> HgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sys = HgSystem { masses: Masses::new(m1, m2, m3)?, alpha: Alpha::new(alpha)? };
        *out = Box::into_raw(Box::new(sys));
        Ok(())
    })
}

/// Releases a system handle. NULL is ignored.
///
/// # Safety
/// `sys` must be NULL or a handle from [`hg_system_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hg_system_free(sys: *mut HgSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Configurational measure `mu` at the shape `eta = x + iy`.
///
/// # Safety
/// `sys` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hg_config_measure(sys: *const HgSystem, eta_x: f64, eta_y: f64, out: *mut f64) -> HgStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("sys"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = config_measure_eta(&sys.masses, sys.alpha, Complex64::new(eta_x, eta_y))?;
        Ok(())
    })
}

/// Norm of the shape-sphere gradient of `mu` at `eta = x + iy`.
///
/// # Safety
/// `sys` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hg_gradient_norm(sys: *const HgSystem, eta_x: f64, eta_y: f64, out: *mut f64) -> HgStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("sys"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = gradient_norm(&sys.masses, sys.alpha, ShapePoint::new(eta_x, eta_y))?;
        Ok(())
    })
}

/// Writes up to `capacity` central configurations into `buf` and their total
/// count into `count`. Returns `BufferTooSmall` (with `count` set) when the
/// buffer cannot hold them all; `buf` may be NULL when `capacity` is 0.
///
/// # Safety
/// `sys` must be a live handle, `count` a valid pointer and `buf` valid for
/// `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn hg_central_configs(
    sys: *const HgSystem,
    buf: *mut HgCentralConfig,
    capacity: usize,
    count: *mut usize,
) -> HgStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("sys"))?;
        if count.is_null() {
            return Err(null("count"));
        }
        let set = find_central_configs(&sys.masses, sys.alpha)?;
        *count = set.configs.len();
        if set.configs.len() > capacity {
            return Err(HgFailure::Status(HgStatus::BufferTooSmall, format!("need room for {} entries", set.configs.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        for (k, c) in set.configs.iter().enumerate() {
            let kind = match c.kind {
                ConfigType::Lagrange => 0,
                ConfigType::Euler => 1,
            };
            *buf.add(k) = HgCentralConfig { eta_x: c.eta[0], eta_y: c.eta[1], kind, grad_norm: c.grad_norm };
        }
        Ok(())
    })
}

/// Integrates from a reduced state, sampling `samples` equally spaced times
/// on `[t0, t1]` with DOP853 at relative and absolute tolerance `tol`.
/// A collision is not an error: the handle keeps the samples reached and
/// reports it through [`hg_trajectory_termination`].
///
/// # Safety
/// `sys` must be a live handle, `initial` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hg_simulate(
    sys: *const HgSystem,
    initial: *const HgReducedState,
    t0: f64,
    t1: f64,
    samples: usize,
    tol: f64,
    out: *mut *mut HgTrajectory,
) -> HgStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("sys"))?;
        let initial = initial.as_ref().ok_or_else(|| null("initial"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if samples < 2 || !(t1 > t0) {
            return Err(Error::InvalidInput("need at least 2 samples on an increasing interval".into()).into());
        }
        let times: Vec<f64> = (0..samples).map(|k| t0 + (t1 - t0) * k as f64 / (samples - 1) as f64).collect();
        let cfg = IntegratorConfig { rel_tol: tol, abs_tol: tol, method: Method::Dop853, ..Default::default() };
        cfg.validate()?;
        let inner = integrate(&sys.masses, sys.alpha, Initial::Reduced((*initial).into()), &times, &cfg)?;
        *out = Box::into_raw(Box::new(HgTrajectory { inner }));
        Ok(())
    })
}

/// Number of samples held by a trajectory; 0 for NULL.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hg_trajectory_len(traj: *const HgTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.samples.len())
}

/// Copies sample `index` into `out`.
///
/// # Safety
/// `traj` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hg_trajectory_sample(traj: *const HgTrajectory, index: usize, out: *mut HgSample) -> HgStatus {
    guard(|| {
        let traj = traj.as_ref().ok_or_else(|| null("traj"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = traj.inner.samples.get(index).ok_or_else(|| {
            HgFailure::Status(HgStatus::InvalidInput, format!("index {index} out of range {}", traj.inner.samples.len()))
        })?;
        *out = HgSample {
            t: s.t,
            tau: s.tau,
            state: (&s.state).into(),
            inertia: s.inertia,
            potential: s.potential,
            energy: s.energy,
            angular_momentum: s.angular_momentum,
            mu: s.mu,
            v2: s.v2,
        };
        Ok(())
    })
}

/// How the integration ended; `t_end` receives the stopping time when not NULL.
///
/// # Safety
/// `traj` must be a live handle; `t_end` NULL or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hg_trajectory_termination(traj: *const HgTrajectory, t_end: *mut f64) -> HgTermination {
    let Some(traj) = traj.as_ref() else {
        return HgTermination::Completed;
    };
    let (kind, t) = match traj.inner.termination {
        Termination::Completed => (HgTermination::Completed, traj.inner.samples.last().map_or(f64::NAN, |s| s.t)),
        Termination::Collision { t, .. } => (HgTermination::Collision, t),
        Termination::StepSizeUnderflow { t } => (HgTermination::StepSizeUnderflow, t),
    };
    if !t_end.is_null() {
        *t_end = t;
    }
    kind
}

/// Releases a trajectory handle. NULL is ignored.
///
/// # Safety
/// `traj` must be NULL or a handle from [`hg_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hg_trajectory_free(traj: *mut HgTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Checks the leading series coefficients on every branch for the system's
/// exponent (1 or 2) at level `mu_tilde`, with `digits` working digits.
///
/// # Safety
/// `sys` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hg_verify(
    sys: *const HgSystem,
    mu_tilde: f64,
    c: f64,
    v: f64,
    digits: u32,
    out: *mut *mut HgReport,
) -> HgStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("sys"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = EngineConfig { digits, ..Default::default() };
        let inner = match sys.alpha.value() {
            1.0 => verify_newton(&sys.masses, mu_tilde, c, v, &cfg)?,
            2.0 => verify_strong(&sys.masses, mu_tilde, c, v, &cfg)?,
            a => return Err(Error::InvalidInput(format!("series checks exist for alpha = 1 and 2, not {a}")).into()),
        };
        let json = serde_json::to_string(&inner).map_err(|e| HgFailure::Status(HgStatus::Failure, e.to_string()))?;
        let json = CString::new(json).map_err(|e| HgFailure::Status(HgStatus::Failure, e.to_string()))?;
        *out = Box::into_raw(Box::new(HgReport { inner, json }));
        Ok(())
    })
}

/// 1 when every gating comparison of the report passed, else 0.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hg_report_passed(report: *const HgReport) -> i32 {
    report.as_ref().map_or(0, |r| i32::from(r.inner.passed))
}

/// The report as JSON, owned by the handle.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hg_report_json(report: *const HgReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// Releases a report handle. NULL is ignored.
///
/// # Safety
/// `report` must be NULL or a handle from [`hg_verify`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hg_report_free(report: *mut HgReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_status_codes() {
        assert_eq!(status_of(&Error::InvalidInput("x".into())), HgStatus::InvalidInput);
        assert_eq!(status_of(&Error::StepSizeUnderflow { t: 1.0 }), HgStatus::Collision);
        assert_eq!(status_of(&Error::CriticalPoint { grad_norm: 0.0 }), HgStatus::CriticalPoint);
        assert_eq!(status_of(&Error::PrecisionExhausted("x".into())), HgStatus::PrecisionExhausted);
    }

    #[test]
    fn panics_become_a_status() {
        let hook = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let status = guard(|| panic!("boom"));
        std::panic::set_hook(hook);
        assert_eq!(status, HgStatus::Panic);
        assert!(!hg_last_error_message().is_null());
    }

    #[test]
    fn null_handles_are_reported() {
        let mut out = 0.0;
        assert_eq!(unsafe { hg_config_measure(ptr::null(), 0.0, 1.0, &mut out) }, HgStatus::NullPointer);
        assert_eq!(unsafe { hg_trajectory_len(ptr::null()) }, 0);
        assert!(unsafe { hg_report_json(ptr::null()) }.is_null());
    }
}
