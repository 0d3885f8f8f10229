//! C ABI over the ventrc core.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free`. Every fallible call returns a [`VentrcStatus`]; on
//! failure a message is available from [`ventrc_last_error_message`] on the
//! same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use ventrc::control::{Controller, ControllerConfig, DEFAULT_INTEGRAL_GAIN};
use ventrc::harness::verify_filterset;
use ventrc::plant::{reference_profile, Plant, ScenarioConfig};
use ventrc::rc_design::{read_filterset, write_filterset, RcFilterSet};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VentrcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Numeric = 5,
    /// robust-stability check failed
    Unstable = 6,
    Identification = 7,
    /// a Rust panic was caught at the boundary
    Panic = 8,
}

/// Repetitive-control filter set (`L_c`, shift, `Q`, period).
pub struct VentrcFilterSet(RcFilterSet);

/// Integral controller with optional repetitive add-on.
pub struct VentrcController(Controller);

/// Hose, leak and one-compartment lung simulator for one scenario.
pub struct VentrcPlant {
    plant: Plant,
    reference: Vec<f64>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VentrcPlantOutput {
    /// airway pressure after the measurement delay (mbar)
    pub measured_p_aw: f64,
    pub p_aw: f64,
    /// blower outlet pressure (mbar)
    pub p_out: f64,
    pub p_lung: f64,
    /// patient flow (L/s)
    pub q_pat: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(VentrcStatus, String);

impl From<ventrc::Error> for Failure {
    fn from(e: ventrc::Error) -> Self {
        use ventrc::Error as E;
        let status = match &e {
            E::Domain(_) | E::Config(_) => VentrcStatus::InvalidArgument,
            E::Singularity { .. } | E::SingularFit(_) | E::Numeric(_) => VentrcStatus::Numeric,
            E::Unstable(_) => VentrcStatus::Unstable,
            E::Identification(_) => VentrcStatus::Identification,
            E::Parse { .. } => VentrcStatus::Parse,
            E::Io { .. } | E::Csv { .. } => VentrcStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> VentrcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => VentrcStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            VentrcStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(VentrcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a Path, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(Path::new)
        .map_err(|_| Failure(VentrcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn handle_mut<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ventrc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ventrc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ventrc_filterset_read(path: *const c_char, out: *mut *mut VentrcFilterSet) -> VentrcStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        emit(out, VentrcFilterSet(read_filterset(path)?))
    })
}

/// # Safety
/// `filterset` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ventrc_filterset_write(filterset: *const VentrcFilterSet, path: *const c_char) -> VentrcStatus {
    guard(|| {
        let fs = handle(filterset, "filterset")?;
        write_filterset(path_arg(path, "path")?, &fs.0)?;
        Ok(())
    })
}

/// Period `N` in samples, or 0 for a null handle.
///
/// # Safety
/// `filterset` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn ventrc_filterset_period(filterset: *const VentrcFilterSet) -> usize {
    filterset.as_ref().map_or(0, |fs| fs.0.period_n)
}

/// Copy of `filterset` with its memory retargeted to `period_n` samples.
///
/// # Safety
/// `filterset` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ventrc_filterset_with_period(
    filterset: *const VentrcFilterSet,
    period_n: usize,
    out: *mut *mut VentrcFilterSet,
) -> VentrcStatus {
    guard(|| {
        let fs = handle(filterset, "filterset")?;
        emit(out, VentrcFilterSet(fs.0.with_period(period_n)?))
    })
}

/// Checks the filter set against the exact loop model of a scenario file.
/// Writes `max |Q(1-TL)|` to `max_gain` (if non-null) and returns
/// `VENTRC_STATUS_UNSTABLE` when it is not below 1.
///
/// # Safety
/// `filterset` must come from this library; `scenario_path` must be
/// NUL-terminated; `max_gain` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ventrc_filterset_verify(
    filterset: *const VentrcFilterSet,
    scenario_path: *const c_char,
    max_gain: *mut f64,
) -> VentrcStatus {
    guard(|| {
        let fs = handle(filterset, "filterset")?;
        let scenario = ScenarioConfig::load(path_arg(scenario_path, "scenario_path")?)?;
        let report = verify_filterset(&scenario, &fs.0)?;
        if let Some(slot) = max_gain.as_mut() {
            *slot = report.overall_max;
        }
        if report.pass {
            Ok(())
        } else {
            Err(Failure(VentrcStatus::Unstable, report.summary()))
        }
    })
}

/// # Safety
/// `filterset` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ventrc_filterset_free(filterset: *mut VentrcFilterSet) {
    if !filterset.is_null() {
        drop(Box::from_raw(filterset));
    }
}

/// Creates a controller. A null `filterset` gives the plain integral
/// controller; `output_limits` is null (unlimited) or points at `{lo, hi}`.
///
/// # Safety
/// Pointers must be null or valid as described; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ventrc_controller_new(
    filterset: *const VentrcFilterSet,
    integral_gain: f64,
    output_limits: *const f64,
    out: *mut *mut VentrcController,
) -> VentrcStatus {
    guard(|| {
        let mut config = match filterset.as_ref() {
            Some(fs) => ControllerConfig::with_rc(fs.0.clone()),
            None => ControllerConfig::pid_only(),
        };
        config.integral_gain = integral_gain;
        if !output_limits.is_null() {
            config.output_limits = Some((*output_limits, *output_limits.add(1)));
        }
        emit(out, VentrcController(Controller::new(&config)?))
    })
}

/// Gain used by the benchmark loop.
#[no_mangle]
pub extern "C" fn ventrc_default_integral_gain() -> f64 {
    DEFAULT_INTEGRAL_GAIN
}

/// Command to apply at the current sample, or NaN for a null handle.
///
/// # Safety
/// `controller` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn ventrc_controller_command(controller: *const VentrcController) -> f64 {
    controller.as_ref().map_or(f64::NAN, |c| c.0.command())
}

/// Feeds one reference/measurement pair and writes the next command.
///
/// # Safety
/// `controller` must come from this library; `command` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ventrc_controller_step(
    controller: *mut VentrcController,
    reference: f64,
    measurement: f64,
    command: *mut f64,
) -> VentrcStatus {
    guard(|| {
        let c = handle_mut(controller, "controller")?;
        let u = c.0.step(reference, measurement);
        if let Some(slot) = command.as_mut() {
            *slot = u;
        }
        Ok(())
    })
}

/// Whether the repetitive part shut itself off after an overflow.
///
/// # Safety
/// `controller` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn ventrc_controller_rc_faulted(controller: *const VentrcController) -> bool {
    controller.as_ref().and_then(|c| c.0.rc()).is_some_and(|rc| rc.faulted())
}

/// # Safety
/// `controller` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn ventrc_controller_reset(controller: *mut VentrcController) -> VentrcStatus {
    guard(|| {
        handle_mut(controller, "controller")?.0.reset();
        Ok(())
    })
}

/// # Safety
/// `controller` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ventrc_controller_free(controller: *mut VentrcController) {
    if !controller.is_null() {
        drop(Box::from_raw(controller));
    }
}

/// Loads a scenario file and builds its plant, starting at rest.
///
/// # Safety
/// `scenario_path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ventrc_plant_load(scenario_path: *const c_char, out: *mut *mut VentrcPlant) -> VentrcStatus {
    guard(|| {
        let scenario = ScenarioConfig::load(path_arg(scenario_path, "scenario_path")?)?;
        let reference = reference_profile(&scenario.patient, scenario.circuit.sample_time, None)?;
        emit(out, VentrcPlant { plant: Plant::from_config(&scenario)?, reference })
    })
}

/// Advances the plant one sample under control pressure `p_control`.
///
/// # Safety
/// `plant` must come from this library; `output` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ventrc_plant_step(
    plant: *mut VentrcPlant,
    p_control: f64,
    output: *mut VentrcPlantOutput,
) -> VentrcStatus {
    guard(|| {
        let p = handle_mut(plant, "plant")?;
        let o = p.plant.step(p_control);
        if let Some(slot) = output.as_mut() {
            *slot = VentrcPlantOutput {
                measured_p_aw: o.measured_p_aw,
                p_aw: o.p_aw,
                p_out: o.p_out,
                p_lung: o.p_lung,
                q_pat: o.q_pat(),
            };
        }
        Ok(())
    })
}

/// Copies up to `capacity` samples of one breath of the pressure reference
/// into `buffer` and stores the breath length in `length`. Pass a null
/// buffer to query the length only.
///
/// # Safety
/// `plant` must come from this library; `buffer` must be null or hold
/// `capacity` doubles; `length` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ventrc_plant_reference(
    plant: *const VentrcPlant,
    buffer: *mut f64,
    capacity: usize,
    length: *mut usize,
) -> VentrcStatus {
    guard(|| {
        let p = handle(plant, "plant")?;
        let len = length.as_mut().ok_or_else(|| null("length"))?;
        *len = p.reference.len();
        if !buffer.is_null() {
            let n = capacity.min(p.reference.len());
            std::slice::from_raw_parts_mut(buffer, n).copy_from_slice(&p.reference[..n]);
        }
        Ok(())
    })
}

/// # Safety
/// `plant` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn ventrc_plant_reset(plant: *mut VentrcPlant) -> VentrcStatus {
    guard(|| {
        handle_mut(plant, "plant")?.plant.reset();
        Ok(())
    })
}

/// # Safety
/// `plant` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ventrc_plant_free(plant: *mut VentrcPlant) {
    if !plant.is_null() {
        drop(Box::from_raw(plant));
    }
}
