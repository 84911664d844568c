//! C ABI for `wsn-energy`.
//!
//! Every fallible call returns a [`WsnStatus`]; on failure the message is
//! available from [`wsn_last_error`] on the same thread until the next
//! failing call. Handles are opaque and must be released with their
//! matching `*_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wsn_energy::energy::{
    overall_energy, task_energy, CoefficientVector, Constituent, ConstituentFlowVector, ConstituentMask,
    ResourcePowerProfile, ResourceUsageVector,
};
use wsn_energy::pipeline::{fit_trace, FitOptions, FitReport};
use wsn_energy::radio::{self, RadioModelParams};
use wsn_energy::sim::{self, Phase, Trace};
use wsn_energy::{io, Error, ScenarioConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    RankDeficient = 4,
    Singularity = 5,
    Parse = 6,
    Io = 7,
    OutOfRange = 8,
    Other = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsnPhase {
    Initialization = 0,
    Collection = 1,
    Maintenance = 2,
}

/// Scenario configuration handle.
pub struct WsnScenario(ScenarioConfig);

/// Slice trace handle.
pub struct WsnTrace(Trace);

/// Fit report handle.
pub struct WsnFit(FitReport);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsnSliceRecord {
    pub slice: u32,
    pub phase: WsnPhase,
    /// Individual, Local, Global, Environment, Sink.
    pub flows: [f64; 5],
    pub energy_j: f64,
    pub alive_nodes: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsnFitSummary {
    pub mape_pct: f64,
    pub max_pct_error: f64,
    /// Index of the dominant constituent (0 Individual .. 4 Sink).
    pub dominant: u32,
    pub observations: u64,
    pub condition: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsnPowerProfile {
    pub p_cpu: f64,
    pub p_mem: f64,
    pub p_rx: f64,
    pub p_tx: f64,
    pub p_sens: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WsnUsage {
    pub b_cpu: u64,
    pub b_mem: u64,
    pub b_rx: u64,
    pub b_tx: u64,
    pub b_sens: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsnRadioParams {
    pub e_t_elec: f64,
    pub e_r_elec: f64,
    pub eps_fs: f64,
    pub eps_mp: f64,
    pub eps_amp: f64,
    pub alpha_pl: f64,
    /// Crossover distance; NaN derives it from `eps_fs` and `eps_mp`.
    pub d0: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> WsnStatus {
    match e {
        Error::InvalidArgument { .. } | Error::InvalidTask { .. } | Error::MaskMismatch(_) => {
            WsnStatus::InvalidArgument
        }
        Error::InvalidConfig(_) | Error::Topology(_) => WsnStatus::InvalidConfig,
        Error::RankDeficient { .. } | Error::TooFewObservations { .. } => WsnStatus::RankDeficient,
        Error::Singularity { .. } => WsnStatus::Singularity,
        Error::Parse(_) => WsnStatus::Parse,
        Error::Io(_) => WsnStatus::Io,
        Error::WindowTooLarge { .. } => WsnStatus::OutOfRange,
        Error::LengthMismatch(..) | Error::ZeroObservation(_) => WsnStatus::Other,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), WsnStatus>) -> WsnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WsnStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            WsnStatus::Panic
        }
    }
}

fn fail(e: Error) -> WsnStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> WsnStatus {
    set_error(format!("{what} is null"));
    WsnStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, WsnStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        WsnStatus::InvalidArgument
    })
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, WsnStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, WsnStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

fn mask_from_bits(bits: u32) -> Result<ConstituentMask, WsnStatus> {
    if bits == 0 || bits >= 1 << 5 {
        set_error(format!(
            "constituent mask {bits:#x} must set bits 0..4 only and at least one"
        ));
        return Err(WsnStatus::InvalidArgument);
    }
    Ok(ConstituentMask(std::array::from_fn(|k| bits & (1 << k) != 0)))
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next failing call on this thread.
#[no_mangle]
pub extern "C" fn wsn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wsn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// A scenario with every default.
#[no_mangle]
pub extern "C" fn wsn_scenario_default() -> *mut WsnScenario {
    Box::into_raw(Box::new(WsnScenario(ScenarioConfig::default())))
}

/// Parses and validates a TOML scenario.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsn_scenario_from_toml(toml: *const c_char, out: *mut *mut WsnScenario) -> WsnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(toml, "toml")?;
        let cfg = ScenarioConfig::from_toml_str(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(WsnScenario(cfg)));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wsn_scenario_set_seed(scenario: *mut WsnScenario, seed: u64) -> WsnStatus {
    guard(|| {
        out_arg(scenario, "scenario")?.0.sim.seed = seed;
        Ok(())
    })
}

/// Sets a sweepable parameter by name. The change is rejected, leaving the
/// scenario untouched, if it breaks a boundary.
///
/// # Safety
/// `scenario` must be a live handle; `key` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wsn_scenario_set_parameter(
    scenario: *mut WsnScenario,
    key: *const c_char,
    value: f64,
) -> WsnStatus {
    guard(|| {
        let s = out_arg(scenario, "scenario")?;
        let key = str_arg(key, "key")?;
        let mut next = s.0.clone();
        next.set_parameter(key, value).map_err(fail)?;
        next.validate().map_err(fail)?;
        s.0 = next;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wsn_scenario_free(scenario: *mut WsnScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the scenario to completion.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsn_simulate(scenario: *const WsnScenario, out: *mut *mut WsnTrace) -> WsnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = &in_arg(scenario, "scenario")?.0;
        let run = sim::run(cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(WsnTrace(run.trace)));
        Ok(())
    })
}

/// Number of slices, 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wsn_trace_len(trace: *const WsnTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsn_trace_record(trace: *const WsnTrace, index: usize, out: *mut WsnSliceRecord) -> WsnStatus {
    guard(|| {
        let t = &in_arg(trace, "trace")?.0;
        let out = out_arg(out, "out")?;
        let r = t.records.get(index).ok_or_else(|| {
            set_error(format!("slice index {index} out of range for {} slices", t.len()));
            WsnStatus::OutOfRange
        })?;
        *out = WsnSliceRecord {
            slice: r.slice,
            phase: match r.phase {
                Phase::Initialization => WsnPhase::Initialization,
                Phase::Collection => WsnPhase::Collection,
                Phase::Maintenance => WsnPhase::Maintenance,
            },
            flows: r.flows.0,
            energy_j: r.energy_j,
            alive_nodes: r.alive_nodes,
        };
        Ok(())
    })
}

/// # Safety
/// `trace` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wsn_trace_write_csv(trace: *const WsnTrace, path: *const c_char) -> WsnStatus {
    guard(|| {
        let t = &in_arg(trace, "trace")?.0;
        let path = str_arg(path, "path")?;
        io::write_trace_file(t, path).map_err(fail)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsn_trace_read_csv(path: *const c_char, out: *mut *mut WsnTrace) -> WsnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let t = io::read_trace_file(path).map_err(fail)?;
        *out = Box::into_raw(Box::new(WsnTrace(t)));
        Ok(())
    })
}

/// # Safety
/// `trace` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wsn_trace_free(trace: *mut WsnTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Least-squares fit of a trace. `mask_bits` selects constituents (bit 0
/// Individual .. bit 4 Sink); `train_fraction` in (0, 1] is the leading share
/// of slices fitted, the rest held out for the error summary.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsn_fit_trace(
    trace: *const WsnTrace,
    mask_bits: u32,
    train_fraction: f64,
    out: *mut *mut WsnFit,
) -> WsnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let t = &in_arg(trace, "trace")?.0;
        let opts = FitOptions {
            mask: mask_from_bits(mask_bits)?,
            train_fraction,
            window: None,
        };
        let report = fit_trace(t, &opts).map_err(fail)?;
        *out = Box::into_raw(Box::new(WsnFit(report)));
        Ok(())
    })
}

/// Writes the five coefficients (zero for inactive constituents).
///
/// # Safety
/// `fit` must be a live handle; `out` must point to 5 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wsn_fit_coefficients(fit: *const WsnFit, out: *mut f64) -> WsnStatus {
    guard(|| {
        let f = &in_arg(fit, "fit")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(f.fit.coefficients.alpha.as_ptr(), out, 5);
        Ok(())
    })
}

/// # Safety
/// `fit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsn_fit_summary(fit: *const WsnFit, out: *mut WsnFitSummary) -> WsnStatus {
    guard(|| {
        let f = &in_arg(fit, "fit")?.0;
        *out_arg(out, "out")? = WsnFitSummary {
            mape_pct: f.errors.mape_pct,
            max_pct_error: f.errors.max_ape_pct,
            dominant: f.dominant.index() as u32,
            observations: f.fit.observations as u64,
            condition: f.fit.condition,
        };
        Ok(())
    })
}

/// # Safety
/// `fit` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wsn_fit_free(fit: *mut WsnFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Energy of one task from its resource usage.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wsn_task_energy(
    usage: *const WsnUsage,
    profile: *const WsnPowerProfile,
    out: *mut f64,
) -> WsnStatus {
    guard(|| {
        let u = in_arg(usage, "usage")?;
        let p = in_arg(profile, "profile")?;
        let out = out_arg(out, "out")?;
        let usage = ResourceUsageVector::new(u.b_cpu, u.b_mem, u.b_rx, u.b_tx, u.b_sens);
        let profile = ResourcePowerProfile::new(p.p_cpu, p.p_mem, p.p_rx, p.p_tx, p.p_sens).map_err(fail)?;
        *out = task_energy(&usage, &profile).map_err(fail)?;
        Ok(())
    })
}

/// Overall energy `sum alpha_k * b_k` over the constituents in `mask_bits`.
///
/// # Safety
/// `alpha` and `flows` must each point to 5 readable doubles.
#[no_mangle]
pub unsafe extern "C" fn wsn_overall_energy(
    alpha: *const f64,
    flows: *const f64,
    mask_bits: u32,
    out: *mut f64,
) -> WsnStatus {
    guard(|| {
        if alpha.is_null() {
            return Err(null("alpha"));
        }
        if flows.is_null() {
            return Err(null("flows"));
        }
        let out = out_arg(out, "out")?;
        let mask = mask_from_bits(mask_bits)?;
        let a: [f64; 5] = ptr::read(alpha.cast());
        let b: [f64; 5] = ptr::read(flows.cast());
        let coeffs = CoefficientVector::new(a, mask).map_err(fail)?;
        let flows = ConstituentFlowVector::new(b).map_err(fail)?;
        *out = overall_energy(&coeffs, &flows).map_err(fail)?;
        Ok(())
    })
}

/// Default radio parameters.
#[no_mangle]
pub extern "C" fn wsn_radio_default() -> WsnRadioParams {
    let p = RadioModelParams::default();
    WsnRadioParams {
        e_t_elec: p.e_t_elec,
        e_r_elec: p.e_r_elec,
        eps_fs: p.eps_fs,
        eps_mp: p.eps_mp,
        eps_amp: p.eps_amp,
        alpha_pl: p.alpha_pl,
        d0: p.d0.unwrap_or(f64::NAN),
    }
}

fn radio_params(p: &WsnRadioParams) -> Result<RadioModelParams, WsnStatus> {
    let params = RadioModelParams {
        e_t_elec: p.e_t_elec,
        e_r_elec: p.e_r_elec,
        eps_fs: p.eps_fs,
        eps_mp: p.eps_mp,
        eps_amp: p.eps_amp,
        alpha_pl: p.alpha_pl,
        d0: if p.d0.is_nan() { None } else { Some(p.d0) },
    };
    params.validate().map_err(fail)?;
    Ok(params)
}

/// Distance beyond which relaying through a midpoint uses less energy than
/// one direct hop.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wsn_relay_threshold(params: *const WsnRadioParams, out: *mut f64) -> WsnStatus {
    guard(|| {
        let p = radio_params(in_arg(params, "params")?)?;
        *out_arg(out, "out")? = radio::relay_threshold(&p).map_err(fail)?;
        Ok(())
    })
}

/// Transmit energy per bit over distance `d`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wsn_tx_energy_per_bit(params: *const WsnRadioParams, d: f64, out: *mut f64) -> WsnStatus {
    guard(|| {
        let p = radio_params(in_arg(params, "params")?)?;
        *out_arg(out, "out")? = radio::tx_energy_per_bit(d, &p).map_err(fail)?;
        Ok(())
    })
}

/// Name of constituent `index` (0..4) as a static string, NULL if out of range.
#[no_mangle]
pub extern "C" fn wsn_constituent_name(index: u32) -> *const c_char {
    match Constituent::from_index(index as usize) {
        Some(Constituent::Individual) => c"individual".as_ptr(),
        Some(Constituent::Local) => c"local".as_ptr(),
        Some(Constituent::Global) => c"global".as_ptr(),
        Some(Constituent::Environment) => c"environment".as_ptr(),
        Some(Constituent::Sink) => c"sink".as_ptr(),
        None => ptr::null(),
    }
}
