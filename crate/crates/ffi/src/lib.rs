//! C ABI for `aoi-core`.
//!
//! Every fallible function returns an [`AoiStatus`]; on failure the message is
//! available from [`aoi_last_error_message`] on the same thread. Results that own
//! memory come back as opaque handles released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use aoi_core::model::{ChainParams, NetworkConfig, SecondOrderStats};
use aoi_core::moments::aoi_moment;
use aoi_core::optimize::{cubic_roots, objective, optimize_line_search, OptimizationResult, DEFAULT_ROOT_TOLERANCE};
use aoi_core::policies::{build_policy, PolicyKind};
use aoi_core::second_order::{second_order_model, SeriesControl};
use aoi_core::sim::{simulate, SimOutcome, SimParams};
use aoi_core::AoiError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AoiStatus {
    Ok = 0,
    InvalidParameter = 2,
    NumericDomain = 3,
    Internal = 4,
    NullPointer = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AoiPolicyKind {
    SecondOrderOptimal = 0,
    SlottedAloha = 1,
    OptimalAloha = 2,
    AgeThresholdAloha = 3,
}

impl From<AoiPolicyKind> for PolicyKind {
    fn from(k: AoiPolicyKind) -> Self {
        match k {
            AoiPolicyKind::SecondOrderOptimal => PolicyKind::SecondOrderOptimal,
            AoiPolicyKind::SlottedAloha => PolicyKind::SlottedAloha,
            AoiPolicyKind::OptimalAloha => PolicyKind::OptimalAloha,
            AoiPolicyKind::AgeThresholdAloha => PolicyKind::AgeThresholdAloha,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoiNetworkConfig {
    /// Active users per cluster.
    pub n: u32,
    /// Number of clusters.
    pub c: u32,
    /// AoI moment order.
    pub z: u32,
    /// Weight of the active users' moment.
    pub w: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AoiAnalysis {
    pub lambda: f64,
    pub theta: f64,
    pub m_a: f64,
    pub v2_a: f64,
    pub m_p: f64,
    pub v2_p: f64,
    pub active_moment: f64,
    pub passive_moment: f64,
    pub objective: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AoiTracePoint {
    pub lambda: f64,
    pub r: f64,
    pub s: f64,
    pub objective: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AoiSimParams {
    pub slots: u64,
    pub runs: u32,
    pub base_seed: u64,
    pub warmup_slots: u64,
    pub batch_length: u64,
}

impl From<AoiSimParams> for SimParams {
    fn from(p: AoiSimParams) -> Self {
        SimParams {
            slots: p.slots,
            runs: p.runs,
            base_seed: p.base_seed,
            warmup_slots: p.warmup_slots,
            batch_length: p.batch_length,
        }
    }
}

/// Aggregate of a simulation, or one run of it (`run_index` is -1 for the aggregate).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AoiSimSummary {
    pub run_index: i64,
    pub active_moment: f64,
    pub passive_moment: f64,
    pub objective: f64,
    pub m_a: f64,
    pub v2_a: f64,
    pub m_p: f64,
    pub v2_p: f64,
}

/// Opaque result of [`aoi_optimize`].
pub struct AoiOptimization {
    inner: OptimizationResult,
}

/// Opaque result of [`aoi_simulate`].
pub struct AoiSimulation {
    inner: SimOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Core(AoiError),
    Null(&'static str),
}

impl From<AoiError> for Failure {
    fn from(e: AoiError) -> Self {
        Failure::Core(e)
    }
}

fn status_of(e: &AoiError) -> AoiStatus {
    match e.exit_code() {
        2 => AoiStatus::InvalidParameter,
        3 => AoiStatus::NumericDomain,
        _ => AoiStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AoiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            AoiStatus::Ok
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            AoiStatus::NullPointer
        }
        Err(_) => {
            set_last_error("internal panic");
            AoiStatus::Panic
        }
    }
}

unsafe fn read<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write<T>(p: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    p.write(value);
    Ok(())
}

fn network(c: &AoiNetworkConfig) -> Result<NetworkConfig, Failure> {
    Ok(NetworkConfig::new(c.n, c.c, c.z, c.w)?)
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn aoi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aoi_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// Second-order statistics, AoI moments and objective for the chain `(r, s)`.
///
/// # Safety
/// `config` must point to a valid config and `out` to writable memory.
#[no_mangle]
pub unsafe extern "C" fn aoi_analyze(config: *const AoiNetworkConfig, r: f64, s: f64, out: *mut AoiAnalysis) -> AoiStatus {
    guard(|| {
        let config = network(read(config, "config")?)?;
        let chain = ChainParams::from_rs(r, s)?;
        let ctrl = SeriesControl::default();
        let model = second_order_model(&config, &chain, &ctrl)?;
        let moments = objective(&config, &chain, &ctrl)?;
        let analysis = AoiAnalysis {
            lambda: chain.lambda(),
            theta: chain.theta(),
            m_a: model.active.mean,
            v2_a: model.active.temporal_variance,
            m_p: model.passive.mean,
            v2_p: model.passive.temporal_variance,
            active_moment: moments.active_moment,
            passive_moment: moments.passive_moment,
            objective: moments.objective,
        };
        write(out, analysis, "out")
    })
}

/// `E[AoI^z]` from a delivery process with the given mean and temporal variance.
///
/// # Safety
/// `out` must point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn aoi_aoi_moment(mean: f64, temporal_variance: f64, z: u32, out: *mut f64) -> AoiStatus {
    guard(|| {
        let stats = SecondOrderStats::new(mean, temporal_variance)?;
        write(out, aoi_moment(&stats, z)?, "out")
    })
}

/// Smallest positive roots of the active (`alpha`) and passive (`beta`) cubics.
///
/// # Safety
/// `alpha` and `beta` must point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn aoi_roots(n: u32, c: u32, alpha: *mut f64, beta: *mut f64) -> AoiStatus {
    guard(|| {
        let roots = cubic_roots(c, n, DEFAULT_ROOT_TOLERANCE)?;
        write(alpha, roots.alpha, "alpha")?;
        write(beta, roots.beta, "beta")
    })
}

/// Line search over `λ ∈ (0, 1/N]` with `s = 1`. On success `*out` owns a handle
/// to release with [`aoi_optimization_free`].
///
/// # Safety
/// `config` must point to a valid config and `out` to writable memory.
#[no_mangle]
pub unsafe extern "C" fn aoi_optimize(
    config: *const AoiNetworkConfig,
    precision: f64,
    out: *mut *mut AoiOptimization,
) -> AoiStatus {
    guard(|| {
        let config = network(read(config, "config")?)?;
        let inner = optimize_line_search(&config, precision, &SeriesControl::default())?;
        write(out, Box::into_raw(Box::new(AoiOptimization { inner })), "out")
    })
}

/// Optimal point as a trace point (`lambda*`, `r*`, `s*`, `F`).
///
/// # Safety
/// `handle` must come from [`aoi_optimize`] and not be freed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aoi_optimization_best(handle: *const AoiOptimization, out: *mut AoiTracePoint) -> AoiStatus {
    guard(|| {
        let h = &read(handle, "handle")?.inner;
        write(out, AoiTracePoint { lambda: h.lambda_star, r: h.r_star, s: h.s_star, objective: h.objective_value }, "out")
    })
}

/// Number of evaluated line-search points (0 for a null handle).
///
/// # Safety
/// `handle` must be null or come from [`aoi_optimize`] and not be freed.
#[no_mangle]
pub unsafe extern "C" fn aoi_optimization_trace_len(handle: *const AoiOptimization) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.search_trace.len())
}

/// # Safety
/// `handle` must come from [`aoi_optimize`] and not be freed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aoi_optimization_trace_point(
    handle: *const AoiOptimization,
    index: usize,
    out: *mut AoiTracePoint,
) -> AoiStatus {
    guard(|| {
        let h = &read(handle, "handle")?.inner;
        let p = h
            .search_trace
            .get(index)
            .ok_or_else(|| AoiError::InvalidParameter(format!("trace index {index} out of range")))?;
        write(out, AoiTracePoint { lambda: p.lambda, r: p.r, s: p.s, objective: p.objective }, "out")
    })
}

/// # Safety
/// `handle` must be null or come from [`aoi_optimize`]; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aoi_optimization_free(handle: *mut AoiOptimization) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Default simulation parameters (10 runs of 100 000 slots).
#[no_mangle]
pub extern "C" fn aoi_sim_params_default() -> AoiSimParams {
    let d = SimParams::default();
    AoiSimParams {
        slots: d.slots,
        runs: d.runs,
        base_seed: d.base_seed,
        warmup_slots: d.warmup_slots,
        batch_length: d.batch_length,
    }
}

/// Builds `policy` for `config` and simulates it. `precision` is the line-search
/// and ALOHA-sweep resolution. On success `*out` owns a handle to release with
/// [`aoi_simulation_free`].
///
/// # Safety
/// `config` and `params` must point to valid values and `out` to writable memory.
#[no_mangle]
pub unsafe extern "C" fn aoi_simulate(
    config: *const AoiNetworkConfig,
    policy: AoiPolicyKind,
    precision: f64,
    params: *const AoiSimParams,
    out: *mut *mut AoiSimulation,
) -> AoiStatus {
    guard(|| {
        let config = network(read(config, "config")?)?;
        let sim: SimParams = (*read(params, "params")?).into();
        sim.validate()?;
        let policy = build_policy(policy.into(), &config, precision, &sim)?;
        let inner = simulate(&config, &policy, &sim)?;
        write(out, Box::into_raw(Box::new(AoiSimulation { inner })), "out")
    })
}

/// Run-averaged results.
///
/// # Safety
/// `handle` must come from [`aoi_simulate`] and not be freed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aoi_simulation_summary(handle: *const AoiSimulation, out: *mut AoiSimSummary) -> AoiStatus {
    guard(|| {
        let o = &read(handle, "handle")?.inner;
        let summary = AoiSimSummary {
            run_index: -1,
            active_moment: o.empirical_active_moment,
            passive_moment: o.empirical_passive_moment,
            objective: o.empirical_objective,
            m_a: o.empirical_m_a,
            v2_a: o.empirical_v2_a,
            m_p: o.empirical_m_p,
            v2_p: o.empirical_v2_p,
        };
        write(out, summary, "out")
    })
}

/// Number of runs held by the handle (0 for a null handle).
///
/// # Safety
/// `handle` must be null or come from [`aoi_simulate`] and not be freed.
#[no_mangle]
pub unsafe extern "C" fn aoi_simulation_run_count(handle: *const AoiSimulation) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.per_run.len())
}

/// # Safety
/// `handle` must come from [`aoi_simulate`] and not be freed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aoi_simulation_run(handle: *const AoiSimulation, index: usize, out: *mut AoiSimSummary) -> AoiStatus {
    guard(|| {
        let o = &read(handle, "handle")?.inner;
        let r = o
            .per_run
            .get(index)
            .ok_or_else(|| AoiError::InvalidParameter(format!("run index {index} out of range")))?;
        let summary = AoiSimSummary {
            run_index: r.run_index as i64,
            active_moment: r.active_moment,
            passive_moment: r.passive_moment,
            objective: r.objective,
            m_a: r.m_hat_a,
            v2_a: r.v2_hat_a,
            m_p: r.m_hat_p,
            v2_p: r.v2_hat_p,
        };
        write(out, summary, "out")
    })
}

/// # Safety
/// `handle` must be null or come from [`aoi_simulate`]; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aoi_simulation_free(handle: *mut AoiSimulation) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}
