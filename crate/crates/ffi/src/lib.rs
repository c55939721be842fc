//! C ABI for the simulator.
//!
//! Every fallible function returns a [`DsStatus`]. On failure a message is
//! kept per thread and can be read with [`ds_last_error`]. Workloads and runs
//! are opaque handles released with [`ds_workload_free`] and [`ds_run_free`];
//! a run keeps its own reference to the workload, so the two may be freed in
//! any order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use dispatch_sim::engine::write_records_file;
use dispatch_sim::workload::TraceFormat;
use dispatch_sim::{
    aggregate, compute_stats, derive_service_rate, generate_synthetic, load_trace, run, validate_run, Error,
    JiqFallback, MetricsSummary, MigrationMode, PolicyKind, RunOutput, Shape, SyntheticSpec, SystemConfig, Workload,
    WorkloadStats,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    Validation = 6,
    Overflow = 7,
    Panic = 8,
}

pub const DS_SHAPE_SINGLE_STAGE: u32 = 0;
pub const DS_SHAPE_TWO_STAGE: u32 = 1;

pub const DS_POLICY_RR: u32 = 0;
pub const DS_POLICY_JIQ: u32 = 1;
pub const DS_POLICY_LWL: u32 = 2;

pub const DS_MIGRATION_RESUME: u32 = 0;
pub const DS_MIGRATION_RESTART: u32 = 1;

pub const DS_JIQ_FALLBACK_RANDOM: u32 = 0;
pub const DS_JIQ_FALLBACK_ROUND_ROBIN: u32 = 1;

/// Loaded or generated tasks.
pub struct DsWorkload {
    inner: Arc<Workload>,
}

/// A finished simulation run.
pub struct DsRun {
    workload: Arc<Workload>,
    out: RunOutput,
    summary: MetricsSummary,
    violations: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsSystemConfig {
    /// `DS_SHAPE_*`.
    pub shape: u32,
    pub n_total: usize,
    /// Two-stage only; 0 for both selects the equal split.
    pub n_stage1: usize,
    pub n_stage2: usize,
    /// Per-server speed in GNCU.
    pub speed: f64,
    /// Stage-2 speed; 0 uses `speed`.
    pub stage2_speed: f64,
    /// Stage-1 threshold in seconds (two-stage only).
    pub theta_s: f64,
    /// `DS_POLICY_*`.
    pub single_policy: u32,
    pub stage1_policy: u32,
    pub stage2_policy: u32,
    /// `DS_MIGRATION_*`.
    pub migration: u32,
    /// `DS_JIQ_FALLBACK_*`.
    pub jiq_fallback: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DsWorkloadStats {
    pub task_count: usize,
    pub job_count: usize,
    pub span_s: f64,
    /// Tasks per second.
    pub lambda: f64,
    pub mean_cpu_demand: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DsMetricsSummary {
    pub mrt_s: f64,
    pub mjs: f64,
    pub job_count: usize,
    pub task_count: usize,
    pub p50_r: f64,
    pub p90_r: f64,
    pub p99_r: f64,
    pub p50_s: f64,
    pub p90_s: f64,
    pub p99_s: f64,
    pub min_s: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DsCompletionRecord {
    /// Index of the task in arrival order.
    pub task: usize,
    pub arrival_ns: u64,
    pub completion_ns: u64,
    /// -1 when absent.
    pub stage1_server: i64,
    pub stage2_server: i64,
    pub migrated: bool,
    pub stage1_service_ns: u64,
    pub service_received_ns: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: DsStatus,
    message: String,
}

impl Failure {
    fn new(status: DsStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            _ if e.exit_code() == 3 => DsStatus::Io,
            Error::Io { .. } => DsStatus::Io,
            Error::MalformedRow { .. }
            | Error::NonPositiveDemand { .. }
            | Error::NegativeArrival { .. }
            | Error::DuplicateTask { .. }
            | Error::Csv(_)
            | Error::Toml(_) => DsStatus::Parse,
            Error::EmptyTrace | Error::ZeroSpan | Error::Config(_) => DsStatus::Config,
            Error::TimeOverflow { .. } => DsStatus::Overflow,
            Error::MissingRecord { .. } | Error::Validation { .. } => DsStatus::Validation,
        };
        Failure::new(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err(fail)) => {
            set_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            DsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(DsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(DsStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn policy(v: u32) -> Result<PolicyKind, Failure> {
    match v {
        DS_POLICY_RR => Ok(PolicyKind::Rr),
        DS_POLICY_JIQ => Ok(PolicyKind::Jiq),
        DS_POLICY_LWL => Ok(PolicyKind::Lwl),
        _ => Err(Failure::new(DsStatus::InvalidArgument, format!("unknown policy {v}"))),
    }
}

fn policy_code(p: PolicyKind) -> u32 {
    match p {
        PolicyKind::Rr => DS_POLICY_RR,
        PolicyKind::Jiq => DS_POLICY_JIQ,
        PolicyKind::Lwl => DS_POLICY_LWL,
    }
}

impl DsSystemConfig {
    fn from_config(c: &SystemConfig) -> Self {
        DsSystemConfig {
            shape: match c.shape {
                Shape::SingleStage => DS_SHAPE_SINGLE_STAGE,
                Shape::TwoStage => DS_SHAPE_TWO_STAGE,
            },
            n_total: c.n_total,
            n_stage1: c.n_stage1.unwrap_or(0),
            n_stage2: c.n_stage2.unwrap_or(0),
            speed: c.speed,
            stage2_speed: c.stage2_speed.unwrap_or(0.0),
            theta_s: c.theta_s.unwrap_or(0.0),
            single_policy: policy_code(c.single_policy),
            stage1_policy: policy_code(c.stage1_policy),
            stage2_policy: policy_code(c.stage2_policy),
            migration: match c.migration {
                MigrationMode::Resume => DS_MIGRATION_RESUME,
                MigrationMode::Restart => DS_MIGRATION_RESTART,
            },
            jiq_fallback: match c.jiq_fallback {
                JiqFallback::Random => DS_JIQ_FALLBACK_RANDOM,
                JiqFallback::RoundRobin => DS_JIQ_FALLBACK_ROUND_ROBIN,
            },
        }
    }

    fn to_config(self) -> Result<SystemConfig, Failure> {
        let bad = |what: &str, v: u32| Failure::new(DsStatus::InvalidArgument, format!("unknown {what} {v}"));
        let shape = match self.shape {
            DS_SHAPE_SINGLE_STAGE => Shape::SingleStage,
            DS_SHAPE_TWO_STAGE => Shape::TwoStage,
            v => return Err(bad("shape", v)),
        };
        let (n_stage1, n_stage2) = match (self.n_stage1, self.n_stage2) {
            (0, 0) => (None, None),
            (a, b) => (Some(a), Some(b)),
        };
        Ok(SystemConfig {
            shape,
            n_total: self.n_total,
            n_stage1,
            n_stage2,
            speed: self.speed,
            stage2_speed: (self.stage2_speed != 0.0).then_some(self.stage2_speed),
            theta_s: (shape == Shape::TwoStage).then_some(self.theta_s),
            single_policy: policy(self.single_policy)?,
            stage1_policy: policy(self.stage1_policy)?,
            stage2_policy: policy(self.stage2_policy)?,
            migration: match self.migration {
                DS_MIGRATION_RESUME => MigrationMode::Resume,
                DS_MIGRATION_RESTART => MigrationMode::Restart,
                v => return Err(bad("migration mode", v)),
            },
            jiq_fallback: match self.jiq_fallback {
                DS_JIQ_FALLBACK_RANDOM => JiqFallback::Random,
                DS_JIQ_FALLBACK_ROUND_ROBIN => JiqFallback::RoundRobin,
                v => return Err(bad("jiq fallback", v)),
            },
        })
    }
}

impl From<&WorkloadStats> for DsWorkloadStats {
    fn from(s: &WorkloadStats) -> Self {
        DsWorkloadStats {
            task_count: s.task_count,
            job_count: s.job_count,
            span_s: s.span,
            lambda: s.lambda,
            mean_cpu_demand: s.mean_cpu_demand,
        }
    }
}

impl From<&DsWorkloadStats> for WorkloadStats {
    fn from(s: &DsWorkloadStats) -> Self {
        WorkloadStats {
            task_count: s.task_count,
            job_count: s.job_count,
            span: s.span_s,
            lambda: s.lambda,
            mean_cpu_demand: s.mean_cpu_demand,
        }
    }
}

fn store<T>(slot: &mut *mut T, value: T) {
    *slot = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a trace CSV (`job_id,task_id,arrival_s,cpu_gncu_s`), multiplying
/// arrival times by `time_scale`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_workload_load_trace(
    path: *const c_char,
    time_scale: f64,
    out_workload: *mut *mut DsWorkload,
) -> DsStatus {
    guard(|| {
        let slot = out(out_workload, "out_workload")?;
        *slot = ptr::null_mut();
        let path = text(path, "path")?;
        let w = load_trace(Path::new(path), TraceFormat::Csv, time_scale)?;
        store(slot, DsWorkload { inner: Arc::new(w) });
        Ok(())
    })
}

/// Generates a synthetic workload from a spec in config-file syntax.
///
/// # Safety
/// `spec_toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_workload_generate(
    spec_toml: *const c_char,
    out_workload: *mut *mut DsWorkload,
) -> DsStatus {
    guard(|| {
        let slot = out(out_workload, "out_workload")?;
        *slot = ptr::null_mut();
        let spec = SyntheticSpec::from_toml(text(spec_toml, "spec_toml")?)?;
        let w = generate_synthetic(&spec)?;
        store(slot, DsWorkload { inner: Arc::new(w) });
        Ok(())
    })
}

/// Number of tasks, or 0 for a null handle.
///
/// # Safety
/// `workload` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_workload_task_count(workload: *const DsWorkload) -> usize {
    workload.as_ref().map_or(0, |w| w.inner.len())
}

/// Number of distinct jobs, or 0 for a null handle.
///
/// # Safety
/// `workload` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_workload_job_count(workload: *const DsWorkload) -> usize {
    workload.as_ref().map_or(0, |w| w.inner.job_count())
}

/// # Safety
/// `workload` must be a live handle and `out_stats` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_workload_stats(workload: *const DsWorkload, out_stats: *mut DsWorkloadStats) -> DsStatus {
    guard(|| {
        let w = handle(workload, "workload")?;
        let slot = out(out_stats, "out_stats")?;
        *slot = DsWorkloadStats::from(&compute_stats(&w.inner)?);
        Ok(())
    })
}

/// Per-server speed that offers load `rho0` to `n_servers` servers.
///
/// # Safety
/// `stats` and `out_speed` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ds_derive_service_rate(
    stats: *const DsWorkloadStats,
    n_servers: usize,
    rho0: f64,
    out_speed: *mut f64,
) -> DsStatus {
    guard(|| {
        let s = WorkloadStats::from(handle(stats, "stats")?);
        let slot = out(out_speed, "out_speed")?;
        *slot = derive_service_rate(&s, n_servers, rho0)?;
        Ok(())
    })
}

/// Fills `out_config` with a single-stage system of `n` servers.
///
/// # Safety
/// `out_config` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_system_config_single(
    n: usize,
    speed: f64,
    policy_code: u32,
    out_config: *mut DsSystemConfig,
) -> DsStatus {
    guard(|| {
        let slot = out(out_config, "out_config")?;
        *slot = DsSystemConfig::from_config(&SystemConfig::single_stage(n, speed, policy(policy_code)?));
        Ok(())
    })
}

/// Fills `out_config` with an equal-split two-stage system, RR at both
/// stages and resume migration.
///
/// # Safety
/// `out_config` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_system_config_two_stage(
    n: usize,
    speed: f64,
    theta_s: f64,
    out_config: *mut DsSystemConfig,
) -> DsStatus {
    guard(|| {
        let slot = out(out_config, "out_config")?;
        *slot = DsSystemConfig::from_config(&SystemConfig::two_stage(n, speed, theta_s));
        Ok(())
    })
}

/// Simulates `workload` on `config`. The run is validated; a run with
/// violations is still returned and reports them through
/// [`ds_run_violation_count`].
///
/// # Safety
/// `workload` must be a live handle; `config` and `out_run` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ds_run(
    workload: *const DsWorkload,
    config: *const DsSystemConfig,
    seed: u64,
    out_run: *mut *mut DsRun,
) -> DsStatus {
    guard(|| {
        let slot = out(out_run, "out_run")?;
        *slot = ptr::null_mut();
        let w = handle(workload, "workload")?;
        let cfg = handle(config, "config")?.to_config()?;
        let result = run(&w.inner, &cfg, seed)?;
        let violations = validate_run(&result, &w.inner).violations.len();
        let summary = aggregate(&result.records, &w.inner, cfg.speed)?;
        store(
            slot,
            DsRun {
                workload: Arc::clone(&w.inner),
                out: result,
                summary,
                violations,
            },
        );
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle and `out_summary` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_run_summary(run: *const DsRun, out_summary: *mut DsMetricsSummary) -> DsStatus {
    guard(|| {
        let r = handle(run, "run")?;
        let m = &r.summary;
        *out(out_summary, "out_summary")? = DsMetricsSummary {
            mrt_s: m.mrt,
            mjs: m.mjs,
            job_count: m.job_count,
            task_count: m.task_count,
            p50_r: m.p50_r,
            p90_r: m.p90_r,
            p99_r: m.p99_r,
            p50_s: m.p50_s,
            p90_s: m.p90_s,
            p99_s: m.p99_s,
            min_s: m.min_s,
        };
        Ok(())
    })
}

/// Number of completion records, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_run_record_count(run: *const DsRun) -> usize {
    run.as_ref().map_or(0, |r| r.out.records.len())
}

/// Record `index` in completion order.
///
/// # Safety
/// `run` must be a live handle and `out_record` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ds_run_record(
    run: *const DsRun,
    index: usize,
    out_record: *mut DsCompletionRecord,
) -> DsStatus {
    guard(|| {
        let r = handle(run, "run")?;
        let slot = out(out_record, "out_record")?;
        let rec = r.out.records.get(index).ok_or_else(|| {
            Failure::new(
                DsStatus::InvalidArgument,
                format!("record {index} out of range ({} records)", r.out.records.len()),
            )
        })?;
        let server = |s: Option<usize>| s.map_or(-1, |s| s as i64);
        *slot = DsCompletionRecord {
            task: rec.task,
            arrival_ns: rec.arrival.0,
            completion_ns: rec.completion.0,
            stage1_server: server(rec.stage1_server),
            stage2_server: server(rec.stage2_server),
            migrated: rec.migrated,
            stage1_service_ns: rec.stage1_service.0,
            service_received_ns: rec.service_received.0,
        };
        Ok(())
    })
}

/// Validation violations found in the run, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_run_violation_count(run: *const DsRun) -> usize {
    run.as_ref().map_or(0, |r| r.violations)
}

/// Writes the per-task records CSV.
///
/// # Safety
/// `run` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ds_run_write_records(run: *const DsRun, path: *const c_char) -> DsStatus {
    guard(|| {
        let r = handle(run, "run")?;
        let path = text(path, "path")?;
        write_records_file(Path::new(path), &r.out.records, &r.workload)?;
        Ok(())
    })
}

/// # Safety
/// `workload` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_workload_free(workload: *mut DsWorkload) {
    if !workload.is_null() {
        drop(Box::from_raw(workload));
    }
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_run_free(run: *mut DsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
