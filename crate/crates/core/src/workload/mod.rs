//! Task streams: trace ingestion, synthetic generation, and the trace
//! statistics that pin the per-server speed under a fixed compute budget.

mod synthetic;
mod trace;

use std::collections::{HashMap, HashSet};

pub use synthetic::{generate_synthetic, ArrivalProcess, SizeDistribution, SyntheticSpec, TasksPerJob};
pub use trace::{load_trace, read_trace, write_trace, TraceFormat, TRACE_HEADER};

use crate::error::{Error, Result};

/// One unit of work. `arrival` is in seconds, `cpu_demand` in GNCU-seconds
/// (CPU seconds on a server of computational power 1 GNCU).
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub job_id: String,
    pub task_id: String,
    pub arrival: f64,
    pub cpu_demand: f64,
}

impl Task {
    pub fn new(job_id: impl Into<String>, task_id: impl Into<String>, arrival: f64, cpu_demand: f64) -> Self {
        Task {
            job_id: job_id.into(),
            task_id: task_id.into(),
            arrival,
            cpu_demand,
        }
    }
}

/// An immutable task stream ordered by arrival, with equal arrivals kept
/// in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    tasks: Vec<Task>,
    job_of: Vec<u32>,
    job_ids: Vec<String>,
}

impl Workload {
    /// Validates every task, then stable-sorts by arrival.
    ///
    /// Errors carry the 1-based position of the offending task in `tasks`.
    pub fn new(mut tasks: Vec<Task>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let mut seen = HashSet::with_capacity(tasks.len());
        for (i, t) in tasks.iter().enumerate() {
            check_task(t, i + 1)?;
            if !seen.insert((t.job_id.as_str(), t.task_id.as_str())) {
                return Err(Error::DuplicateTask {
                    row: i + 1,
                    job_id: t.job_id.clone(),
                    task_id: t.task_id.clone(),
                });
            }
        }
        drop(seen);
        // sort_by is stable
        tasks.sort_by(|a, b| a.arrival.total_cmp(&b.arrival));

        let mut index: HashMap<&str, u32> = HashMap::new();
        let mut job_ids = Vec::new();
        let mut job_of = Vec::with_capacity(tasks.len());
        for t in &tasks {
            let next = index.len() as u32;
            let j = *index.entry(t.job_id.as_str()).or_insert_with(|| {
                job_ids.push(t.job_id.clone());
                next
            });
            job_of.push(j);
        }
        Ok(Workload { tasks, job_of, job_ids })
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Dense job index (in order of first appearance) of the task at `task`.
    pub fn job_of(&self, task: usize) -> usize {
        self.job_of[task] as usize
    }

    pub fn job_count(&self) -> usize {
        self.job_ids.len()
    }

    pub fn job_id(&self, job: usize) -> &str {
        &self.job_ids[job]
    }

    /// Copy of this workload with every arrival multiplied by `scale`.
    pub fn time_scaled(&self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::config(format!("time scale must be positive, got {scale}")));
        }
        let mut w = self.clone();
        for t in &mut w.tasks {
            t.arrival *= scale;
        }
        Ok(w)
    }
}

pub(crate) fn check_task(t: &Task, row: usize) -> Result<()> {
    if !t.arrival.is_finite() {
        return Err(Error::MalformedRow {
            row,
            reason: format!("arrival {} is not finite", t.arrival),
        });
    }
    if t.arrival < 0.0 {
        return Err(Error::NegativeArrival { row });
    }
    if !t.cpu_demand.is_finite() {
        return Err(Error::MalformedRow {
            row,
            reason: format!("demand {} is not finite", t.cpu_demand),
        });
    }
    if t.cpu_demand <= 0.0 {
        return Err(Error::NonPositiveDemand { row });
    }
    Ok(())
}

/// Trace-level quantities: lambda is a rate in tasks per second,
/// `mean_cpu_demand` the average demand in GNCU-seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadStats {
    pub task_count: usize,
    pub job_count: usize,
    pub span: f64,
    pub lambda: f64,
    pub mean_cpu_demand: f64,
}

/// Arrival rate is task count over arrival span, so a trace whose tasks all
/// arrive at the same instant has no defined rate.
pub fn compute_stats(w: &Workload) -> Result<WorkloadStats> {
    let tasks = w.tasks();
    let first = tasks.first().ok_or(Error::EmptyTrace)?.arrival;
    let last = tasks[tasks.len() - 1].arrival;
    let span = last - first;
    if span <= 0.0 {
        return Err(Error::ZeroSpan);
    }
    let total: f64 = tasks.iter().map(|t| t.cpu_demand).sum();
    let n = tasks.len() as f64;
    Ok(WorkloadStats {
        task_count: tasks.len(),
        job_count: w.job_count(),
        span,
        lambda: n / span,
        mean_cpu_demand: total / n,
    })
}

/// Per-server speed that makes the offered load of `n_servers` servers equal
/// to `rho0`: mu = lambda * mean_demand / (rho0 * n).
pub fn derive_service_rate(stats: &WorkloadStats, n_servers: usize, rho0: f64) -> Result<f64> {
    if n_servers == 0 {
        return Err(Error::config("number of servers must be at least 1"));
    }
    if !(rho0 > 0.0 && rho0 < 1.0) {
        return Err(Error::config(format!("load must lie in (0, 1), got {rho0}")));
    }
    let mu = stats.lambda * stats.mean_cpu_demand / (rho0 * n_servers as f64);
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::config(format!(
            "derived service rate {mu} is not a positive number"
        )));
    }
    Ok(mu)
}

/// Offered load lambda * mean_demand / (mu * n).
pub fn offered_load(stats: &WorkloadStats, n_servers: usize, mu: f64) -> f64 {
    stats.lambda * stats.mean_cpu_demand / (mu * n_servers as f64)
}
