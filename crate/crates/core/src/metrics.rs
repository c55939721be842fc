//! Job-level metrics: response time R_j (first task arrival to last task
//! completion) and slowdown S_j = R_j / max task service time, averaged over
//! jobs.

use std::fs::OpenOptions;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{service_time, CompletionRecord, SimTime};
use crate::error::{Error, Result};
use crate::workload::Workload;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobRecord {
    pub job: usize,
    pub first_arrival: SimTime,
    pub last_completion: SimTime,
    pub max_task_service: SimTime,
}

impl JobRecord {
    pub fn response_time(&self) -> f64 {
        (self.last_completion.0 - self.first_arrival.0) as f64 / 1e9
    }

    pub fn slowdown(&self) -> f64 {
        (self.last_completion.0 - self.first_arrival.0) as f64 / self.max_task_service.0 as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsSummary {
    pub mrt: f64,
    pub mjs: f64,
    pub job_count: usize,
    pub task_count: usize,
    pub p50_r: f64,
    pub p90_r: f64,
    pub p99_r: f64,
    pub p50_s: f64,
    pub p90_s: f64,
    pub p99_s: f64,
    /// Smallest per-job slowdown; never below 1 for a valid run.
    pub min_s: f64,
}

/// Per-job records. Service times are `cpu_demand / speed` on the same
/// nanosecond grid the engine uses, so a task never beats its own service
/// time.
pub fn job_records(records: &[CompletionRecord], w: &Workload, speed: f64) -> Result<Vec<JobRecord>> {
    let mut completion = vec![None; w.len()];
    for r in records {
        if r.task < w.len() {
            completion[r.task] = Some(r.completion);
        }
    }
    let mut jobs: Vec<Option<JobRecord>> = vec![None; w.job_count()];
    for (task, t) in w.tasks().iter().enumerate() {
        let done = completion[task].ok_or(Error::MissingRecord { task })?;
        let arrival = SimTime::from_secs(t.arrival)?;
        let service = service_time(t.cpu_demand, speed)?;
        let job = w.job_of(task);
        let rec = jobs[job].get_or_insert(JobRecord {
            job,
            first_arrival: arrival,
            last_completion: done,
            max_task_service: service,
        });
        rec.first_arrival = rec.first_arrival.min(arrival);
        rec.last_completion = rec.last_completion.max(done);
        rec.max_task_service = rec.max_task_service.max(service);
    }
    Ok(jobs.into_iter().map(|j| j.expect("every job has a task")).collect())
}

/// Nearest-rank quantile of ascending `sorted`.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn summarize(jobs: &[JobRecord], task_count: usize) -> MetricsSummary {
    let n = jobs.len() as f64;
    let mut r: Vec<f64> = jobs.iter().map(JobRecord::response_time).collect();
    let mut s: Vec<f64> = jobs.iter().map(JobRecord::slowdown).collect();
    let mrt = r.iter().sum::<f64>() / n;
    let mjs = s.iter().sum::<f64>() / n;
    r.sort_by(f64::total_cmp);
    s.sort_by(f64::total_cmp);
    MetricsSummary {
        mrt,
        mjs,
        job_count: jobs.len(),
        task_count,
        p50_r: quantile(&r, 0.5),
        p90_r: quantile(&r, 0.9),
        p99_r: quantile(&r, 0.99),
        p50_s: quantile(&s, 0.5),
        p90_s: quantile(&s, 0.9),
        p99_s: quantile(&s, 0.99),
        min_s: s.first().copied().unwrap_or(f64::NAN),
    }
}

/// Mean response time and mean job slowdown of a run whose servers (stage-1
/// servers for two-stage systems) have speed `speed`.
pub fn aggregate(records: &[CompletionRecord], w: &Workload, speed: f64) -> Result<MetricsSummary> {
    let jobs = job_records(records, w, speed)?;
    Ok(summarize(&jobs, w.len()))
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub shape: String,
    pub policy: String,
    pub n: usize,
    pub mu: f64,
    pub rho: f64,
    pub theta_s: Option<f64>,
    pub mrt_s: f64,
    pub mjs: f64,
    pub p50_r: f64,
    pub p90_r: f64,
    pub p99_r: f64,
    pub p50_s: f64,
    pub p90_s: f64,
    pub p99_s: f64,
    pub jobs: usize,
    pub tasks: usize,
}

pub const SUMMARY_HEADER: [&str; 17] = [
    "run_id", "shape", "policy", "n", "mu", "rho", "theta_s", "mrt_s", "mjs", "p50_r", "p90_r", "p99_r", "p50_s",
    "p90_s", "p99_s", "jobs", "tasks",
];

impl SummaryRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        run_id: impl Into<String>,
        shape: impl Into<String>,
        policy: impl Into<String>,
        n: usize,
        mu: f64,
        rho: f64,
        theta_s: Option<f64>,
        m: &MetricsSummary,
    ) -> Self {
        SummaryRow {
            run_id: run_id.into(),
            shape: shape.into(),
            policy: policy.into(),
            n,
            mu,
            rho,
            theta_s,
            mrt_s: m.mrt,
            mjs: m.mjs,
            p50_r: m.p50_r,
            p90_r: m.p90_r,
            p99_r: m.p99_r,
            p50_s: m.p50_s,
            p90_s: m.p90_s,
            p99_s: m.p99_s,
            jobs: m.job_count,
            tasks: m.task_count,
        }
    }
}

fn write_rows<W: std::io::Write>(out: W, rows: &[SummaryRow], header: bool) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    if header {
        wtr.write_record(SUMMARY_HEADER)?;
    }
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes a fresh summary table; an empty slice yields a header-only file.
pub fn export_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rows(file, rows, true)
}

/// Appends rows, writing the header only if the file is new or empty.
pub fn append_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let empty = file.metadata().map_err(|e| Error::io(path, e))?.len() == 0;
    write_rows(file, rows, empty)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<SummaryRow>, _>>()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::Task;

    fn secs(s: f64) -> SimTime {
        SimTime::from_secs(s).unwrap()
    }

    fn rec(task: usize, arrival: f64, completion: f64) -> CompletionRecord {
        CompletionRecord {
            task,
            arrival: secs(arrival),
            stage1_server: Some(0),
            stage2_server: None,
            migrated: false,
            completion: secs(completion),
            stage1_service: SimTime::ZERO,
            service_received: SimTime::ZERO,
        }
    }

    #[test]
    fn two_task_job() {
        let w = Workload::new(vec![Task::new("j", "a", 0.0, 2.0), Task::new("j", "b", 1.0, 3.0)]).unwrap();
        let m = aggregate(&[rec(0, 0.0, 4.0), rec(1, 1.0, 6.0)], &w, 1.0).unwrap();
        assert_eq!(m.mrt, 6.0);
        assert_eq!(m.mjs, 2.0);
        assert_eq!(m.min_s, 2.0);
        assert_eq!((m.job_count, m.task_count), (1, 2));
    }

    #[test]
    fn lone_task_has_unit_slowdown() {
        let w = Workload::new(vec![Task::new("j", "a", 1.0, 3.0)]).unwrap();
        let m = aggregate(&[rec(0, 1.0, 2.5)], &w, 2.0).unwrap();
        assert_eq!(m.mrt, 1.5);
        assert_eq!(m.mjs, 1.0);
    }

    #[test]
    fn mean_over_jobs() {
        let w = Workload::new(vec![Task::new("a", "1", 0.0, 1.0), Task::new("b", "1", 0.0, 1.0)]).unwrap();
        let m = aggregate(&[rec(1, 0.0, 4.0), rec(0, 0.0, 2.0)], &w, 1.0).unwrap();
        assert_eq!(m.mrt, 3.0);
        assert_eq!(m.p50_r, 2.0);
        assert_eq!(m.p99_r, 4.0);
    }

    #[test]
    fn missing_record() {
        let w = Workload::new(vec![Task::new("a", "1", 0.0, 1.0), Task::new("b", "1", 0.0, 1.0)]).unwrap();
        assert!(matches!(
            aggregate(&[rec(0, 0.0, 1.0)], &w, 1.0),
            Err(Error::MissingRecord { task: 1 })
        ));
    }

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantile(&v, 0.5), 50.0);
        assert_eq!(quantile(&v, 0.9), 90.0);
        assert_eq!(quantile(&v, 0.99), 99.0);
        assert_eq!(quantile(&[7.0], 0.99), 7.0);
    }

    fn row(id: &str, theta: Option<f64>) -> SummaryRow {
        let m = MetricsSummary {
            mrt: 1.25,
            mjs: 1.0000000000000002,
            job_count: 3,
            task_count: 7,
            p50_r: 0.1,
            p90_r: 2.0,
            p99_r: 3.5,
            p50_s: 1.0,
            p90_s: 1.5,
            p99_s: 9.0,
            min_s: 1.0,
        };
        SummaryRow::new(id, "two_stage", "rr+rr", 20, 0.3, 0.6, theta, &m)
    }

    #[test]
    fn summary_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![row("a", Some(0.5)), row("b", None)];
        export_summary(&rows, &path).unwrap();
        assert_eq!(read_summary(&path).unwrap(), rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&SUMMARY_HEADER.join(",")));
    }

    #[test]
    fn append_writes_one_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        append_summary(&[row("a", None)], &path).unwrap();
        append_summary(&[row("b", None)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(read_summary(&path).unwrap().len(), 2);
    }

    #[test]
    fn empty_export_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        export_summary(&[], &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap().trim_end(),
            SUMMARY_HEADER.join(",")
        );
        assert!(read_summary(&path).unwrap().is_empty());
    }
}
