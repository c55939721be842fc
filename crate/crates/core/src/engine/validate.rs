use std::collections::HashMap;
use std::fmt;

use super::{service_time, RunOutput, ServiceInterval, SimTime};
use crate::architecture::MigrationMode;
use crate::workload::Workload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    DuplicateCompletion,
    MissingCompletion,
    CompletionNotAfterArrival,
    OverlappingService,
    FcfsOrder,
    IdleWithQueue,
    WorkConservation,
    ThresholdExceeded,
    StageWorkConservation,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::DuplicateCompletion => "duplicate completion",
            ViolationKind::MissingCompletion => "missing completion",
            ViolationKind::CompletionNotAfterArrival => "completion not after arrival",
            ViolationKind::OverlappingService => "overlapping service",
            ViolationKind::FcfsOrder => "fcfs order",
            ViolationKind::IdleWithQueue => "idle with queue",
            ViolationKind::WorkConservation => "work conservation",
            ViolationKind::ThresholdExceeded => "threshold exceeded",
            ViolationKind::StageWorkConservation => "stage work conservation",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, detail: String) {
        self.violations.push(Violation { kind, detail });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_clean() {
            return writeln!(f, "ok: no violations");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks a finished run against the workload it consumed: one record per
/// task, FCFS and non-overlapping service per server, no server idling with
/// queued work, busy time equal to service delivered, and the stage-1
/// threshold rules for two-stage runs.
pub fn validate_run(out: &RunOutput, w: &Workload) -> ValidationReport {
    let mut rep = ValidationReport::default();

    let mut seen = vec![0u32; w.len()];
    for r in &out.records {
        if r.task >= w.len() {
            rep.push(
                ViolationKind::MissingCompletion,
                format!("record for unknown task index {}", r.task),
            );
            continue;
        }
        seen[r.task] += 1;
        if seen[r.task] == 2 {
            let t = &w.tasks()[r.task];
            rep.push(
                ViolationKind::DuplicateCompletion,
                format!("task ({}, {}) completed more than once", t.job_id, t.task_id),
            );
        }
        if r.completion <= r.arrival {
            rep.push(
                ViolationKind::CompletionNotAfterArrival,
                format!(
                    "task index {} completes at {} but arrived at {}",
                    r.task, r.completion, r.arrival
                ),
            );
        }
    }
    for (task, &n) in seen.iter().enumerate() {
        if n == 0 {
            let t = &w.tasks()[task];
            rep.push(
                ViolationKind::MissingCompletion,
                format!("task ({}, {}) never completed", t.job_id, t.task_id),
            );
        }
    }

    let mut per_server: HashMap<(usize, usize), Vec<&ServiceInterval>> = HashMap::new();
    for iv in &out.intervals {
        per_server.entry((iv.stage, iv.server)).or_default().push(iv);
    }
    let mut served: HashMap<(usize, usize), u64> = HashMap::new();
    let mut keys: Vec<_> = per_server.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        let ivs = per_server.get_mut(&key).unwrap();
        ivs.sort_by_key(|iv| (iv.start, iv.end));
        let (stage, server) = key;
        let mut total = 0u64;
        let mut prev: Option<&ServiceInterval> = None;
        for iv in ivs.iter() {
            total += iv.end.0 - iv.start.0;
            if let Some(theta) = out.theta.filter(|_| stage == 0) {
                if iv.end.0 - iv.start.0 > theta.0 {
                    rep.push(
                        ViolationKind::ThresholdExceeded,
                        format!(
                            "task index {} held stage-1 server {server} beyond the threshold",
                            iv.task
                        ),
                    );
                }
            }
            match prev {
                None if iv.start != iv.enqueued => rep.push(
                    ViolationKind::IdleWithQueue,
                    format!("stage {stage} server {server} idled before its first task {}", iv.task),
                ),
                Some(p) => {
                    if iv.start < p.end {
                        rep.push(
                            ViolationKind::OverlappingService,
                            format!(
                                "stage {stage} server {server}: tasks {} and {} overlap",
                                p.task, iv.task
                            ),
                        );
                    }
                    if iv.enqueued < p.enqueued {
                        rep.push(
                            ViolationKind::FcfsOrder,
                            format!(
                                "stage {stage} server {server}: task {} overtook task {}",
                                iv.task, p.task
                            ),
                        );
                    }
                    if iv.start > p.end.max(iv.enqueued) {
                        rep.push(
                            ViolationKind::IdleWithQueue,
                            format!("stage {stage} server {server} idled while task {} waited", iv.task),
                        );
                    }
                }
                None => {}
            }
            prev = Some(iv);
        }
        served.insert(key, total);
    }
    for s in &out.servers {
        let delivered = served.get(&(s.stage, s.server)).copied().unwrap_or(0);
        if delivered != s.busy.0 {
            rep.push(
                ViolationKind::WorkConservation,
                format!(
                    "stage {} server {} busy {}ns but delivered {}ns",
                    s.stage, s.server, s.busy.0, delivered
                ),
            );
        }
    }

    let equal_speeds = out.stage_speeds.windows(2).all(|p| p[0] == p[1]);
    if out.theta.is_some() && out.migration == MigrationMode::Resume && equal_speeds {
        let speed = out.stage_speeds[0];
        for r in out.records.iter().filter(|r| r.migrated && r.task < w.len()) {
            let needed = service_time(w.tasks()[r.task].cpu_demand, speed).unwrap_or(SimTime::ZERO);
            if r.service_received != needed {
                rep.push(
                    ViolationKind::StageWorkConservation,
                    format!(
                        "migrated task index {} received {}ns, needs {}ns",
                        r.task, r.service_received.0, needed.0
                    ),
                );
            }
        }
    }
    rep
}
