//! Deterministic discrete-event core. One run replays a workload through a
//! [`System`](crate::architecture::System) until every task has completed.

mod calendar;
mod time;
mod validate;

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

pub use calendar::{Calendar, Event, EventKind, ServerId};
pub use time::{service_time, SimTime};
pub use validate::{validate_run, ValidationReport, Violation, ViolationKind};

use crate::architecture::{build_system, stage1_serve, MigrationMode, Stage1Outcome, System, SystemConfig};
use crate::error::{Error, Result};
use crate::workload::Workload;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Queued {
    task: usize,
    /// Service still owed at this server's speed.
    work: SimTime,
    enqueued: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct InService {
    task: usize,
    start: SimTime,
    occupancy: SimTime,
    enqueued: SimTime,
}

/// One FCFS server. It is never idle while its own queue is non-empty.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub id: ServerId,
    queue: VecDeque<Queued>,
    in_service: Option<InService>,
    busy: SimTime,
}

impl ServerState {
    pub fn new(id: ServerId) -> Self {
        ServerState {
            id,
            queue: VecDeque::new(),
            in_service: None,
            busy: SimTime::ZERO,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.in_service.is_none()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn busy_time(&self) -> SimTime {
        self.busy
    }
}

/// Per-task outcome of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompletionRecord {
    /// Index of the task in the workload.
    pub task: usize,
    pub arrival: SimTime,
    /// The serving server for single-stage systems.
    pub stage1_server: Option<usize>,
    pub stage2_server: Option<usize>,
    pub migrated: bool,
    pub completion: SimTime,
    /// Service received at stage 1.
    pub stage1_service: SimTime,
    /// Service received across all stages.
    pub service_received: SimTime,
}

/// A contiguous stretch during which `server` of `stage` served `task`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceInterval {
    pub stage: usize,
    pub server: ServerId,
    pub task: usize,
    pub enqueued: SimTime,
    pub start: SimTime,
    pub end: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServerUsage {
    pub stage: usize,
    pub server: ServerId,
    pub busy: SimTime,
}

/// Everything a run produces. Records are sorted by (completion, task).
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<CompletionRecord>,
    pub intervals: Vec<ServiceInterval>,
    pub servers: Vec<ServerUsage>,
    pub final_time: SimTime,
    pub stage_speeds: Vec<f64>,
    pub theta: Option<SimTime>,
    pub migration: MigrationMode,
}

#[derive(Debug, Clone, Copy, Default)]
struct TaskState {
    stage1_server: Option<usize>,
    stage2_server: Option<usize>,
    migrated: bool,
    stage1_service: SimTime,
    service: SimTime,
    /// Stage-2 work owed after a cutoff.
    carry: SimTime,
    completion: Option<SimTime>,
}

struct Run<'a> {
    w: &'a Workload,
    sys: System,
    cal: Calendar,
    arrivals: Vec<SimTime>,
    stage1_work: Vec<SimTime>,
    tasks: Vec<TaskState>,
    intervals: Vec<ServiceInterval>,
}

/// Runs `w` through the system described by `cfg` to drain. `seed` feeds
/// randomized policy fallbacks only; identical inputs give identical output.
pub fn run(w: &Workload, cfg: &SystemConfig, seed: u64) -> Result<RunOutput> {
    if w.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let sys = build_system(cfg, seed)?;
    let speed1 = sys.stages[0].speed;
    let arrivals = w
        .tasks()
        .iter()
        .map(|t| SimTime::from_secs(t.arrival))
        .collect::<Result<Vec<_>>>()?;
    let stage1_work = w
        .tasks()
        .iter()
        .map(|t| service_time(t.cpu_demand, speed1))
        .collect::<Result<Vec<_>>>()?;

    let mut r = Run {
        w,
        sys,
        cal: Calendar::new(),
        arrivals,
        stage1_work,
        tasks: vec![TaskState::default(); w.len()],
        intervals: Vec::with_capacity(w.len()),
    };
    r.cal.schedule(r.arrivals[0], EventKind::TaskArrival { task: 0 });
    let mut now = SimTime::ZERO;
    while let Some(ev) = r.cal.pop() {
        now = ev.time;
        match ev.kind {
            EventKind::TaskArrival { task } => r.on_arrival(now, task)?,
            EventKind::ServiceCompletion { stage, server } => r.on_completion(now, stage, server)?,
            EventKind::StageCutoff { server } => r.on_cutoff(now, server)?,
            EventKind::MigrationArrival { task } => r.on_migration(now, task)?,
        }
    }
    r.finish(now)
}

impl Run<'_> {
    fn on_arrival(&mut self, now: SimTime, task: usize) -> Result<()> {
        if task + 1 < self.arrivals.len() {
            self.cal
                .schedule(self.arrivals[task + 1], EventKind::TaskArrival { task: task + 1 });
        }
        let work = self.stage1_work[task];
        let occupancy = match self.sys.theta {
            Some(theta) => work.min(theta),
            None => work,
        };
        let server = self.sys.stages[0].dispatcher.dispatch(now, occupancy);
        self.tasks[task].stage1_server = Some(server);
        self.enqueue(now, 0, server, task, work)
    }

    fn on_migration(&mut self, now: SimTime, task: usize) -> Result<()> {
        let work = self.tasks[task].carry;
        let server = self.sys.stages[1].dispatcher.dispatch(now, work);
        self.tasks[task].stage2_server = Some(server);
        self.enqueue(now, 1, server, task, work)
    }

    fn on_completion(&mut self, now: SimTime, stage: usize, server: ServerId) -> Result<()> {
        let done = self.end_service(now, stage, server);
        let st = &mut self.tasks[done.task];
        if stage == 0 {
            st.stage1_service = done.occupancy;
        }
        st.service = SimTime(st.service.0 + done.occupancy.0);
        st.completion = Some(now);
        self.start_next(now, stage, server)
    }

    fn on_cutoff(&mut self, now: SimTime, server: ServerId) -> Result<()> {
        let done = self.end_service(now, 0, server);
        let t = &self.w.tasks()[done.task];
        let outcome = stage1_serve(
            self.stage1_work[done.task],
            t.cpu_demand,
            self.sys.theta.expect("cutoff without threshold"),
            self.sys.migration,
            self.sys.stages[0].speed,
            self.sys.stages[1].speed,
        )?;
        let Stage1Outcome::Migrated { remaining, .. } = outcome else {
            unreachable!("cutoff scheduled for a task that fits the threshold");
        };
        let st = &mut self.tasks[done.task];
        st.migrated = true;
        st.stage1_service = done.occupancy;
        st.service = done.occupancy;
        st.carry = remaining;
        self.cal.schedule(now, EventKind::MigrationArrival { task: done.task });
        self.start_next(now, 0, server)
    }

    fn end_service(&mut self, now: SimTime, stage: usize, server: ServerId) -> InService {
        let s = &mut self.sys.stages[stage].servers[server];
        let done = s.in_service.take().expect("completion on an idle server");
        debug_assert_eq!(done.start.0 + done.occupancy.0, now.0);
        s.busy = SimTime(s.busy.0 + done.occupancy.0);
        self.intervals.push(ServiceInterval {
            stage,
            server,
            task: done.task,
            enqueued: done.enqueued,
            start: done.start,
            end: now,
        });
        done
    }

    fn enqueue(&mut self, now: SimTime, stage: usize, server: ServerId, task: usize, work: SimTime) -> Result<()> {
        let q = Queued {
            task,
            work,
            enqueued: now,
        };
        if self.sys.stages[stage].servers[server].is_idle() {
            self.start(now, stage, server, q)
        } else {
            self.sys.stages[stage].servers[server].queue.push_back(q);
            Ok(())
        }
    }

    fn start_next(&mut self, now: SimTime, stage: usize, server: ServerId) -> Result<()> {
        match self.sys.stages[stage].servers[server].queue.pop_front() {
            Some(q) => self.start(now, stage, server, q),
            None => {
                self.sys.stages[stage].dispatcher.notify_idle(server);
                Ok(())
            }
        }
    }

    fn start(&mut self, now: SimTime, stage: usize, server: ServerId, q: Queued) -> Result<()> {
        let (occupancy, kind) = match (stage, self.sys.theta) {
            (0, Some(theta)) if q.work > theta => (theta, EventKind::StageCutoff { server }),
            _ => (q.work, EventKind::ServiceCompletion { stage, server }),
        };
        let end = now.checked_add(occupancy)?;
        self.sys.stages[stage].servers[server].in_service = Some(InService {
            task: q.task,
            start: now,
            occupancy,
            enqueued: q.enqueued,
        });
        self.cal.schedule(end, kind);
        Ok(())
    }

    fn finish(self, final_time: SimTime) -> Result<RunOutput> {
        let mut records = Vec::with_capacity(self.tasks.len());
        for (task, st) in self.tasks.iter().enumerate() {
            let completion = st.completion.ok_or(Error::MissingRecord { task })?;
            records.push(CompletionRecord {
                task,
                arrival: self.arrivals[task],
                stage1_server: st.stage1_server,
                stage2_server: st.stage2_server,
                migrated: st.migrated,
                completion,
                stage1_service: st.stage1_service,
                service_received: st.service,
            });
        }
        records.sort_by_key(|r| (r.completion, r.task));
        let servers = self
            .sys
            .stages
            .iter()
            .enumerate()
            .flat_map(|(stage, st)| {
                st.servers.iter().map(move |s| ServerUsage {
                    stage,
                    server: s.id,
                    busy: s.busy,
                })
            })
            .collect();
        Ok(RunOutput {
            records,
            intervals: self.intervals,
            servers,
            final_time,
            stage_speeds: self.sys.stages.iter().map(|s| s.speed).collect(),
            theta: self.sys.theta,
            migration: self.sys.migration,
        })
    }
}

pub const RECORDS_HEADER: [&str; 7] = [
    "job_id",
    "task_id",
    "arrival_s",
    "completion_s",
    "migrated",
    "stage1_server",
    "stage2_server",
];

/// Writes completion records as CSV in record order.
pub fn write_records<W: Write>(out: W, records: &[CompletionRecord], w: &Workload) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(RECORDS_HEADER)?;
    let opt = |v: Option<usize>| v.map(|s| s.to_string()).unwrap_or_default();
    for r in records {
        let t = &w.tasks()[r.task];
        wtr.write_record([
            t.job_id.clone(),
            t.task_id.clone(),
            r.arrival.as_secs().to_string(),
            r.completion.as_secs().to_string(),
            r.migrated.to_string(),
            opt(r.stage1_server),
            opt(r.stage2_server),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_records_file(path: &Path, records: &[CompletionRecord], w: &Workload) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(std::io::BufWriter::new(file), records, w)
}
