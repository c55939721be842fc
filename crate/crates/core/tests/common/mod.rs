//! Direct-replay reference schedules for small instances.
//!
//! Each stage is replayed task by task in arrival order, tracking only the
//! instant every server frees up. No event queue is involved: a server is
//! idle for an arrival at `a` iff it frees up at or before `a`.

#![allow(dead_code)]

use dispatch_sim::policies::fallback_rng;
use dispatch_sim::{JiqFallback, MigrationMode, PolicyKind};
use rand::Rng;

/// Demand in GNCU-s to whole nanoseconds at `speed`, rounded half up.
pub fn ns(demand: f64, speed: f64) -> u64 {
    ((demand / speed) * 1e9 + 0.5).floor().max(1.0) as u64
}

pub fn secs_ns(s: f64) -> u64 {
    (s * 1e9 + 0.5).floor() as u64
}

/// Replays one FCFS stage. `jobs` are (arrival_ns, work_ns) in dispatch
/// order. Returns (server, start, end) per job.
pub fn replay_stage(
    jobs: &[(u64, u64)],
    n: usize,
    policy: PolicyKind,
    fallback: JiqFallback,
    seed: u64,
    stage: usize,
) -> Vec<(usize, u64, u64)> {
    let mut free_at = vec![0u64; n];
    let mut rr = 0usize;
    let mut jiq_rr = 0usize;
    let mut rng = fallback_rng(seed, stage);
    let mut out = Vec::with_capacity(jobs.len());
    for &(a, work) in jobs {
        let s = match policy {
            PolicyKind::Rr => {
                let s = rr;
                rr = (rr + 1) % n;
                s
            }
            PolicyKind::Jiq => match (0..n).find(|&s| free_at[s] <= a) {
                Some(s) => s,
                None => match fallback {
                    JiqFallback::Random => rng.random_range(0..n),
                    JiqFallback::RoundRobin => {
                        let s = jiq_rr;
                        jiq_rr = (jiq_rr + 1) % n;
                        s
                    }
                },
            },
            PolicyKind::Lwl => (0..n).min_by_key(|&s| (free_at[s].saturating_sub(a), s)).unwrap(),
        };
        let start = free_at[s].max(a);
        let end = start + work;
        free_at[s] = end;
        out.push((s, start, end));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expected {
    pub completion: u64,
    pub stage1_server: usize,
    pub stage2_server: Option<usize>,
}

/// Single-stage reference completions, indexed by task. Tasks must already
/// be in arrival order.
pub fn single_stage(
    arrivals: &[f64],
    demands: &[f64],
    n: usize,
    speed: f64,
    policy: PolicyKind,
    fallback: JiqFallback,
    seed: u64,
) -> Vec<Expected> {
    let jobs: Vec<(u64, u64)> = arrivals
        .iter()
        .zip(demands)
        .map(|(&a, &d)| (secs_ns(a), ns(d, speed)))
        .collect();
    replay_stage(&jobs, n, policy, fallback, seed, 0)
        .into_iter()
        .map(|(s, _, end)| Expected {
            completion: end,
            stage1_server: s,
            stage2_server: None,
        })
        .collect()
}

pub struct TwoStageCase<'a> {
    pub arrivals: &'a [f64],
    pub demands: &'a [f64],
    pub n1: usize,
    pub n2: usize,
    pub speed: f64,
    pub theta_s: f64,
    pub p1: PolicyKind,
    pub p2: PolicyKind,
    pub fallback: JiqFallback,
    pub mode: MigrationMode,
    pub seed: u64,
}

/// Two-stage reference: stage 1 sees min(X, theta) per task, stage 2 sees
/// the migrants ordered by (cutoff instant, task index).
pub fn two_stage(c: &TwoStageCase) -> Vec<Expected> {
    let theta = secs_ns(c.theta_s);
    let work: Vec<u64> = c.demands.iter().map(|&d| ns(d, c.speed)).collect();
    let s1_jobs: Vec<(u64, u64)> = c
        .arrivals
        .iter()
        .zip(&work)
        .map(|(&a, &x)| (secs_ns(a), x.min(theta)))
        .collect();
    let s1 = replay_stage(&s1_jobs, c.n1, c.p1, c.fallback, c.seed, 0);

    let mut migrants: Vec<(u64, usize)> = (0..work.len())
        .filter(|&i| work[i] > theta)
        .map(|i| (s1[i].2, i))
        .collect();
    migrants.sort();
    let s2_jobs: Vec<(u64, u64)> = migrants
        .iter()
        .map(|&(cut, i)| {
            let rem = match c.mode {
                MigrationMode::Resume => work[i] - theta,
                MigrationMode::Restart => work[i],
            };
            (cut, rem)
        })
        .collect();
    let s2 = replay_stage(&s2_jobs, c.n2, c.p2, c.fallback, c.seed, 1);

    let mut out: Vec<Expected> = s1
        .iter()
        .map(|&(s, _, end)| Expected {
            completion: end,
            stage1_server: s,
            stage2_server: None,
        })
        .collect();
    for (&(_, i), &(s, _, end)) in migrants.iter().zip(&s2) {
        out[i].completion = end;
        out[i].stage2_server = Some(s);
    }
    out
}

pub const POLICY_VARIANTS: [(PolicyKind, JiqFallback); 4] = [
    (PolicyKind::Rr, JiqFallback::Random),
    (PolicyKind::Jiq, JiqFallback::Random),
    (PolicyKind::Jiq, JiqFallback::RoundRobin),
    (PolicyKind::Lwl, JiqFallback::Random),
];

/// Every non-decreasing arrival sequence over `times` of length `k`.
pub fn arrival_sequences(times: &[f64], k: usize) -> Vec<Vec<f64>> {
    fn go(times: &[f64], k: usize, from: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in from..times.len() {
            cur.push(times[i]);
            go(times, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(times, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Every demand vector of length `k` over `values`.
pub fn demand_vectors(values: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|v| {
                values.iter().map(move |&d| {
                    let mut v = v.clone();
                    v.push(d);
                    v
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Default)]
pub struct BatteryReport {
    pub instances: usize,
    pub runs: usize,
    pub mismatches: Vec<String>,
}

fn check(out: &dispatch_sim::RunOutput, expected: &[Expected], what: &dyn Fn() -> String, report: &mut BatteryReport) {
    report.runs += 1;
    let mut got = vec![None; expected.len()];
    for r in &out.records {
        got[r.task] = Some(Expected {
            completion: r.completion.0,
            stage1_server: r.stage1_server.unwrap_or(usize::MAX),
            stage2_server: r.stage2_server,
        });
    }
    for (i, e) in expected.iter().enumerate() {
        if got[i] != Some(*e) {
            if report.mismatches.len() < 20 {
                report
                    .mismatches
                    .push(format!("{} task {i}: engine {:?}, oracle {:?}", what(), got[i], e));
            } else {
                report.mismatches.push(String::new());
            }
            return;
        }
    }
}

/// Exhaustive comparison against the direct replay: up to `max_tasks`
/// tasks, up to two servers per stage, every policy and both fallbacks,
/// both shapes and both migration modes.
pub fn run_battery(max_tasks: usize) -> BatteryReport {
    use dispatch_sim::{run, SystemConfig, Task, Workload};

    let times = [0.0, 0.5, 1.5];
    let sizes = [0.5, 1.0, 2.5];
    let thetas = [0.5, 1.0, 2.0];
    let speed = 1.0;
    let mut report = BatteryReport::default();
    let mut seed = 0u64;
    for k in 1..=max_tasks {
        for arrivals in arrival_sequences(&times, k) {
            for demands in demand_vectors(&sizes, k) {
                report.instances += 1;
                seed += 1;
                let tasks = arrivals
                    .iter()
                    .zip(&demands)
                    .enumerate()
                    .map(|(i, (&a, &d))| Task::new(format!("j{}", i / 2), format!("t{i}"), a, d))
                    .collect();
                let w = Workload::new(tasks).unwrap();

                for n in 1..=2 {
                    for (p, fb) in POLICY_VARIANTS {
                        let cfg = SystemConfig::single_stage(n, speed, p).with_jiq_fallback(fb);
                        let out = run(&w, &cfg, seed).unwrap();
                        let exp = single_stage(&arrivals, &demands, n, speed, p, fb, seed);
                        check(
                            &out,
                            &exp,
                            &|| format!("{arrivals:?} {demands:?} single n={n} {p}/{fb:?}"),
                            &mut report,
                        );
                    }
                }

                for n1 in 1..=2 {
                    for n2 in 1..=2 {
                        for (p1, fb1) in POLICY_VARIANTS {
                            for (p2, fb2) in POLICY_VARIANTS {
                                // one fallback per system; skip mixed pairs
                                if p1 == PolicyKind::Jiq && p2 == PolicyKind::Jiq && fb1 != fb2 {
                                    continue;
                                }
                                let fb = if p1 == PolicyKind::Jiq { fb1 } else { fb2 };
                                for &theta_s in &thetas {
                                    for mode in [MigrationMode::Resume, MigrationMode::Restart] {
                                        let mut cfg =
                                            SystemConfig::two_stage(n1 + n2, speed, theta_s).with_jiq_fallback(fb);
                                        cfg.n_stage1 = Some(n1);
                                        cfg.n_stage2 = Some(n2);
                                        cfg.stage1_policy = p1;
                                        cfg.stage2_policy = p2;
                                        cfg.migration = mode;
                                        let out = run(&w, &cfg, seed).unwrap();
                                        let exp = two_stage(&TwoStageCase {
                                            arrivals: &arrivals,
                                            demands: &demands,
                                            n1,
                                            n2,
                                            speed,
                                            theta_s,
                                            p1,
                                            p2,
                                            fallback: fb,
                                            mode,
                                            seed,
                                        });
                                        check(
                                            &out,
                                            &exp,
                                            &|| {
                                                format!(
                                                    "{arrivals:?} {demands:?} two-stage {n1}+{n2} {p1}/{p2} {fb:?} theta={theta_s} {mode:?}"
                                                )
                                            },
                                            &mut report,
                                        );
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    report
}
