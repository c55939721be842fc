//! Experiment harness: builds run grids under the fixed-budget rule
//! (per-server speed derived from the trace and the target load), runs them
//! in parallel, and writes result tables and plots.

mod plot;
mod spec;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

pub use plot::{line_chart, Series};
pub use spec::{
    read_synthetic_spec, ExperimentKind, ExperimentSpec, WorkloadConfig, WorkloadSource, DEFAULT_RHO0, N_GRID,
    RHO_GRID, THETA_GRID,
};

use crate::architecture::{Shape, SystemConfig};
use crate::engine::{run, validate_run, write_records_file, ValidationReport};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, export_summary, MetricsSummary, SummaryRow};
use crate::policies::{JiqFallback, PolicyKind};
use crate::workload::{compute_stats, derive_service_rate, offered_load, Workload, WorkloadStats};

/// One grid point: a fully specified system plus the load it was sized for.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPoint {
    pub kind: ExperimentKind,
    pub config: SystemConfig,
    pub rho: f64,
}

impl RunPoint {
    pub fn n(&self) -> usize {
        self.config.n_total
    }

    pub fn mu(&self) -> f64 {
        self.config.speed
    }

    pub fn theta_s(&self) -> Option<f64> {
        self.config.theta_s
    }

    pub fn shape(&self) -> Shape {
        self.config.shape
    }

    pub fn policy_label(&self) -> String {
        self.config.policy_label()
    }

    pub fn run_id(&self, seed: u64) -> String {
        let mut id = format!(
            "{}-{}-{}-n{}-rho{}",
            self.kind.as_str(),
            self.shape(),
            self.policy_label(),
            self.n(),
            self.rho
        );
        if let Some(t) = self.theta_s() {
            id.push_str(&format!("-theta{t}"));
        }
        id.push_str(&format!("-s{seed}"));
        id
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub point: RunPoint,
    pub seed: u64,
    pub summary: MetricsSummary,
    pub runtime: Duration,
    pub validation: ValidationReport,
    pub workload_digest: u64,
}

impl RunResult {
    pub fn summary_row(&self) -> SummaryRow {
        SummaryRow::new(
            self.point.run_id(self.seed),
            self.point.shape().as_str(),
            self.point.policy_label(),
            self.point.n(),
            self.point.mu(),
            self.point.rho,
            self.point.theta_s(),
            &self.summary,
        )
    }
}

/// Order-sensitive fingerprint of a workload, used to check that compared
/// runs consumed the same tasks.
pub fn workload_digest(w: &Workload) -> u64 {
    let mut h = DefaultHasher::new();
    for t in w.tasks() {
        t.job_id.hash(&mut h);
        t.task_id.hash(&mut h);
        t.arrival.to_bits().hash(&mut h);
        t.cpu_demand.to_bits().hash(&mut h);
    }
    h.finish()
}

fn single(n: usize, mu: f64, policy: PolicyKind, fallback: JiqFallback) -> SystemConfig {
    SystemConfig::single_stage(n, mu, policy).with_jiq_fallback(fallback)
}

/// Fixed `n0`, speed scaled so that each load in `rho_grid` is offered.
pub fn load_points(
    stats: &WorkloadStats,
    n0: usize,
    rho_grid: &[f64],
    policies: &[PolicyKind],
    fallback: JiqFallback,
) -> Result<Vec<RunPoint>> {
    let mut pts = Vec::new();
    for &rho in rho_grid {
        let mu = derive_service_rate(stats, n0, rho)?;
        for &p in policies {
            pts.push(RunPoint {
                kind: ExperimentKind::SweepLoad,
                config: single(n0, mu, p, fallback),
                rho,
            });
        }
    }
    Ok(pts)
}

/// Fixed load `rho0`, speed scaled with each server count so that the
/// total capacity N * mu stays constant.
pub fn server_points(
    stats: &WorkloadStats,
    rho0: f64,
    n_grid: &[usize],
    policies: &[PolicyKind],
    fallback: JiqFallback,
) -> Result<Vec<RunPoint>> {
    let mut pts = Vec::new();
    for &n in n_grid {
        let mu = derive_service_rate(stats, n, rho0)?;
        for &p in policies {
            pts.push(RunPoint {
                kind: ExperimentKind::SweepServers,
                config: single(n, mu, p, fallback),
                rho: rho0,
            });
        }
    }
    Ok(pts)
}

/// Two-stage systems with an equal split, one point per (N, theta).
pub fn theta_points(stats: &WorkloadStats, spec: &ExperimentSpec) -> Result<Vec<RunPoint>> {
    let mut pts = Vec::new();
    for &n in &spec.n_grid {
        let mu = derive_service_rate(stats, n, spec.rho0)?;
        for &theta in &spec.theta_grid {
            let mut cfg = SystemConfig::two_stage(n, mu, theta).with_jiq_fallback(spec.jiq_fallback);
            cfg.stage1_policy = spec.stage1_policy;
            cfg.stage2_policy = spec.stage2_policy;
            cfg.migration = spec.migration;
            cfg.stage_sizes()?;
            pts.push(RunPoint {
                kind: ExperimentKind::SweepTheta,
                config: cfg,
                rho: spec.rho0,
            });
        }
    }
    Ok(pts)
}

/// The grid an experiment visits for a workload with statistics `stats`.
pub fn grid_points(spec: &ExperimentSpec, stats: &WorkloadStats) -> Result<Vec<RunPoint>> {
    match spec.kind {
        ExperimentKind::SweepLoad => load_points(stats, spec.n0, &spec.rho_grid, &spec.policies, spec.jiq_fallback),
        ExperimentKind::SweepServers => {
            server_points(stats, spec.rho0, &spec.n_grid, &spec.policies, spec.jiq_fallback)
        }
        ExperimentKind::SweepTheta => theta_points(stats, spec),
        ExperimentKind::Compare => {
            let mut pts = server_points(stats, spec.rho0, &spec.n_grid, &spec.policies, spec.jiq_fallback)?;
            let even: Vec<usize> = spec.n_grid.iter().copied().filter(|n| n % 2 == 0).collect();
            let two = ExperimentSpec {
                n_grid: even,
                ..spec.clone()
            };
            pts.extend(theta_points(stats, &two)?);
            for p in &mut pts {
                p.kind = ExperimentKind::Compare;
            }
            Ok(pts)
        }
        ExperimentKind::SingleRun => {
            let mu = match spec.mu {
                Some(mu) => mu,
                None => derive_service_rate(stats, spec.n0, spec.rho0)?,
            };
            let mut cfg = match spec.shape {
                Shape::SingleStage => single(spec.n0, mu, spec.policies[0], spec.jiq_fallback),
                Shape::TwoStage => {
                    let theta = spec
                        .theta_s
                        .ok_or_else(|| Error::config("two-stage run needs --theta-s"))?;
                    SystemConfig::two_stage(spec.n0, mu, theta).with_jiq_fallback(spec.jiq_fallback)
                }
            };
            cfg.stage1_policy = spec.stage1_policy;
            cfg.stage2_policy = spec.stage2_policy;
            cfg.migration = spec.migration;
            cfg.stage_sizes()?;
            Ok(vec![RunPoint {
                kind: ExperimentKind::SingleRun,
                rho: offered_load(stats, spec.n0, mu),
                config: cfg,
            }])
        }
    }
}

/// Runs one point and refuses to return metrics for a run that fails
/// validation.
pub fn run_point(w: &Workload, point: &RunPoint, seed: u64, digest: u64) -> Result<RunResult> {
    let started = Instant::now();
    let out = run(w, &point.config, seed)?;
    let validation = validate_run(&out, w);
    if let Some(first) = validation.violations.first() {
        return Err(Error::Validation {
            count: validation.violations.len(),
            first: format!("{} ({first})", point.run_id(seed)),
        });
    }
    let summary = aggregate(&out.records, w, point.config.speed)?;
    let runtime = started.elapsed();
    log::debug!("{} done in {:.3?}", point.run_id(seed), runtime);
    Ok(RunResult {
        point: point.clone(),
        seed,
        summary,
        runtime,
        validation,
        workload_digest: digest,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// Runs every point on `w` with up to `workers` threads (0 = one per core).
/// Results come back in point order.
pub fn run_points(w: &Workload, points: &[RunPoint], seed: u64, workers: usize) -> Result<Vec<RunResult>> {
    let digest = workload_digest(w);
    pool(workers)?.install(|| points.par_iter().map(|p| run_point(w, p, seed, digest)).collect())
}

/// Mean (and, with several seeds, sample standard deviation) of one grid
/// point across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub shape: Shape,
    pub policy: String,
    pub n: usize,
    pub rho: f64,
    pub theta_s: Option<f64>,
    pub mrt_mean: f64,
    pub mjs_mean: f64,
    pub mrt_std: Option<f64>,
    pub mjs_std: Option<f64>,
    pub seeds: usize,
}

fn mean_std(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Merges per-seed result lists (each in the same grid order).
pub fn aggregate_seeds(per_seed: &[Vec<RunResult>]) -> Vec<AggregateRow> {
    let Some(first) = per_seed.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|i| {
            let p = &first[i].point;
            let mrt: Vec<f64> = per_seed.iter().map(|rs| rs[i].summary.mrt).collect();
            let mjs: Vec<f64> = per_seed.iter().map(|rs| rs[i].summary.mjs).collect();
            let (mrt_mean, mrt_std) = mean_std(&mrt);
            let (mjs_mean, mjs_std) = mean_std(&mjs);
            AggregateRow {
                shape: p.shape(),
                policy: p.policy_label(),
                n: p.n(),
                rho: p.rho,
                theta_s: p.theta_s(),
                mrt_mean,
                mjs_mean,
                mrt_std,
                mjs_std,
                seeds: per_seed.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedRow {
    pub rank: usize,
    pub row: AggregateRow,
}

/// Joins the single-stage and two-stage arms of a comparison, ranked by
/// mean response time. Both arms must have consumed the same workloads.
pub fn compare_arms(single: &[Vec<RunResult>], two: &[Vec<RunResult>]) -> Result<Vec<RankedRow>> {
    if single.len() != two.len() {
        return Err(Error::config("arms were run with different seed lists"));
    }
    for (a, b) in single.iter().zip(two) {
        let digests = a.iter().chain(b).map(|r| r.workload_digest);
        let mut digests = digests.collect::<Vec<_>>();
        digests.dedup();
        if digests.len() > 1 {
            return Err(Error::config("mismatched workloads between compared arms"));
        }
    }
    let mut rows = aggregate_seeds(single);
    rows.extend(aggregate_seeds(two));
    rows.sort_by(|a, b| a.mrt_mean.total_cmp(&b.mrt_mean));
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, row)| RankedRow { rank: i + 1, row })
        .collect())
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// One list per seed, each in grid order.
    pub per_seed: Vec<Vec<RunResult>>,
    pub aggregate: Vec<AggregateRow>,
    pub ranked: Vec<RankedRow>,
    pub files: Vec<PathBuf>,
}

/// Runs every seed of `spec` without writing anything.
pub fn execute(spec: &ExperimentSpec) -> Result<Vec<(Workload, Vec<RunResult>)>> {
    spec.validate()?;
    let source = spec.workload.source()?;
    let mut out = Vec::with_capacity(spec.seeds.len());
    for &seed in &spec.seeds {
        let w = source.materialize(seed)?;
        let stats = compute_stats(&w)?;
        let points = grid_points(spec, &stats)?;
        let started = Instant::now();
        let results = run_points(&w, &points, seed, spec.workers)?;
        log::info!(
            "{} seed {seed}: {} runs over {} tasks in {:.2?}",
            spec.kind.as_str(),
            results.len(),
            w.len(),
            started.elapsed()
        );
        out.push((w, results));
    }
    Ok(out)
}

/// Runs `spec` and writes its tables (and plots) under `spec.out`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let runs = execute(spec)?;
    std::fs::create_dir_all(&spec.out).map_err(|e| Error::io(&spec.out, e))?;
    let kind = spec.kind.as_str();
    let mut files = Vec::new();

    for (seed, (w, results)) in spec.seeds.iter().zip(&runs) {
        let path = spec.out.join(format!("{kind}_seed{seed}.csv"));
        let rows: Vec<SummaryRow> = results.iter().map(RunResult::summary_row).collect();
        export_summary(&rows, &path)?;
        files.push(path);
        if spec.kind == ExperimentKind::SingleRun {
            // re-run to recover the records; a single run is cheap
            let out = run(w, &results[0].point.config, *seed)?;
            let path = spec.out.join(format!("records_seed{seed}.csv"));
            write_records_file(&path, &out.records, w)?;
            files.push(path);
        }
    }

    let per_seed: Vec<Vec<RunResult>> = runs.into_iter().map(|(_, r)| r).collect();
    let aggregate = aggregate_seeds(&per_seed);
    let path = spec.out.join(format!("{kind}_aggregate.csv"));
    write_aggregate(&aggregate, &path)?;
    files.push(path);

    let mut ranked = Vec::new();
    if spec.kind == ExperimentKind::Compare {
        let (single, two): (Vec<Vec<RunResult>>, Vec<Vec<RunResult>>) = per_seed
            .iter()
            .map(|rs| rs.iter().cloned().partition(|r| r.point.shape() == Shape::SingleStage))
            .unzip();
        ranked = compare_arms(&single, &two)?;
        let path = spec.out.join("compare_ranked.csv");
        write_ranked(&ranked, &path)?;
        files.push(path);
    }

    if spec.plots {
        for (name, svg) in plots(spec.kind, &aggregate) {
            let path = spec.out.join(name);
            std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            files.push(path);
        }
    }

    Ok(ExperimentOutcome {
        per_seed,
        aggregate,
        ranked,
        files,
    })
}

fn aggregate_header(with_std: bool) -> Vec<&'static str> {
    let mut h = vec!["shape", "policy", "n", "rho", "theta_s", "mrt_mean_s", "mjs_mean"];
    if with_std {
        h.extend(["mrt_std_s", "mjs_std"]);
    }
    h.push("seeds");
    h
}

fn aggregate_fields(r: &AggregateRow, with_std: bool) -> Vec<String> {
    let mut f = vec![
        r.shape.to_string(),
        r.policy.clone(),
        r.n.to_string(),
        r.rho.to_string(),
        r.theta_s.map(|t| t.to_string()).unwrap_or_default(),
        r.mrt_mean.to_string(),
        r.mjs_mean.to_string(),
    ];
    if with_std {
        f.push(r.mrt_std.map(|x| x.to_string()).unwrap_or_default());
        f.push(r.mjs_std.map(|x| x.to_string()).unwrap_or_default());
    }
    f.push(r.seeds.to_string());
    f
}

/// Dispersion columns appear only when rows span more than one seed.
pub fn write_aggregate(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let with_std = rows.iter().any(|r| r.seeds > 1);
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(file);
    wtr.write_record(aggregate_header(with_std))?;
    for r in rows {
        wtr.write_record(aggregate_fields(r, with_std))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_ranked(rows: &[RankedRow], path: &Path) -> Result<()> {
    let with_std = rows.iter().any(|r| r.row.seeds > 1);
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(file);
    let mut header = vec!["rank"];
    header.extend(aggregate_header(with_std));
    wtr.write_record(header)?;
    for r in rows {
        let mut f = vec![r.rank.to_string()];
        f.extend(aggregate_fields(&r.row, with_std));
        wtr.write_record(f)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn series_by<F>(
    rows: &[AggregateRow],
    label: F,
    x: fn(&AggregateRow) -> f64,
    y: fn(&AggregateRow) -> f64,
) -> Vec<Series>
where
    F: Fn(&AggregateRow) -> String,
{
    let mut out: Vec<Series> = Vec::new();
    for r in rows {
        let name = label(r);
        let idx = match out.iter().position(|s| s.name == name) {
            Some(i) => i,
            None => {
                out.push(Series {
                    name,
                    points: Vec::new(),
                });
                out.len() - 1
            }
        };
        out[idx].points.push((x(r), y(r)));
    }
    out
}

fn plots(kind: ExperimentKind, rows: &[AggregateRow]) -> Vec<(String, String)> {
    let mrt = |r: &AggregateRow| r.mrt_mean;
    let mjs = |r: &AggregateRow| r.mjs_mean;
    let n = |r: &AggregateRow| r.n as f64;
    match kind {
        ExperimentKind::SweepLoad => {
            let s = series_by(rows, |r| r.policy.clone(), |r| r.rho, mrt);
            vec![(
                "sweep_load_mrt.svg".into(),
                line_chart("MRT vs load", "load", "MRT [s]", &s, false, true),
            )]
        }
        ExperimentKind::SweepServers => {
            let s = series_by(rows, |r| r.policy.clone(), n, mrt);
            let d = series_by(rows, |r| r.policy.clone(), n, mjs);
            vec![
                (
                    "sweep_servers_mrt.svg".into(),
                    line_chart("MRT vs servers", "servers N", "MRT [s]", &s, true, true),
                ),
                (
                    "sweep_servers_mjs.svg".into(),
                    line_chart("Slowdown vs servers", "servers N", "mean job slowdown", &d, true, true),
                ),
            ]
        }
        ExperimentKind::SweepTheta => {
            let s = series_by(rows, |r| format!("N={}", r.n), |r| r.theta_s.unwrap_or(f64::NAN), mrt);
            vec![(
                "sweep_theta_mrt.svg".into(),
                line_chart("Two-stage MRT vs threshold", "theta [s]", "MRT [s]", &s, true, true),
            )]
        }
        ExperimentKind::Compare => {
            let single: Vec<AggregateRow> = rows.iter().filter(|r| r.shape == Shape::SingleStage).cloned().collect();
            let mut s = series_by(&single, |r| r.policy.clone(), n, mrt);
            // best threshold per N for the two-stage arm
            let mut best: Vec<AggregateRow> = Vec::new();
            for r in rows.iter().filter(|r| r.shape == Shape::TwoStage) {
                match best.iter_mut().find(|b| b.n == r.n) {
                    Some(b) if r.mrt_mean < b.mrt_mean => *b = r.clone(),
                    Some(_) => {}
                    None => best.push(r.clone()),
                }
            }
            s.extend(series_by(&best, |_| "two-stage (best theta)".into(), n, mrt));
            vec![(
                "compare_mrt.svg".into(),
                line_chart("Single vs two-stage", "servers N", "MRT [s]", &s, true, true),
            )]
        }
        ExperimentKind::SingleRun => Vec::new(),
    }
}
