use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dispatch_sim::architecture::{MigrationMode, Shape};
use dispatch_sim::engine::{run, validate_run};
use dispatch_sim::experiments::{self, read_synthetic_spec, ExperimentKind, ExperimentSpec};
use dispatch_sim::metrics::aggregate;
use dispatch_sim::policies::{JiqFallback, PolicyKind};
use dispatch_sim::workload::{compute_stats, generate_synthetic, write_trace};
use dispatch_sim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "dispatch-sim",
    version,
    about = "Multi-server dispatching and two-stage threshold simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One run; writes per-task records and a summary row.
    Simulate(Common),
    /// MRT vs load at a fixed server count.
    SweepLoad(Common),
    /// MRT and slowdown vs server count under a fixed compute budget.
    SweepServers(Common),
    /// Two-stage MRT vs threshold for each server count.
    SweepTheta(Common),
    /// Single-stage policies against two-stage systems, ranked by MRT.
    Compare(Common),
    /// Write a synthetic trace CSV.
    Generate(GenerateArgs),
    /// Run once and report engine validation violations.
    Validate(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace CSV (`job_id,task_id,arrival_s,cpu_gncu_s`).
    #[arg(long, conflicts_with = "synthetic")]
    trace: Option<PathBuf>,
    /// TOML synthetic workload spec.
    #[arg(long)]
    synthetic: Option<PathBuf>,
    /// Dispatching policies (rr, jiq, lwl), comma separated.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<PolicyKind>,
    #[arg(long)]
    shape: Option<Shape>,
    /// Server count (simulate, sweep-load) or server grid (other sweeps).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Fixed load used to derive per-server speed.
    #[arg(long)]
    rho0: Option<f64>,
    /// Load grid for sweep-load.
    #[arg(long, value_delimiter = ',')]
    rho: Vec<f64>,
    /// Stage-1 threshold in seconds (grid for sweep-theta and compare).
    #[arg(long = "theta-s", value_delimiter = ',')]
    theta_s: Vec<f64>,
    /// Explicit per-server speed for simulate/validate, bypassing --rho0.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Multiplier applied to trace arrival times.
    #[arg(long = "time-scale")]
    time_scale: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long = "jiq-fallback")]
    jiq_fallback: Option<JiqFallback>,
    #[arg(long)]
    migration: Option<MigrationMode>,
    #[arg(long = "stage1-policy")]
    stage1_policy: Option<PolicyKind>,
    #[arg(long = "stage2-policy")]
    stage2_policy: Option<PolicyKind>,
    /// Skip SVG output.
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    synthetic: PathBuf,
    /// Output trace CSV.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the synthetic workload seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the synthetic task count.
    #[arg(long)]
    tasks: Option<usize>,
}

fn build_spec(kind: ExperimentKind, c: &Common) -> Result<ExperimentSpec> {
    let mut spec = match &c.config {
        Some(path) => ExperimentSpec::from_file(path)?,
        None => ExperimentSpec::default(),
    };
    spec.kind = kind;
    if let Some(t) = &c.trace {
        spec.workload.trace = Some(t.clone());
        spec.workload.synthetic = None;
        spec.workload.synthetic_file = None;
    }
    if let Some(s) = &c.synthetic {
        spec.workload.synthetic_file = Some(s.clone());
        spec.workload.synthetic = None;
        spec.workload.trace = None;
    }
    if let Some(ts) = c.time_scale {
        spec.workload.time_scale = ts;
    }
    if !c.policy.is_empty() {
        spec.policies = c.policy.clone();
    }
    if let Some(shape) = c.shape {
        spec.shape = shape;
    }
    if !c.n.is_empty() {
        match kind {
            ExperimentKind::SingleRun | ExperimentKind::SweepLoad => {
                if c.n.len() > 1 {
                    return Err(Error::Config(format!("{} takes a single --n", kind.as_str())));
                }
                spec.n0 = c.n[0];
            }
            _ => spec.n_grid = c.n.clone(),
        }
    }
    if let Some(r) = c.rho0 {
        spec.rho0 = r;
    }
    if !c.rho.is_empty() {
        spec.rho_grid = c.rho.clone();
    }
    if !c.theta_s.is_empty() {
        match kind {
            ExperimentKind::SingleRun => {
                if c.theta_s.len() > 1 {
                    return Err(Error::Config("simulate takes a single --theta-s".into()));
                }
                spec.theta_s = Some(c.theta_s[0]);
            }
            _ => spec.theta_grid = c.theta_s.clone(),
        }
    }
    if c.mu.is_some() {
        spec.mu = c.mu;
    }
    if !c.seeds.is_empty() {
        spec.seeds = c.seeds.clone();
    }
    if let Some(o) = &c.out {
        spec.out = o.clone();
    }
    if let Some(w) = c.workers {
        spec.workers = w;
    }
    if let Some(f) = c.jiq_fallback {
        spec.jiq_fallback = f;
    }
    if let Some(m) = c.migration {
        spec.migration = m;
    }
    if let Some(p) = c.stage1_policy {
        spec.stage1_policy = p;
    }
    if let Some(p) = c.stage2_policy {
        spec.stage2_policy = p;
    }
    if c.no_plots {
        spec.plots = false;
    }
    Ok(spec)
}

fn run_sweep(kind: ExperimentKind, c: &Common) -> Result<()> {
    let spec = build_spec(kind, c)?;
    let outcome = experiments::run_experiment(&spec)?;
    for row in &outcome.aggregate {
        let theta = row.theta_s.map(|t| format!(" theta={t}")).unwrap_or_default();
        println!(
            "{} {} n={} rho={}{theta}: mrt={:.6} mjs={:.6}",
            row.shape, row.policy, row.n, row.rho, row.mrt_mean, row.mjs_mean
        );
    }
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn validate(c: &Common) -> Result<()> {
    let spec = build_spec(ExperimentKind::SingleRun, c)?;
    spec.validate()?;
    let source = spec.workload.source()?;
    let mut violations = 0;
    for &seed in &spec.seeds {
        let w = source.materialize(seed)?;
        let stats = compute_stats(&w)?;
        let point = experiments::grid_points(&spec, &stats)?.remove(0);
        let out = run(&w, &point.config, seed)?;
        let report = validate_run(&out, &w);
        println!("{} ({} tasks, {} jobs)", point.run_id(seed), w.len(), w.job_count());
        print!("{report}");
        if report.is_clean() {
            let m = aggregate(&out.records, &w, point.config.speed)?;
            println!("mrt={} mjs={}", m.mrt, m.mjs);
        }
        violations += report.violations.len();
    }
    if violations > 0 {
        return Err(Error::Validation {
            count: violations,
            first: "see report above".into(),
        });
    }
    Ok(())
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let mut spec = read_synthetic_spec(&a.synthetic)?;
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(n) = a.tasks {
        spec.total_tasks = n;
    }
    let w = generate_synthetic(&spec)?;
    write_trace(&w, &a.out)?;
    eprintln!(
        "wrote {} tasks in {} jobs to {}",
        w.len(),
        w.job_count(),
        a.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate(c) => run_sweep(ExperimentKind::SingleRun, c),
        Command::SweepLoad(c) => run_sweep(ExperimentKind::SweepLoad, c),
        Command::SweepServers(c) => run_sweep(ExperimentKind::SweepServers, c),
        Command::SweepTheta(c) => run_sweep(ExperimentKind::SweepTheta, c),
        Command::Compare(c) => run_sweep(ExperimentKind::Compare, c),
        Command::Generate(a) => generate(a),
        Command::Validate(c) => validate(c),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
