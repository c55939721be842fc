use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::architecture::{MigrationMode, Shape};
use crate::error::{Error, Result};
use crate::policies::{JiqFallback, PolicyKind};
use crate::workload::{generate_synthetic, load_trace, SyntheticSpec, TraceFormat, Workload};

/// Threshold grid used by the two-stage sweeps, in seconds.
pub const THETA_GRID: [f64; 10] = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 75.0, 100.0, 200.0];
pub const RHO_GRID: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];
pub const N_GRID: [usize; 9] = [2, 5, 10, 20, 50, 100, 200, 500, 1000];
pub const DEFAULT_RHO0: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    SingleRun,
    SweepLoad,
    SweepServers,
    SweepTheta,
    Compare,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::SingleRun => "single_run",
            ExperimentKind::SweepLoad => "sweep_load",
            ExperimentKind::SweepServers => "sweep_servers",
            ExperimentKind::SweepTheta => "sweep_theta",
            ExperimentKind::Compare => "compare",
        }
    }
}

/// Where the tasks come from. Exactly one of `trace`, `synthetic` or
/// `synthetic_file` must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub trace: Option<PathBuf>,
    pub format: TraceFormat,
    pub synthetic: Option<SyntheticSpec>,
    pub synthetic_file: Option<PathBuf>,
    pub time_scale: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            trace: None,
            format: TraceFormat::Csv,
            synthetic: None,
            synthetic_file: None,
            time_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadSource {
    Trace {
        path: PathBuf,
        format: TraceFormat,
        time_scale: f64,
    },
    Synthetic {
        spec: SyntheticSpec,
        time_scale: f64,
    },
}

impl WorkloadConfig {
    pub fn source(&self) -> Result<WorkloadSource> {
        let chosen = [
            self.trace.is_some(),
            self.synthetic.is_some(),
            self.synthetic_file.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if chosen != 1 {
            return Err(Error::config(
                "exactly one workload source is required (--trace or --synthetic)",
            ));
        }
        if let Some(path) = &self.trace {
            return Ok(WorkloadSource::Trace {
                path: path.clone(),
                format: self.format,
                time_scale: self.time_scale,
            });
        }
        let spec = match (&self.synthetic, &self.synthetic_file) {
            (Some(s), _) => *s,
            (None, Some(p)) => read_synthetic_spec(p)?,
            (None, None) => unreachable!(),
        };
        spec.validate()?;
        Ok(WorkloadSource::Synthetic {
            spec,
            time_scale: self.time_scale,
        })
    }
}

pub fn read_synthetic_spec(path: &Path) -> Result<SyntheticSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SyntheticSpec::from_toml(&text)
}

impl WorkloadSource {
    /// Workload for replication `seed`. Synthetic workloads are regenerated
    /// with seed `spec.seed + seed`; traces ignore it.
    pub fn materialize(&self, seed: u64) -> Result<Workload> {
        match self {
            WorkloadSource::Trace {
                path,
                format,
                time_scale,
            } => load_trace(path, *format, *time_scale),
            WorkloadSource::Synthetic { spec, time_scale } => {
                let spec = SyntheticSpec {
                    seed: spec.seed.wrapping_add(seed),
                    ..*spec
                };
                let w = generate_synthetic(&spec)?;
                if *time_scale == 1.0 {
                    Ok(w)
                } else {
                    w.time_scaled(*time_scale)
                }
            }
        }
    }
}

/// A full experiment description, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub workload: WorkloadConfig,
    /// Loads visited by `sweep_load`.
    pub rho_grid: Vec<f64>,
    /// Server counts visited by `sweep_servers`, `sweep_theta` and `compare`.
    pub n_grid: Vec<usize>,
    /// Thresholds visited by `sweep_theta` and `compare`.
    pub theta_grid: Vec<f64>,
    /// Fixed server count for `sweep_load` and `single_run`.
    pub n0: usize,
    /// Fixed load for everything except `sweep_load`.
    pub rho0: f64,
    pub policies: Vec<PolicyKind>,
    /// Shape for `single_run`.
    pub shape: Shape,
    /// Threshold for a two-stage `single_run`.
    pub theta_s: Option<f64>,
    /// Explicit per-server speed for `single_run`, bypassing `rho0`.
    pub mu: Option<f64>,
    pub stage1_policy: PolicyKind,
    pub stage2_policy: PolicyKind,
    pub jiq_fallback: JiqFallback,
    pub migration: MigrationMode,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub workers: usize,
    pub plots: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            kind: ExperimentKind::SingleRun,
            workload: WorkloadConfig::default(),
            rho_grid: RHO_GRID.to_vec(),
            n_grid: N_GRID.to_vec(),
            theta_grid: THETA_GRID.to_vec(),
            n0: 50,
            rho0: DEFAULT_RHO0,
            policies: PolicyKind::ALL.to_vec(),
            shape: Shape::SingleStage,
            theta_s: None,
            mu: None,
            stage1_policy: PolicyKind::Rr,
            stage2_policy: PolicyKind::Rr,
            jiq_fallback: JiqFallback::Random,
            migration: MigrationMode::Resume,
            seeds: vec![1, 2, 3],
            out: PathBuf::from("results"),
            workers: 0,
            plots: true,
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.policies.is_empty() && !matches!(self.kind, ExperimentKind::SweepTheta) {
            return Err(Error::config("at least one policy is required"));
        }
        let open_unit = |r: f64| r > 0.0 && r < 1.0;
        match self.kind {
            ExperimentKind::SweepLoad => {
                if self.rho_grid.is_empty() {
                    return Err(Error::config("load grid is empty"));
                }
                if let Some(r) = self.rho_grid.iter().find(|r| !open_unit(**r)) {
                    return Err(Error::config(format!("load {r} outside (0, 1)")));
                }
                if self.n0 == 0 {
                    return Err(Error::config("n0 must be at least 1"));
                }
            }
            ExperimentKind::SweepServers | ExperimentKind::SweepTheta | ExperimentKind::Compare => {
                if self.n_grid.is_empty() {
                    return Err(Error::config("server grid is empty"));
                }
                if self.n_grid.contains(&0) {
                    return Err(Error::config("server counts must be at least 1"));
                }
                if !open_unit(self.rho0) {
                    return Err(Error::config(format!("rho0 {} outside (0, 1)", self.rho0)));
                }
                if matches!(self.kind, ExperimentKind::SweepTheta | ExperimentKind::Compare) {
                    if self.theta_grid.is_empty() {
                        return Err(Error::config("threshold grid is empty"));
                    }
                    if let Some(t) = self.theta_grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
                        return Err(Error::config(format!("threshold {t} must be positive")));
                    }
                }
            }
            ExperimentKind::SingleRun => {
                if self.n0 == 0 {
                    return Err(Error::config("n0 must be at least 1"));
                }
                if self.mu.is_none() && !open_unit(self.rho0) {
                    return Err(Error::config(format!("rho0 {} outside (0, 1)", self.rho0)));
                }
            }
        }
        Ok(())
    }
}
