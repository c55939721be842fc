//! System shapes: a single pool of N FCFS servers behind one dispatcher, or
//! two pools where stage 1 serves each task for at most `theta` seconds and
//! hands the rest over to stage 2.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{service_time, ServerState, SimTime};
use crate::error::{Error, Result};
use crate::policies::{fallback_rng, Dispatcher, JiqFallback, PolicyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    #[default]
    SingleStage,
    TwoStage,
}

impl Shape {
    pub fn as_str(self) -> &'static str {
        match self {
            Shape::SingleStage => "single_stage",
            Shape::TwoStage => "two_stage",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "single_stage" | "single" => Ok(Shape::SingleStage),
            "two_stage" | "two" => Ok(Shape::TwoStage),
            other => Err(Error::config(format!("unknown shape `{other}`"))),
        }
    }
}

/// What a task carries to stage 2 once it has used up its stage-1 slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MigrationMode {
    /// Only the unserved remainder of its demand.
    #[default]
    Resume,
    /// Its full demand; stage-1 service is lost.
    Restart,
}

impl FromStr for MigrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "resume" => Ok(MigrationMode::Resume),
            "restart" => Ok(MigrationMode::Restart),
            other => Err(Error::config(format!("unknown migration mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub shape: Shape,
    pub n_total: usize,
    /// Two-stage only; defaults to an equal split of `n_total`.
    pub n_stage1: Option<usize>,
    pub n_stage2: Option<usize>,
    /// Per-server speed in GNCU (stage-1 speed for two-stage systems).
    pub speed: f64,
    /// Stage-2 speed; defaults to `speed`.
    pub stage2_speed: Option<f64>,
    pub theta_s: Option<f64>,
    pub single_policy: PolicyKind,
    pub stage1_policy: PolicyKind,
    pub stage2_policy: PolicyKind,
    pub migration: MigrationMode,
    pub jiq_fallback: JiqFallback,
}

impl SystemConfig {
    pub fn single_stage(n: usize, speed: f64, policy: PolicyKind) -> Self {
        SystemConfig {
            shape: Shape::SingleStage,
            n_total: n,
            n_stage1: None,
            n_stage2: None,
            speed,
            stage2_speed: None,
            theta_s: None,
            single_policy: policy,
            stage1_policy: PolicyKind::Rr,
            stage2_policy: PolicyKind::Rr,
            migration: MigrationMode::Resume,
            jiq_fallback: JiqFallback::Random,
        }
    }

    /// Equal split, RR at both stages, resume migration.
    pub fn two_stage(n: usize, speed: f64, theta_s: f64) -> Self {
        SystemConfig {
            shape: Shape::TwoStage,
            theta_s: Some(theta_s),
            ..Self::single_stage(n, speed, PolicyKind::Rr)
        }
    }

    pub fn with_jiq_fallback(mut self, fallback: JiqFallback) -> Self {
        self.jiq_fallback = fallback;
        self
    }

    /// Server counts per stage after validation.
    pub fn stage_sizes(&self) -> Result<Vec<usize>> {
        let pos = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{what} must be positive, got {v}")))
            }
        };
        pos(self.speed, "server speed")?;
        if self.n_total == 0 {
            return Err(Error::config("system needs at least one server"));
        }
        match self.shape {
            Shape::SingleStage => Ok(vec![self.n_total]),
            Shape::TwoStage => {
                let theta = self
                    .theta_s
                    .ok_or_else(|| Error::config("two-stage system needs a threshold theta_s"))?;
                pos(theta, "threshold theta_s")?;
                if let Some(s2) = self.stage2_speed {
                    pos(s2, "stage-2 speed")?;
                }
                let (n1, n2) = match (self.n_stage1, self.n_stage2) {
                    (None, None) => {
                        if !self.n_total.is_multiple_of(2) {
                            return Err(Error::config(format!(
                                "equal two-stage split needs an even server count, got {}",
                                self.n_total
                            )));
                        }
                        (self.n_total / 2, self.n_total / 2)
                    }
                    (Some(a), None) => (a, self.n_total.saturating_sub(a)),
                    (None, Some(b)) => (self.n_total.saturating_sub(b), b),
                    (Some(a), Some(b)) => (a, b),
                };
                if n1 + n2 != self.n_total {
                    return Err(Error::config(format!(
                        "stage sizes {n1} + {n2} do not add up to {}",
                        self.n_total
                    )));
                }
                if n1 == 0 || n2 == 0 {
                    return Err(Error::config("every stage needs at least one server"));
                }
                Ok(vec![n1, n2])
            }
        }
    }

    pub fn stage_speeds(&self) -> Vec<f64> {
        match self.shape {
            Shape::SingleStage => vec![self.speed],
            Shape::TwoStage => vec![self.speed, self.stage2_speed.unwrap_or(self.speed)],
        }
    }

    pub fn stage_policies(&self) -> Vec<PolicyKind> {
        match self.shape {
            Shape::SingleStage => vec![self.single_policy],
            Shape::TwoStage => vec![self.stage1_policy, self.stage2_policy],
        }
    }

    /// Label used in result tables: the single-stage policy, or
    /// `<stage1>+<stage2>` for two-stage systems.
    pub fn policy_label(&self) -> String {
        match self.shape {
            Shape::SingleStage => self.single_policy.to_string(),
            Shape::TwoStage => format!("{}+{}", self.stage1_policy, self.stage2_policy),
        }
    }
}

/// One pool of identical servers and its dispatcher.
#[derive(Debug)]
pub struct Stage {
    pub speed: f64,
    pub servers: Vec<ServerState>,
    pub dispatcher: Dispatcher,
}

/// Runnable wiring for one simulation run.
#[derive(Debug)]
pub struct System {
    pub stages: Vec<Stage>,
    pub theta: Option<SimTime>,
    pub migration: MigrationMode,
}

pub fn build_system(cfg: &SystemConfig, seed: u64) -> Result<System> {
    let sizes = cfg.stage_sizes()?;
    let stages = sizes
        .iter()
        .zip(cfg.stage_speeds())
        .zip(cfg.stage_policies())
        .enumerate()
        .map(|(i, ((&n, speed), policy))| Stage {
            speed,
            servers: (0..n).map(ServerState::new).collect(),
            dispatcher: Dispatcher::new(policy, n, cfg.jiq_fallback, fallback_rng(seed, i)),
        })
        .collect();
    let theta = match cfg.shape {
        Shape::SingleStage => None,
        Shape::TwoStage => Some(SimTime::from_secs(cfg.theta_s.unwrap_or_default())?),
    };
    Ok(System {
        stages,
        theta,
        migration: cfg.migration,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage1Outcome {
    /// Finished within the threshold; the server was held for `occupancy`.
    Completed { occupancy: SimTime },
    /// Cut off after `occupancy` (= theta); `remaining` is the stage-2
    /// service time still owed.
    Migrated { occupancy: SimTime, remaining: SimTime },
}

impl Stage1Outcome {
    pub fn occupancy(&self) -> SimTime {
        match *self {
            Stage1Outcome::Completed { occupancy } | Stage1Outcome::Migrated { occupancy, .. } => occupancy,
        }
    }
}

/// Applies the stage-1 threshold to a task needing `work` of service at
/// stage-1 speed. A task with `work == theta` completes at stage 1.
///
/// With equal stage speeds the resumed remainder is `work - theta` exactly;
/// otherwise the leftover demand is re-timed at the stage-2 speed.
pub fn stage1_serve(
    work: SimTime,
    cpu_demand: f64,
    theta: SimTime,
    mode: MigrationMode,
    stage1_speed: f64,
    stage2_speed: f64,
) -> Result<Stage1Outcome> {
    if work <= theta {
        return Ok(Stage1Outcome::Completed { occupancy: work });
    }
    let remaining = match mode {
        MigrationMode::Resume if stage1_speed == stage2_speed => SimTime(work.0 - theta.0),
        MigrationMode::Resume => {
            let left = cpu_demand - theta.as_secs() * stage1_speed;
            service_time(left.max(0.0), stage2_speed)?
        }
        MigrationMode::Restart => service_time(cpu_demand, stage2_speed)?,
    };
    Ok(Stage1Outcome::Migrated {
        occupancy: theta,
        remaining,
    })
}
