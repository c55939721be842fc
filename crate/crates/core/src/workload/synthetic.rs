use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use super::{Task, Workload};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalProcess {
    Poisson { rate: f64 },
    Deterministic { interval: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizeDistribution {
    Exponential { mean: f64 },
    BoundedPareto { alpha: f64, lower: f64, upper: f64 },
    Deterministic { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TasksPerJob {
    Fixed {
        k: u32,
    },
    /// Geometric on {1, 2, ...} with the given mean (>= 1).
    Geometric {
        mean: f64,
    },
}

/// Recipe for a desk-scale synthetic trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub arrival: ArrivalProcess,
    pub size: SizeDistribution,
    pub tasks_per_job: TasksPerJob,
    pub total_tasks: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Heavy-tailed stand-in for a production cluster day: Poisson arrivals,
    /// bounded-Pareto(1.5) demands spanning four decades, geometric jobs of
    /// mean five tasks.
    pub fn heavy_tailed(total_tasks: usize, seed: u64) -> Self {
        SyntheticSpec {
            arrival: ArrivalProcess::Poisson { rate: 5.0 },
            size: SizeDistribution::BoundedPareto {
                alpha: 1.5,
                lower: 1.0,
                upper: 1.0e4,
            },
            tasks_per_job: TasksPerJob::Geometric { mean: 5.0 },
            total_tasks,
            seed,
        }
    }

    /// Parses and validates a spec written in the config-file syntax.
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SyntheticSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{what} must be positive, got {v}")))
            }
        };
        match self.arrival {
            ArrivalProcess::Poisson { rate } => pos(rate, "poisson rate")?,
            ArrivalProcess::Deterministic { interval } => pos(interval, "arrival interval")?,
        }
        match self.size {
            SizeDistribution::Exponential { mean } => pos(mean, "exponential mean")?,
            SizeDistribution::Deterministic { value } => pos(value, "deterministic size")?,
            SizeDistribution::BoundedPareto { alpha, lower, upper } => {
                pos(alpha, "pareto alpha")?;
                pos(lower, "pareto lower bound")?;
                pos(upper, "pareto upper bound")?;
                if lower >= upper {
                    return Err(Error::config(format!(
                        "pareto lower bound {lower} must be below upper bound {upper}"
                    )));
                }
            }
        }
        match self.tasks_per_job {
            TasksPerJob::Fixed { k: 0 } => return Err(Error::config("tasks per job must be positive")),
            TasksPerJob::Geometric { mean } if !(mean.is_finite() && mean >= 1.0) => {
                return Err(Error::config(format!(
                    "geometric tasks-per-job mean must be >= 1, got {mean}"
                )))
            }
            _ => {}
        }
        if self.total_tasks == 0 {
            return Err(Error::config("total_tasks must be positive"));
        }
        Ok(())
    }

    /// Mean demand of the size distribution (GNCU-seconds).
    pub fn mean_size(&self) -> f64 {
        match self.size {
            SizeDistribution::Exponential { mean } => mean,
            SizeDistribution::Deterministic { value } => value,
            SizeDistribution::BoundedPareto { alpha, lower, upper } => {
                let r = lower / upper;
                if (alpha - 1.0).abs() < 1e-12 {
                    lower * (upper / lower).ln() / (1.0 - r)
                } else {
                    lower * alpha / (alpha - 1.0) * (1.0 - r.powf(alpha - 1.0)) / (1.0 - r.powf(alpha))
                }
            }
        }
    }
}

/// Inverse-CDF draw from a bounded Pareto on [lower, upper].
fn bounded_pareto(u: f64, alpha: f64, lower: f64, upper: f64) -> f64 {
    let tail = 1.0 - (lower / upper).powf(alpha);
    let x = lower * (1.0 - u * tail).powf(-1.0 / alpha);
    x.clamp(lower, upper)
}

/// Deterministic in `spec` (seed included). The first task arrives at 0.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Workload> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.total_tasks;

    let mut arrivals = Vec::with_capacity(n);
    let mut t = 0.0f64;
    let gap = match spec.arrival {
        ArrivalProcess::Poisson { rate } => Some(Exp::new(rate).map_err(|e| Error::config(e.to_string()))?),
        ArrivalProcess::Deterministic { .. } => None,
    };
    for i in 0..n {
        if i > 0 {
            t = match (spec.arrival, &gap) {
                (_, Some(exp)) => t + exp.sample(&mut rng),
                (ArrivalProcess::Deterministic { interval }, None) => i as f64 * interval,
                _ => unreachable!(),
            };
        }
        arrivals.push(t);
    }

    let exp_size = match spec.size {
        SizeDistribution::Exponential { mean } => Some(Exp::new(1.0 / mean).map_err(|e| Error::config(e.to_string()))?),
        _ => None,
    };
    let mut demand = || -> f64 {
        match spec.size {
            SizeDistribution::Deterministic { value } => value,
            SizeDistribution::Exponential { .. } => loop {
                // Exp can return exactly zero; demands must be positive.
                let x = exp_size.as_ref().unwrap().sample(&mut rng);
                if x > 0.0 {
                    break x;
                }
            },
            SizeDistribution::BoundedPareto { alpha, lower, upper } => {
                bounded_pareto(rng.random::<f64>(), alpha, lower, upper)
            }
        }
    };
    let demands: Vec<f64> = (0..n).map(|_| demand()).collect();

    let job_len = match spec.tasks_per_job {
        TasksPerJob::Geometric { mean } => Some(Geometric::new(1.0 / mean).map_err(|e| Error::config(e.to_string()))?),
        TasksPerJob::Fixed { .. } => None,
    };
    let mut tasks = Vec::with_capacity(n);
    let mut job = 0usize;
    while tasks.len() < n {
        let k = match (spec.tasks_per_job, &job_len) {
            (TasksPerJob::Fixed { k }, _) => k as usize,
            (_, Some(g)) => 1 + g.sample(&mut rng) as usize,
            _ => unreachable!(),
        };
        for i in 0..k.min(n - tasks.len()) {
            let idx = tasks.len();
            tasks.push(Task::new(
                format!("j{job}"),
                format!("t{i}"),
                arrivals[idx],
                demands[idx],
            ));
        }
        job += 1;
    }
    Workload::new(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::compute_stats;

    fn det(total: usize) -> SyntheticSpec {
        SyntheticSpec {
            arrival: ArrivalProcess::Deterministic { interval: 1.0 },
            size: SizeDistribution::Deterministic { value: 0.5 },
            tasks_per_job: TasksPerJob::Fixed { k: 1 },
            total_tasks: total,
            seed: 0,
        }
    }

    #[test]
    fn fully_deterministic() {
        let w = generate_synthetic(&det(3)).unwrap();
        let a: Vec<f64> = w.tasks().iter().map(|t| t.arrival).collect();
        let d: Vec<f64> = w.tasks().iter().map(|t| t.cpu_demand).collect();
        assert_eq!(a, vec![0.0, 1.0, 2.0]);
        assert_eq!(d, vec![0.5, 0.5, 0.5]);
        assert_eq!(w.job_count(), 3);
    }

    #[test]
    fn same_seed_same_workload() {
        let spec = SyntheticSpec::heavy_tailed(5000, 42);
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let other = SyntheticSpec { seed: 43, ..spec };
        assert_ne!(generate_synthetic(&spec).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn poisson_rate_law_of_large_numbers() {
        let spec = SyntheticSpec {
            arrival: ArrivalProcess::Poisson { rate: 2.0 },
            total_tasks: 100_000,
            seed: 7,
            ..det(1)
        };
        let s = compute_stats(&generate_synthetic(&spec).unwrap()).unwrap();
        assert!((s.lambda - 2.0).abs() / 2.0 < 0.02, "lambda {}", s.lambda);
    }

    #[test]
    fn pareto_is_bounded_and_has_expected_mean() {
        let spec = SyntheticSpec {
            size: SizeDistribution::BoundedPareto {
                alpha: 1.5,
                lower: 1.0,
                upper: 100.0,
            },
            total_tasks: 200_000,
            seed: 3,
            ..det(1)
        };
        let w = generate_synthetic(&spec).unwrap();
        assert!(w.tasks().iter().all(|t| (1.0..=100.0).contains(&t.cpu_demand)));
        let mean = compute_stats(&w).unwrap().mean_cpu_demand;
        // closed form: 3 * (1 - 0.1) / (1 - 0.001)
        let expected = 3.0 * 0.9 / 0.999;
        assert!((mean - expected).abs() / expected < 0.02, "{mean} vs {expected}");
        assert!((spec.mean_size() - expected).abs() < 1e-12);
    }

    #[test]
    fn geometric_jobs_group_consecutive_tasks() {
        let spec = SyntheticSpec {
            tasks_per_job: TasksPerJob::Geometric { mean: 5.0 },
            total_tasks: 50_000,
            seed: 11,
            ..det(1)
        };
        let w = generate_synthetic(&spec).unwrap();
        let mean = w.len() as f64 / w.job_count() as f64;
        assert!((mean - 5.0).abs() < 0.2, "{mean}");
        // job indices never decrease along arrival order
        assert!((1..w.len()).all(|i| w.job_of(i) >= w.job_of(i - 1)));
    }

    #[test]
    fn rejects_invalid_specs() {
        let bad = [
            SyntheticSpec {
                total_tasks: 0,
                ..det(1)
            },
            SyntheticSpec {
                arrival: ArrivalProcess::Poisson { rate: 0.0 },
                ..det(1)
            },
            SyntheticSpec {
                size: SizeDistribution::BoundedPareto {
                    alpha: 1.5,
                    lower: 2.0,
                    upper: 2.0,
                },
                ..det(1)
            },
            SyntheticSpec {
                tasks_per_job: TasksPerJob::Geometric { mean: 0.5 },
                ..det(1)
            },
        ];
        for spec in bad {
            assert!(generate_synthetic(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            total_tasks = 10
            seed = 5
            [arrival]
            kind = "poisson"
            rate = 2.0
            [size]
            kind = "bounded_pareto"
            alpha = 1.5
            lower = 1.0
            upper = 10000.0
            [tasks_per_job]
            kind = "geometric"
            mean = 5.0
        "#;
        let spec: SyntheticSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.arrival, ArrivalProcess::Poisson { rate: 2.0 });
        let again: SyntheticSpec = toml::from_str(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, again);
    }
}
