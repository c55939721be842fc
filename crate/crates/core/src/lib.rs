//! Trace-driven discrete-event simulation of multi-server dispatching.
//!
//! A [`Workload`](workload::Workload) of tasks is replayed through either a
//! single pool of FCFS servers behind one dispatcher (Round Robin,
//! Join-Idle-Queue or Least-Work-Left) or a two-stage system where stage 1
//! serves each task for at most a threshold `theta` and forwards the rest to
//! stage 2. Per-server speed is derived from a fixed compute budget, and
//! results are reported as job-level mean response time and mean slowdown.

pub mod architecture;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod policies;
pub mod workload;

pub use architecture::{MigrationMode, Shape, SystemConfig};
pub use engine::{run, validate_run, CompletionRecord, RunOutput, SimTime};
pub use error::{Error, Result};
pub use metrics::{aggregate, MetricsSummary};
pub use policies::{JiqFallback, PolicyKind};
pub use workload::{
    compute_stats, derive_service_rate, generate_synthetic, load_trace, SyntheticSpec, Task, Workload, WorkloadStats,
};
