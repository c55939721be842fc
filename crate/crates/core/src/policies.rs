//! Dispatching policies: each keeps its own state and picks a server for an
//! arriving task; the engine reports idleness and committed work back.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Round Robin.
    Rr,
    /// Join-Idle-Queue.
    Jiq,
    /// Least-Work-Left.
    Lwl,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Rr, PolicyKind::Jiq, PolicyKind::Lwl];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Rr => "rr",
            PolicyKind::Jiq => "jiq",
            PolicyKind::Lwl => "lwl",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rr" => Ok(PolicyKind::Rr),
            "jiq" => Ok(PolicyKind::Jiq),
            "lwl" => Ok(PolicyKind::Lwl),
            other => Err(Error::Config(format!(
                "unknown policy `{other}` (expected rr, jiq or lwl)"
            ))),
        }
    }
}

/// What JIQ does when no server is known to be idle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JiqFallback {
    #[default]
    Random,
    RoundRobin,
}

impl FromStr for JiqFallback {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(JiqFallback::Random),
            "round_robin" | "rr" => Ok(JiqFallback::RoundRobin),
            other => Err(Error::Config(format!(
                "unknown jiq fallback `{other}` (expected random or round_robin)"
            ))),
        }
    }
}

/// Seeded generator for the JIQ random fallback of `stage` in a run seeded
/// with `seed`. Stages draw from independent streams.
pub fn fallback_rng(seed: u64, stage: usize) -> ChaCha8Rng {
    let salt = (stage as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ChaCha8Rng::seed_from_u64(seed ^ salt)
}

#[derive(Debug, Clone)]
pub struct RoundRobin {
    next: usize,
    n: usize,
}

impl RoundRobin {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "round robin over zero servers");
        RoundRobin { next: 0, n }
    }

    pub fn next_index(&self) -> usize {
        self.next
    }

    pub fn select(&mut self) -> usize {
        let chosen = self.next;
        self.next = (self.next + 1) % self.n;
        chosen
    }
}

#[derive(Debug, Clone)]
pub struct Jiq {
    idle: BTreeSet<usize>,
    fallback: JiqFallback,
    rng: ChaCha8Rng,
    cursor: RoundRobin,
    n: usize,
}

impl Jiq {
    /// Every server starts idle.
    pub fn new(n: usize, fallback: JiqFallback, rng: ChaCha8Rng) -> Self {
        Self::with_idle(n, 0..n, fallback, rng)
    }

    pub fn with_idle(n: usize, idle: impl IntoIterator<Item = usize>, fallback: JiqFallback, rng: ChaCha8Rng) -> Self {
        let idle: BTreeSet<usize> = idle.into_iter().collect();
        assert!(idle.iter().all(|&s| s < n), "idle server out of range");
        Jiq {
            idle,
            fallback,
            rng,
            cursor: RoundRobin::new(n),
            n,
        }
    }

    pub fn idle_set(&self) -> &BTreeSet<usize> {
        &self.idle
    }

    /// Lowest-index idle server, removed from the idle set; falls back to
    /// uniform random or an internal cursor when none is idle.
    pub fn select(&mut self) -> usize {
        if let Some(s) = self.idle.pop_first() {
            return s;
        }
        match self.fallback {
            JiqFallback::Random => self.rng.random_range(0..self.n),
            JiqFallback::RoundRobin => self.cursor.select(),
        }
    }

    /// Idempotent.
    pub fn notify_idle(&mut self, server: usize) {
        debug_assert!(server < self.n);
        self.idle.insert(server);
    }
}

/// Tracks, per server, the instant its committed FCFS work runs out; the
/// backlog at `now` is what remains of that.
#[derive(Debug, Clone)]
pub struct Lwl {
    committed_until: Vec<SimTime>,
}

impl Lwl {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "least-work-left over zero servers");
        Lwl {
            committed_until: vec![SimTime::ZERO; n],
        }
    }

    /// State whose backlog at `now` equals `backlog`.
    pub fn from_backlog(now: SimTime, backlog: &[SimTime]) -> Self {
        assert!(!backlog.is_empty(), "least-work-left over zero servers");
        Lwl {
            committed_until: backlog.iter().map(|b| SimTime(now.0 + b.0)).collect(),
        }
    }

    pub fn backlog(&self, now: SimTime) -> Vec<SimTime> {
        self.committed_until.iter().map(|c| c.saturating_sub(now)).collect()
    }

    /// Server with the least unfinished work at `now`, lowest index on ties.
    pub fn select(&self, now: SimTime) -> usize {
        let mut best = 0;
        let mut best_work = self.committed_until[0].saturating_sub(now);
        for (i, c) in self.committed_until.iter().enumerate().skip(1) {
            let w = c.saturating_sub(now);
            if w < best_work {
                best = i;
                best_work = w;
                if w == SimTime::ZERO {
                    break;
                }
            } else if best_work == SimTime::ZERO {
                break;
            }
        }
        best
    }

    /// Adds `work` to `server`'s backlog at `now`.
    pub fn assign(&mut self, now: SimTime, server: usize, work: SimTime) {
        let c = &mut self.committed_until[server];
        *c = SimTime((*c).max(now).0 + work.0);
    }
}

/// Per-stage dispatcher state owned by one simulation run.
// one per stage, so the unboxed JIQ variant is fine
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum Dispatcher {
    RoundRobin(RoundRobin),
    Jiq(Jiq),
    Lwl(Lwl),
}

impl Dispatcher {
    pub fn new(kind: PolicyKind, n: usize, fallback: JiqFallback, rng: ChaCha8Rng) -> Self {
        match kind {
            PolicyKind::Rr => Dispatcher::RoundRobin(RoundRobin::new(n)),
            PolicyKind::Jiq => Dispatcher::Jiq(Jiq::new(n, fallback, rng)),
            PolicyKind::Lwl => Dispatcher::Lwl(Lwl::new(n)),
        }
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            Dispatcher::RoundRobin(_) => PolicyKind::Rr,
            Dispatcher::Jiq(_) => PolicyKind::Jiq,
            Dispatcher::Lwl(_) => PolicyKind::Lwl,
        }
    }

    /// Picks a server for a task that will occupy it for `work`.
    pub fn dispatch(&mut self, now: SimTime, work: SimTime) -> usize {
        match self {
            Dispatcher::RoundRobin(rr) => rr.select(),
            Dispatcher::Jiq(jiq) => jiq.select(),
            Dispatcher::Lwl(lwl) => {
                let s = lwl.select(now);
                lwl.assign(now, s, work);
                s
            }
        }
    }

    /// Called when `server` finishes its last queued task.
    pub fn notify_idle(&mut self, server: usize) {
        if let Dispatcher::Jiq(jiq) = self {
            jiq.notify_idle(server);
        }
    }
}
