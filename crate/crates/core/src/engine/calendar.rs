use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::SimTime;

/// Index of a server inside one stage.
pub type ServerId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    ServiceCompletion { stage: usize, server: ServerId },
    StageCutoff { server: ServerId },
    MigrationArrival { task: usize },
    TaskArrival { task: usize },
}

impl EventKind {
    /// Completions and cutoffs drain before arrivals at the same instant.
    fn priority(&self) -> u8 {
        match self {
            EventKind::ServiceCompletion { .. } | EventKind::StageCutoff { .. } => 0,
            EventKind::MigrationArrival { .. } => 1,
            EventKind::TaskArrival { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub time: SimTime,
    priority: u8,
    pub seq: u64,
    pub kind: EventKind,
}

/// Min-heap of events keyed by (time, kind priority, seq).
///
/// Arrival-class events use the task index as `seq`, so simultaneous
/// arrivals (and simultaneous migrations) are handled in task order.
/// Other events take a monotone counter.
#[derive(Debug, Default)]
pub struct Calendar {
    heap: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
}

impl Calendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, time: SimTime, kind: EventKind) {
        let seq = match kind {
            EventKind::TaskArrival { task } | EventKind::MigrationArrival { task } => task as u64,
            _ => {
                self.next_seq += 1;
                self.next_seq
            }
        };
        self.heap.push(Reverse(Event {
            time,
            priority: kind.priority(),
            seq,
            kind,
        }));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
