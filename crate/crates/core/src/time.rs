//! Simulated time. Every timestamp in a run comes from here so that identical
//! seeds produce identical artifacts.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Epoch seconds.
pub type Timestamp = i64;

/// Closed interval `[start, end]` in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Window {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Window {
    pub fn new(start: Timestamp, end: Timestamp) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, ts: Timestamp) -> bool {
        ts >= self.start && ts <= self.end
    }

    pub fn overlaps(&self, other: &Window) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn is_ordered(&self) -> bool {
        self.start <= self.end
    }

    pub fn duration(&self) -> i64 {
        self.end - self.start
    }

    /// Smallest window covering both.
    pub fn union(&self, other: &Window) -> Window {
        Window::new(self.start.min(other.start), self.end.max(other.end))
    }
}

/// Monotonic simulated clock shared by the agents of one run.
#[derive(Debug, Clone)]
pub struct SimClock {
    now: Arc<AtomicI64>,
}

impl SimClock {
    pub fn starting_at(ts: Timestamp) -> Self {
        Self {
            now: Arc::new(AtomicI64::new(ts)),
        }
    }

    pub fn now(&self) -> Timestamp {
        self.now.load(Ordering::SeqCst)
    }

    /// Moves the clock forward; never backwards.
    pub fn advance_to(&self, ts: Timestamp) {
        self.now.fetch_max(ts, Ordering::SeqCst);
    }

    pub fn advance_by(&self, secs: i64) -> Timestamp {
        self.now.fetch_add(secs, Ordering::SeqCst) + secs
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self::starting_at(0)
    }
}
