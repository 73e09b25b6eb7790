//! Request queue, power ledger and the three scheduling policies.
//!
//! * `BaselineFcfs` serves the oldest schedulable request, never paired.
//! * `MultiPartition` serves read-write conflicts with RWW pairs, reordering
//!   the queue to favour requests that have a write/read partner.
//! * `Palp` pairs both read-write and read-read conflicts, prefers requests
//!   with bank conflicts while the oldest request is young, and vetoes any
//!   pair whose estimated running-average power exceeds the RAPL limit.
//!
//! A request is *schedulable* at `now` when it has arrived and its bank is
//! not serving an earlier transaction.

mod policy;
mod power;
mod queue;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::request::MemoryRequest;
use crate::Cycle;

pub use policy::{select, select_fcfs, select_multipartition, select_palp};
pub use power::{estimate_pair_power, PowerLedger};
pub use queue::RwQueue;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("read-write queue is empty")]
    EmptyQueue,
    #[error("no queued request is schedulable at this cycle")]
    NothingSchedulable,
    #[error("read-write queue is full")]
    QueueFull,
    #[error("request {id} enqueued out of arrival order")]
    OutOfOrder { id: u64 },
    #[error("request targets unknown bank {bank}")]
    UnknownBank { bank: usize },
    #[error("request {id} is not in the queue")]
    NotQueued { id: u64 },
    #[error("invalid scheduler configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    BaselineFcfs,
    #[serde(alias = "multi_partition")]
    Multipartition,
    Palp,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::BaselineFcfs => "baseline_fcfs",
            Policy::Multipartition => "multipartition",
            Policy::Palp => "palp",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "baseline_fcfs" | "baseline" | "fcfs" => Ok(Policy::BaselineFcfs),
            "multipartition" | "multi_partition" => Ok(Policy::Multipartition),
            "palp" => Ok(Policy::Palp),
            other => Err(format!("unknown policy {other:?}")),
        }
    }
}

/// Unit in which the backlogging threshold is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeUnit {
    /// Memory cycles since enqueue.
    Cycles,
    /// Requests served by the controller since enqueue.
    BypassCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    pub policy: Policy,
    /// Backlogging (starvation) threshold.
    pub th_b: u64,
    pub th_b_unit: AgeUnit,
    /// pJ/access. Zero vetoes every pair with nonzero power.
    pub rapl_limit: f64,
    /// Apply the `th_b` guard to MultiPartition's reordering. When off,
    /// MultiPartition always favours pairable requests.
    pub multipartition_guard: bool,
    pub queue_capacity: Option<usize>,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            policy: Policy::Palp,
            th_b: 8,
            th_b_unit: AgeUnit::Cycles,
            rapl_limit: 0.3,
            multipartition_guard: true,
            queue_capacity: None,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        if !self.rapl_limit.is_finite() || self.rapl_limit < 0.0 {
            return Err(ScheduleError::InvalidConfig(format!(
                "rapl_limit must be a finite non-negative number, got {}",
                self.rapl_limit
            )));
        }
        if self.queue_capacity == Some(0) {
            return Err(ScheduleError::InvalidConfig("queue_capacity must be at least 1".into()));
        }
        Ok(())
    }

    /// Age of `r` in the configured unit.
    pub fn age(&self, r: &MemoryRequest, q: &RwQueue, now: Cycle) -> u64 {
        match self.th_b_unit {
            AgeUnit::Cycles => outstanding_age(r, now),
            AgeUnit::BypassCount => q.served().saturating_sub(r.served_at_enqueue),
        }
    }
}

/// Cycles `r` has spent in the queue.
pub fn outstanding_age(r: &MemoryRequest, now: Cycle) -> Cycle {
    now.saturating_sub(r.enqueue_cycle)
}

/// Per-bank release cycles as seen by the scheduler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BankOccupancy {
    busy_until: Vec<Cycle>,
}

impl BankOccupancy {
    pub fn new(banks: usize) -> Self {
        Self {
            busy_until: vec![0; banks],
        }
    }

    pub fn is_free(&self, bank: usize, now: Cycle) -> bool {
        self.busy_until[bank] <= now
    }

    pub fn busy_until(&self, bank: usize) -> Cycle {
        self.busy_until[bank]
    }

    pub fn occupy(&mut self, bank: usize, until: Cycle) {
        self.busy_until[bank] = until;
    }

    /// Earliest release strictly after `now`.
    pub fn next_release_after(&self, now: Cycle) -> Option<Cycle> {
        self.busy_until.iter().copied().filter(|&c| c > now).min()
    }

    pub fn len(&self) -> usize {
        self.busy_until.len()
    }

    pub fn is_empty(&self) -> bool {
        self.busy_until.is_empty()
    }
}
