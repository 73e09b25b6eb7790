//! Per-run metrics and the report the CLI writes.
//!
//! Queuing delay is `schedule - enqueue`; access latency is
//! `complete - enqueue`. Power figures are in pJ/access.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::request::{AccessKind, PairKind};
use crate::scheduler::PowerLedger;
use crate::trace::ConflictHistogram;
use crate::Cycle;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("request {id}: timestamps must satisfy enqueue <= schedule <= complete, got {enqueue}/{schedule}/{complete}")]
    InconsistentTimestamps {
        id: u64,
        enqueue: Cycle,
        schedule: Cycle,
        complete: Cycle,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub id: u64,
    pub kind: AccessKind,
    pub enqueue_cycle: Cycle,
    pub schedule_cycle: Cycle,
    pub complete_cycle: Cycle,
    pub paired: PairKind,
}

impl RequestOutcome {
    pub fn queuing_delay(&self) -> Cycle {
        self.schedule_cycle - self.enqueue_cycle
    }

    pub fn access_latency(&self) -> Cycle {
        self.complete_cycle - self.enqueue_cycle
    }
}

/// Running aggregates of one run, or of several disjoint runs after
/// [`StatsAccumulator::merge`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatsAccumulator {
    requests: u64,
    reads: u64,
    writes: u64,
    sum_queuing: u128,
    max_queuing: Cycle,
    sum_access: u128,
    max_access: Cycle,
    last_complete: Cycle,
    bank_busy_cycles: u64,
    pairs_rww: u64,
    pairs_rwr: u64,
    singles: u64,
    conflicts: ConflictHistogram,
    avg_power: f64,
    peak_power: f64,
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, o: &RequestOutcome) -> Result<(), StatsError> {
        if !(o.enqueue_cycle <= o.schedule_cycle && o.schedule_cycle <= o.complete_cycle) {
            return Err(StatsError::InconsistentTimestamps {
                id: o.id,
                enqueue: o.enqueue_cycle,
                schedule: o.schedule_cycle,
                complete: o.complete_cycle,
            });
        }
        self.requests += 1;
        match o.kind {
            AccessKind::Read => self.reads += 1,
            AccessKind::Write => self.writes += 1,
        }
        let (q, a) = (o.queuing_delay(), o.access_latency());
        self.sum_queuing += q as u128;
        self.sum_access += a as u128;
        self.max_queuing = self.max_queuing.max(q);
        self.max_access = self.max_access.max(a);
        self.last_complete = self.last_complete.max(o.complete_cycle);
        Ok(())
    }

    /// Counts one bank transaction.
    pub fn record_transaction(&mut self, kind: PairKind, service_cycles: Cycle) {
        self.bank_busy_cycles += service_cycles;
        match kind {
            PairKind::RwwPair => self.pairs_rww += 1,
            PairKind::RwrPair => self.pairs_rwr += 1,
            PairKind::None => self.singles += 1,
        }
    }

    pub fn set_power(&mut self, ledger: &PowerLedger) {
        self.avg_power = ledger.p;
        self.peak_power = ledger.peak;
    }

    pub fn set_conflicts(&mut self, h: ConflictHistogram) {
        self.conflicts = h;
    }

    pub fn requests(&self) -> u64 {
        self.requests
    }

    /// Combines disjoint runs. Average power becomes the request-weighted
    /// mean, peak the maximum.
    pub fn merge(&mut self, other: &StatsAccumulator) {
        let total = self.requests + other.requests;
        if total > 0 {
            self.avg_power =
                (self.avg_power * self.requests as f64 + other.avg_power * other.requests as f64) / total as f64;
        }
        self.requests = total;
        self.reads += other.reads;
        self.writes += other.writes;
        self.sum_queuing += other.sum_queuing;
        self.sum_access += other.sum_access;
        self.max_queuing = self.max_queuing.max(other.max_queuing);
        self.max_access = self.max_access.max(other.max_access);
        self.last_complete = self.last_complete.max(other.last_complete);
        self.bank_busy_cycles += other.bank_busy_cycles;
        self.pairs_rww += other.pairs_rww;
        self.pairs_rwr += other.pairs_rwr;
        self.singles += other.singles;
        self.conflicts.merge(&other.conflicts);
        self.peak_power = self.peak_power.max(other.peak_power);
    }

    pub fn finalize(&self, meta: ReportMeta) -> RunReport {
        let avg = |sum: u128| {
            if self.requests == 0 {
                0.0
            } else {
                sum as f64 / self.requests as f64
            }
        };
        RunReport {
            policy: meta.policy,
            requests: self.requests,
            reads: self.reads,
            writes: self.writes,
            truncated: meta.truncated,
            total_cycles: self.last_complete,
            total_time_us: if meta.clock_mhz > 0.0 {
                self.last_complete as f64 / meta.clock_mhz
            } else {
                0.0
            },
            bank_busy_cycles: self.bank_busy_cycles,
            avg_queuing_delay: avg(self.sum_queuing),
            max_queuing_delay: self.max_queuing,
            avg_access_latency: avg(self.sum_access),
            max_access_latency: self.max_access,
            pairs_rww: self.pairs_rww,
            pairs_rwr: self.pairs_rwr,
            singles: self.singles,
            conflicts_rr: self.conflicts.rr,
            conflicts_rw: self.conflicts.rw,
            conflicts_ww: self.conflicts.ww,
            conflicts_none: self.conflicts.none,
            avg_power: self.avg_power,
            peak_power: self.peak_power,
            rapl_limit: meta.rapl_limit,
            th_b: meta.th_b,
            config: meta.config,
        }
    }
}

/// Run-level facts the accumulator does not see.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub policy: String,
    pub rapl_limit: f64,
    pub th_b: u64,
    pub clock_mhz: f64,
    pub truncated: bool,
    pub config: serde_json::Value,
}

/// Final metrics of one run. Field order is the JSON key order and the CSV
/// column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub policy: String,
    pub requests: u64,
    pub reads: u64,
    pub writes: u64,
    /// The run hit its cycle budget before draining the queue.
    pub truncated: bool,
    /// Completion cycle of the last request; stands in for execution time.
    pub total_cycles: Cycle,
    pub total_time_us: f64,
    /// Sum of service latencies over all bank transactions.
    pub bank_busy_cycles: u64,
    pub avg_queuing_delay: f64,
    pub max_queuing_delay: Cycle,
    pub avg_access_latency: f64,
    pub max_access_latency: Cycle,
    pub pairs_rww: u64,
    pub pairs_rwr: u64,
    pub singles: u64,
    pub conflicts_rr: u64,
    pub conflicts_rw: u64,
    pub conflicts_ww: u64,
    pub conflicts_none: u64,
    pub avg_power: f64,
    pub peak_power: f64,
    pub rapl_limit: f64,
    pub th_b: u64,
    pub config: serde_json::Value,
}

const CSV_COLUMNS: [&str; 24] = [
    "policy",
    "requests",
    "reads",
    "writes",
    "truncated",
    "total_cycles",
    "total_time_us",
    "bank_busy_cycles",
    "avg_queuing_delay",
    "max_queuing_delay",
    "avg_access_latency",
    "max_access_latency",
    "pairs_rww",
    "pairs_rwr",
    "pairs_total",
    "singles",
    "conflicts_rr",
    "conflicts_rw",
    "conflicts_ww",
    "conflicts_none",
    "avg_power",
    "peak_power",
    "rapl_limit",
    "th_b",
];

impl RunReport {
    pub fn pairs_total(&self) -> u64 {
        self.pairs_rww + self.pairs_rwr
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serialisable")
    }

    pub fn csv_header() -> String {
        CSV_COLUMNS.join(",")
    }

    /// One CSV line, no trailing newline. The config echo is left out.
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.policy,
            self.requests,
            self.reads,
            self.writes,
            self.truncated,
            self.total_cycles,
            self.total_time_us,
            self.bank_busy_cycles,
            self.avg_queuing_delay,
            self.max_queuing_delay,
            self.avg_access_latency,
            self.max_access_latency,
            self.pairs_rww,
            self.pairs_rwr,
            self.pairs_total(),
            self.singles,
            self.conflicts_rr,
            self.conflicts_rw,
            self.conflicts_ww,
            self.conflicts_none,
            self.avg_power,
            self.peak_power,
            self.rapl_limit,
            self.th_b,
        )
        .expect("writing to a String cannot fail");
        s
    }
}
