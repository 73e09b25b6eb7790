//! Deterministic event loop driving one policy over one request stream.
//!
//! Time advances from event to event (an arrival or a bank release). At every
//! event the controller admits the requests that have arrived, then asks the
//! policy for decisions until no queued request can start. Each decision is
//! expanded into its command sequence, occupies its bank for the full service
//! latency and is charged to the power ledger.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::address::{AddressError, MappingScheme};
use crate::device::{command_sequence, verify_stream, Command, DeviceError, Geometry, TimingParams, Violation};
use crate::request::{MemoryRequest, ScheduleDecision};
use crate::scheduler::{select, BankOccupancy, PowerLedger, RwQueue, ScheduleError, SchedulerConfig};
use crate::stats::{ReportMeta, RequestOutcome, RunReport, StatsAccumulator, StatsError};
use crate::trace::{classify_each, to_requests, ConflictHistogram, ConflictWindow, TraceRecord};
use crate::Cycle;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Address(#[from] AddressError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("invalid request stream: {0}")]
    InvalidTrace(String),
    #[error("{} command legality violation(s), first: {}", .0.len(), .0[0].detail)]
    Legality(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub geometry: Geometry,
    pub timing: TimingParams,
    pub scheduler: SchedulerConfig,
    pub p_sa: f64,
    pub p_wd: f64,
    /// Stop admitting and scheduling once time passes this cycle.
    pub max_cycles: Option<Cycle>,
    /// Criterion for the conflict counts in the report.
    pub conflict_window: ConflictWindow,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            geometry: Geometry::default(),
            timing: TimingParams::default(),
            scheduler: SchedulerConfig::default(),
            p_sa: 0.12,
            p_wd: 0.24,
            max_cycles: None,
            conflict_window: ConflictWindow::default(),
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        self.geometry.validate()?;
        self.timing.validate()?;
        self.scheduler.validate()?;
        for (name, v) in [("p_sa", self.p_sa), ("p_wd", self.p_wd)] {
            if !v.is_finite() || v < 0.0 {
                return Err(DeviceError::InvalidParameter(format!("{name} must be finite and non-negative, got {v}")).into());
            }
        }
        Ok(())
    }
}

/// One scheduling decision and the state it was taken in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRecord {
    pub decision: ScheduleDecision,
    pub service_cycles: Cycle,
    /// Running-average estimate the power check saw, for paired decisions.
    pub estimated_power: Option<f64>,
    pub ledger_after: PowerLedger,
}

impl DecisionRecord {
    pub fn complete_cycle(&self) -> Cycle {
        self.decision.decision_cycle + self.service_cycles
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub decisions: Vec<DecisionRecord>,
    /// The whole command stream in issue order per decision.
    pub commands: Vec<Command>,
    /// Completed requests in scheduling order.
    pub outcomes: Vec<RequestOutcome>,
    pub ledger: PowerLedger,
    pub report: RunReport,
    pub truncated: bool,
}

impl RunOutput {
    /// Decisions reduced to request ids, `(primary, paired)`.
    pub fn decision_ids(&self) -> Vec<(u64, Option<u64>)> {
        self.decisions
            .iter()
            .map(|d| (d.decision.primary.id, d.decision.paired.map(|p| p.id)))
            .collect()
    }

    pub fn bank_busy_cycles(&self) -> Cycle {
        self.decisions.iter().map(|d| d.service_cycles).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Simulator {
    params: SimParams,
}

impl Simulator {
    pub fn new(params: SimParams) -> Result<Self, SimError> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn run_trace(&self, trace: &[TraceRecord], scheme: &MappingScheme) -> Result<RunOutput, SimError> {
        scheme.validate(&self.params.geometry)?;
        self.run(&to_requests(trace, scheme, &self.params.geometry)?)
    }

    /// Runs `requests` (ids strictly increasing, arrivals nondecreasing)
    /// to completion or to `max_cycles`.
    pub fn run(&self, requests: &[MemoryRequest]) -> Result<RunOutput, SimError> {
        let p = &self.params;
        let banks = p.geometry.total_banks();
        check_stream(requests, banks)?;

        let mut queue = RwQueue::new(banks, p.scheduler.queue_capacity);
        let mut occupancy = BankOccupancy::new(banks);
        let mut ledger = PowerLedger::new(p.p_sa, p.p_wd, &p.timing);
        let mut stats = StatsAccumulator::new();
        let mut decisions = Vec::new();
        let mut commands = Vec::new();
        let mut outcomes = Vec::with_capacity(requests.len());
        let mut pending = requests.iter().peekable();
        let mut truncated = false;
        let mut now: Cycle = requests.first().map_or(0, |r| r.arrival_cycle);

        loop {
            if p.max_cycles.is_some_and(|m| now > m) {
                truncated = !queue.is_empty() || pending.peek().is_some();
                break;
            }
            loop {
                while let Some(r) = pending.next_if(|r| r.arrival_cycle <= now && !queue.is_full()) {
                    queue.push(*r, now)?;
                }
                let decision = match select(&queue, &occupancy, &p.scheduler, &ledger, now) {
                    Ok(d) => d,
                    Err(ScheduleError::EmptyQueue | ScheduleError::NothingSchedulable) => break,
                    Err(e) => return Err(e.into()),
                };
                let seq = command_sequence(&decision, &p.timing)?;
                let estimated_power = ledger.estimate_pair_power(decision.pair_kind);
                let complete = now + seq.service_cycles;
                occupancy.occupy(decision.bank(), complete);
                ledger.commit(&decision, seq.service_cycles);
                queue.take(&decision)?;
                stats.record_transaction(decision.pair_kind, seq.service_cycles);
                for r in decision.requests() {
                    let o = RequestOutcome {
                        id: r.id,
                        kind: r.kind,
                        enqueue_cycle: r.enqueue_cycle,
                        schedule_cycle: now,
                        complete_cycle: complete,
                        paired: decision.pair_kind,
                    };
                    stats.record(&o)?;
                    outcomes.push(o);
                }
                commands.extend(seq.commands);
                decisions.push(DecisionRecord {
                    decision,
                    service_cycles: seq.service_cycles,
                    estimated_power,
                    ledger_after: ledger,
                });
            }

            let next_arrival = pending.peek().filter(|_| !queue.is_full()).map(|r| r.arrival_cycle);
            match (next_arrival, occupancy.next_release_after(now)) {
                (None, None) => break,
                (a, b) => now = a.into_iter().chain(b).min().expect("one side is Some").max(now + 1),
            }
        }
        debug_assert!(truncated || queue.is_empty());

        let violations = verify_stream(&commands, &p.timing);
        if !violations.is_empty() {
            return Err(SimError::Legality(violations));
        }

        let mut conflicts = ConflictHistogram::default();
        for k in classify_each(requests, banks, p.conflict_window, &p.timing) {
            conflicts.add(k);
        }
        stats.set_conflicts(conflicts);
        stats.set_power(&ledger);
        let report = stats.finalize(ReportMeta {
            policy: p.scheduler.policy.name().to_string(),
            rapl_limit: p.scheduler.rapl_limit,
            th_b: p.scheduler.th_b,
            clock_mhz: p.timing.clock_mhz,
            truncated,
            config: serde_json::to_value(p).expect("parameters are serialisable"),
        });
        Ok(RunOutput {
            decisions,
            commands,
            outcomes,
            ledger,
            report,
            truncated,
        })
    }
}

fn check_stream(requests: &[MemoryRequest], banks: usize) -> Result<(), SimError> {
    for w in requests.windows(2) {
        if w[1].id <= w[0].id {
            return Err(SimError::InvalidTrace(format!("request ids not increasing at id {}", w[1].id)));
        }
        if w[1].arrival_cycle < w[0].arrival_cycle {
            return Err(SimError::InvalidTrace(format!("request {} arrives before its predecessor", w[1].id)));
        }
    }
    if let Some(r) = requests.iter().find(|r| r.bank >= banks) {
        return Err(SimError::InvalidTrace(format!("request {} targets bank {} of {banks}", r.id, r.bank)));
    }
    Ok(())
}
