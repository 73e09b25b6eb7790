use std::collections::VecDeque;

use super::{BankOccupancy, Policy, PowerLedger, RwQueue, ScheduleError, SchedulerConfig};
use crate::request::{AccessKind, MemoryRequest, PairKind, ScheduleDecision};
use crate::Cycle;

fn order_key(r: &MemoryRequest) -> (Cycle, u64) {
    (r.enqueue_cycle, r.id)
}

fn arrived(lane: &VecDeque<MemoryRequest>, now: Cycle) -> impl Iterator<Item = &MemoryRequest> {
    lane.iter().take_while(move |r| r.arrival_cycle <= now)
}

/// Oldest request of every bank that is free at `now`. A lane's head is the
/// only entry of that lane that may become a primary request.
fn schedulable_heads<'q>(
    q: &'q RwQueue,
    banks: &'q BankOccupancy,
    now: Cycle,
) -> impl Iterator<Item = (&'q MemoryRequest, &'q VecDeque<MemoryRequest>)> {
    q.lanes().filter_map(move |(bank, lane)| {
        let head = lane.front()?;
        (banks.is_free(bank, now) && head.arrival_cycle <= now).then_some((head, lane))
    })
}

fn check_nonempty(q: &RwQueue) -> Result<(), ScheduleError> {
    if q.is_empty() {
        Err(ScheduleError::EmptyQueue)
    } else {
        Ok(())
    }
}

fn oldest_head(q: &RwQueue, banks: &BankOccupancy, now: Cycle) -> Result<MemoryRequest, ScheduleError> {
    check_nonempty(q)?;
    schedulable_heads(q, banks, now)
        .map(|(h, _)| *h)
        .min_by_key(order_key)
        .ok_or(ScheduleError::NothingSchedulable)
}

/// Oldest arrived request in `lane` of `kind` in a partition other than
/// `primary`'s.
fn oldest_companion(lane: &VecDeque<MemoryRequest>, primary: &MemoryRequest, kind: AccessKind, now: Cycle) -> Option<MemoryRequest> {
    arrived(lane, now)
        .find(|r| r.id != primary.id && r.kind == kind && r.partition() != primary.partition())
        .copied()
}

pub fn select_fcfs(q: &RwQueue, banks: &BankOccupancy, now: Cycle) -> Result<ScheduleDecision, ScheduleError> {
    Ok(ScheduleDecision::single(oldest_head(q, banks, now)?, now))
}

pub fn select_multipartition(
    q: &RwQueue,
    banks: &BankOccupancy,
    cfg: &SchedulerConfig,
    now: Cycle,
) -> Result<ScheduleDecision, ScheduleError> {
    let oldest = oldest_head(q, banks, now)?;
    let rww_partner = |r: &MemoryRequest| oldest_companion(q.lane(r.bank), r, r.kind.opposite(), now);

    let mut primary = oldest;
    let mut partner = rww_partner(&oldest);
    let may_reorder = !cfg.multipartition_guard || cfg.age(&oldest, q, now) < cfg.th_b;
    if partner.is_none() && may_reorder {
        if let Some((head, p)) = schedulable_heads(q, banks, now)
            .filter_map(|(h, _)| rww_partner(h).map(|p| (*h, p)))
            .min_by_key(|(h, _)| order_key(h))
        {
            primary = head;
            partner = Some(p);
        }
    }
    Ok(match partner {
        Some(p) => ScheduleDecision::pair(primary, p, now).expect("same bank, distinct partitions, read+write"),
        None => ScheduleDecision::single(primary, now),
    })
}

pub fn select_palp(
    q: &RwQueue,
    banks: &BankOccupancy,
    cfg: &SchedulerConfig,
    ledger: &PowerLedger,
    now: Cycle,
) -> Result<ScheduleDecision, ScheduleError> {
    let oldest = oldest_head(q, banks, now)?;

    let mut primary = oldest;
    if cfg.age(&oldest, q, now) < cfg.th_b {
        // Oldest request that shares its bank with another queued request.
        if let Some(head) = schedulable_heads(q, banks, now)
            .filter(|(_, lane)| arrived(lane, now).nth(1).is_some())
            .map(|(h, _)| *h)
            .min_by_key(order_key)
        {
            primary = head;
        }
    }

    let lane = q.lane(primary.bank);
    let candidate = match primary.kind {
        AccessKind::Write => oldest_companion(lane, &primary, AccessKind::Read, now).map(|c| (c, PairKind::RwwPair)),
        AccessKind::Read => oldest_companion(lane, &primary, AccessKind::Write, now)
            .map(|c| (c, PairKind::RwwPair))
            .or_else(|| oldest_companion(lane, &primary, AccessKind::Read, now).map(|c| (c, PairKind::RwrPair))),
    };

    if let Some((companion, kind)) = candidate {
        let estimate = ledger.estimate_pair_power(kind).expect("paired kind");
        if estimate <= cfg.rapl_limit {
            return Ok(ScheduleDecision::pair(primary, companion, now).expect("companion search only yields legal pairs"));
        }
    }
    Ok(ScheduleDecision::single(primary, now))
}

/// Dispatches on `cfg.policy`.
pub fn select(
    q: &RwQueue,
    banks: &BankOccupancy,
    cfg: &SchedulerConfig,
    ledger: &PowerLedger,
    now: Cycle,
) -> Result<ScheduleDecision, ScheduleError> {
    match cfg.policy {
        Policy::BaselineFcfs => select_fcfs(q, banks, now),
        Policy::Multipartition => select_multipartition(q, banks, cfg, now),
        Policy::Palp => select_palp(q, banks, cfg, ledger, now),
    }
}
