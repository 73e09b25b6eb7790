use std::collections::VecDeque;

use super::ScheduleError;
use crate::request::{MemoryRequest, ScheduleDecision};
use crate::Cycle;

/// The controller's read-write queue.
///
/// Logically a single FIFO in arrival order. Internally the entries are kept
/// in one lane per bank (each lane is itself in arrival order), which keeps
/// the per-bank companion searches short on long traces.
#[derive(Debug, Clone)]
pub struct RwQueue {
    lanes: Vec<VecDeque<MemoryRequest>>,
    len: usize,
    capacity: Option<usize>,
    served: u64,
    last_id: Option<u64>,
}

impl RwQueue {
    pub fn new(banks: usize, capacity: Option<usize>) -> Self {
        Self {
            lanes: vec![VecDeque::new(); banks],
            len: 0,
            capacity,
            served: 0,
            last_id: None,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.capacity.is_some_and(|c| self.len >= c)
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    /// Requests removed by decisions so far.
    pub fn served(&self) -> u64 {
        self.served
    }

    pub fn bank_count(&self) -> usize {
        self.lanes.len()
    }

    /// Enqueues `req` at cycle `now`; ids must arrive in increasing order.
    pub fn push(&mut self, mut req: MemoryRequest, now: Cycle) -> Result<(), ScheduleError> {
        if self.is_full() {
            return Err(ScheduleError::QueueFull);
        }
        if self.last_id.is_some_and(|last| req.id <= last) {
            return Err(ScheduleError::OutOfOrder { id: req.id });
        }
        let lane = self
            .lanes
            .get_mut(req.bank)
            .ok_or(ScheduleError::UnknownBank { bank: req.bank })?;
        req.enqueue_cycle = now.max(req.arrival_cycle);
        req.served_at_enqueue = self.served;
        lane.push_back(req);
        self.last_id = Some(req.id);
        self.len += 1;
        Ok(())
    }

    /// Entries of one bank in arrival order.
    pub fn lane(&self, bank: usize) -> &VecDeque<MemoryRequest> {
        &self.lanes[bank]
    }

    pub(crate) fn lanes(&self) -> impl Iterator<Item = (usize, &VecDeque<MemoryRequest>)> {
        self.lanes.iter().enumerate().filter(|(_, l)| !l.is_empty())
    }

    /// All entries in arrival order.
    pub fn entries(&self) -> Vec<&MemoryRequest> {
        let mut all: Vec<&MemoryRequest> = self.lanes.iter().flatten().collect();
        all.sort_by_key(|r| r.id);
        all
    }

    pub fn contains(&self, req: &MemoryRequest) -> bool {
        self.lanes
            .get(req.bank)
            .is_some_and(|l| l.iter().any(|r| r.id == req.id))
    }

    /// Removes the requests of `decision`; the only way entries leave.
    pub fn take(&mut self, decision: &ScheduleDecision) -> Result<(), ScheduleError> {
        for r in decision.requests() {
            if !self.contains(r) {
                return Err(ScheduleError::NotQueued { id: r.id });
            }
        }
        for r in decision.requests() {
            let lane = &mut self.lanes[r.bank];
            let pos = lane.iter().position(|x| x.id == r.id).expect("checked above");
            lane.remove(pos);
            self.len -= 1;
            self.served += 1;
        }
        Ok(())
    }
}
