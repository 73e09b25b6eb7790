//! Requests and scheduling decisions shared by the device model and the
//! scheduler.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::address::DecodedAddress;
use crate::device::{legal_pairing, DeviceError, Geometry};
use crate::Cycle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Read,
    Write,
}

impl AccessKind {
    pub fn mnemonic(self) -> char {
        match self {
            AccessKind::Read => 'R',
            AccessKind::Write => 'W',
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            AccessKind::Read => AccessKind::Write,
            AccessKind::Write => AccessKind::Read,
        }
    }
}

impl fmt::Display for AccessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mnemonic())
    }
}

/// One read or write access waiting in (or leaving) the read-write queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryRequest {
    /// Monotone sequence number in arrival order.
    pub id: u64,
    pub arrival_cycle: Cycle,
    pub kind: AccessKind,
    pub address: DecodedAddress,
    /// Global bank index, cached from `address`.
    pub bank: usize,
    pub enqueue_cycle: Cycle,
    /// Requests the queue had already served when this one was enqueued.
    /// Used by the access-count flavour of the backlogging threshold.
    pub served_at_enqueue: u64,
}

impl MemoryRequest {
    pub fn new(id: u64, kind: AccessKind, arrival_cycle: Cycle, address: DecodedAddress, g: &Geometry) -> Self {
        Self {
            id,
            arrival_cycle,
            kind,
            bank: address.global_bank(g),
            address,
            enqueue_cycle: arrival_cycle,
            served_at_enqueue: 0,
        }
    }

    pub fn partition(&self) -> u32 {
        self.address.partition
    }

    pub fn is_read(&self) -> bool {
        self.kind == AccessKind::Read
    }
}

/// How two requests may share one bank transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    /// Read in one partition concurrently with a write in another.
    RwwPair,
    /// Two reads in distinct partitions, second one served by the
    /// write driver's verify logic.
    RwrPair,
    None,
}

/// What a policy decided to send to a bank at `decision_cycle`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleDecision {
    pub primary: MemoryRequest,
    pub paired: Option<MemoryRequest>,
    pub pair_kind: PairKind,
    pub decision_cycle: Cycle,
}

impl ScheduleDecision {
    pub fn single(primary: MemoryRequest, decision_cycle: Cycle) -> Self {
        Self {
            primary,
            paired: None,
            pair_kind: PairKind::None,
            decision_cycle,
        }
    }

    /// Builds a paired decision; fails if the two requests cannot share a
    /// transaction.
    pub fn pair(primary: MemoryRequest, paired: MemoryRequest, decision_cycle: Cycle) -> Result<Self, DeviceError> {
        match legal_pairing(&primary, &paired) {
            PairKind::None => Err(DeviceError::IllegalPair {
                first: primary.id,
                second: paired.id,
            }),
            kind => Ok(Self {
                primary,
                paired: Some(paired),
                pair_kind: kind,
                decision_cycle,
            }),
        }
    }

    pub fn bank(&self) -> usize {
        self.primary.bank
    }

    pub fn is_paired(&self) -> bool {
        self.paired.is_some()
    }

    /// Requests in activation order: primary first.
    pub fn requests(&self) -> impl Iterator<Item = &MemoryRequest> {
        std::iter::once(&self.primary).chain(self.paired.as_ref())
    }
}
