use serde::{Deserialize, Serialize};

use super::command::{Command, CommandKind, TransactionShape};
use super::switch::{transistor_config, PartitionRole, SwitchConfig};
use super::{DeviceError, TimingParams};
use crate::request::AccessKind;
use crate::Cycle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriverMode {
    WriteMode,
    DecoupledMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    /// One or two partitions activated, no access command yet.
    Open,
    /// Access command issued; waiting for PRECHARGE.
    Accessing(TransactionShape),
    Decoupled,
    PairRead,
}

/// Command-driven state of one bank.
///
/// Commands of a transaction must land exactly on the offsets produced by
/// [`TransactionShape::offsets`]; the next transaction may start once
/// `busy_until` is reached.
#[derive(Debug, Clone)]
pub struct BankState {
    pub bank: usize,
    pub open_partitions: Vec<u32>,
    pub switch: SwitchConfig,
    pub driver_mode: DriverMode,
    pub busy_until: Cycle,
    /// Commands of the open transaction, oldest first.
    pub pending_sequence: Vec<Command>,
    timing: TimingParams,
    phase: Phase,
    start: Cycle,
    transferred: bool,
}

impl BankState {
    pub fn new(bank: usize, timing: TimingParams) -> Self {
        Self {
            bank,
            open_partitions: Vec::with_capacity(2),
            switch: SwitchConfig::IDLE,
            driver_mode: DriverMode::WriteMode,
            busy_until: 0,
            pending_sequence: Vec::new(),
            timing,
            phase: Phase::Idle,
            start: 0,
            transferred: false,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.phase == Phase::Idle
    }

    fn seq_err(&self, now: Cycle, detail: impl Into<String>) -> DeviceError {
        DeviceError::SequenceViolation {
            bank: self.bank,
            cycle: now,
            detail: detail.into(),
        }
    }

    fn at(&self, kind: CommandKind, now: Cycle, offset: Cycle) -> Result<(), DeviceError> {
        let due = self.start + offset;
        if now == due {
            Ok(())
        } else {
            Err(DeviceError::TimingViolation {
                bank: self.bank,
                cycle: now,
                detail: format!("{kind} due at cycle {due}"),
            })
        }
    }

    fn offset_of(&self, shape: TransactionShape, kind: CommandKind, nth: usize) -> Cycle {
        shape
            .offsets(&self.timing)
            .into_iter()
            .filter(|(k, _)| *k == kind)
            .nth(nth)
            .map(|(_, off)| off)
            .expect("shape contains the command")
    }

    fn role(&self, idx: usize, kind: AccessKind) -> PartitionRole {
        PartitionRole {
            partition: self.open_partitions[idx],
            kind,
        }
    }

    /// Applies `cmd` at cycle `now`. On error the state is left untouched.
    pub fn issue(&mut self, cmd: &Command, now: Cycle) -> Result<(), DeviceError> {
        use CommandKind::*;
        if cmd.bank != self.bank {
            return Err(self.seq_err(now, format!("command for bank {} issued to bank {}", cmd.bank, self.bank)));
        }
        let mut next = self.clone();
        let open = self.open_partitions.len();
        match (self.phase, cmd.kind) {
            (Phase::Idle, Activate) => {
                if now < self.busy_until {
                    return Err(DeviceError::TimingViolation {
                        bank: self.bank,
                        cycle: now,
                        detail: format!("bank busy until cycle {}", self.busy_until),
                    });
                }
                let p = cmd
                    .partition
                    .ok_or_else(|| self.seq_err(now, "ACTIVATE without a partition"))?;
                next.start = now;
                next.open_partitions = vec![p];
                next.phase = Phase::Open;
                next.transferred = false;
                next.pending_sequence.clear();
            }
            (Phase::Open, Activate) => {
                let p = cmd
                    .partition
                    .ok_or_else(|| self.seq_err(now, "ACTIVATE without a partition"))?;
                if open >= 2 {
                    return Err(self.seq_err(now, "at most two partitions may be active in a bank"));
                }
                if self.open_partitions.contains(&p) {
                    return Err(self.seq_err(now, format!("partition {p} is already active")));
                }
                self.at(Activate, now, 1)?;
                next.open_partitions.push(p);
            }
            (Phase::Open, Read | Write) => {
                if open != 1 {
                    return Err(self.seq_err(now, format!("{} with two partitions active", cmd.kind)));
                }
                let (shape, kind) = if cmd.kind == Read {
                    (TransactionShape::SingleRead, AccessKind::Read)
                } else {
                    (TransactionShape::SingleWrite, AccessKind::Write)
                };
                self.at(cmd.kind, now, self.offset_of(shape, cmd.kind, 0))?;
                next.switch = transistor_config(&[self.role(0, kind)])?;
                next.phase = Phase::Accessing(shape);
            }
            (Phase::Open, Rww) => {
                if open != 2 {
                    return Err(self.seq_err(now, "RWW needs two active partitions"));
                }
                let w = cmd
                    .partition
                    .ok_or_else(|| self.seq_err(now, "RWW without the written partition"))?;
                let write_idx = self
                    .open_partitions
                    .iter()
                    .position(|&p| p == w)
                    .ok_or_else(|| self.seq_err(now, format!("RWW writes partition {w}, which is not active")))?;
                self.at(Rww, now, self.offset_of(TransactionShape::Rww, Rww, 0))?;
                let roles: Vec<PartitionRole> = (0..2)
                    .map(|i| self.role(i, if i == write_idx { AccessKind::Write } else { AccessKind::Read }))
                    .collect();
                next.switch = transistor_config(&roles)?;
                next.phase = Phase::Accessing(TransactionShape::Rww);
            }
            (Phase::Open, Decouple) => {
                if open != 2 {
                    return Err(self.seq_err(now, "DECOUPLE needs two active partitions"));
                }
                self.at(Decouple, now, self.offset_of(TransactionShape::Rwr, Decouple, 0))?;
                next.switch = self.switch.decoupled()?;
                next.driver_mode = DriverMode::DecoupledMode;
                next.phase = Phase::Decoupled;
            }
            (Phase::Decoupled, Rwr) => {
                self.at(Rwr, now, self.offset_of(TransactionShape::Rwr, Rwr, 0))?;
                next.switch = transistor_config(&[self.role(0, AccessKind::Read), self.role(1, AccessKind::Read)])?;
                next.phase = Phase::PairRead;
            }
            (Phase::Decoupled, k) => {
                return Err(self.seq_err(now, format!("{k} after DECOUPLE; only RWR may follow")));
            }
            (Phase::PairRead, Transfer) if !self.transferred => {
                self.at(Transfer, now, self.offset_of(TransactionShape::Rwr, Transfer, 0))?;
                next.switch = self.switch.transferred()?;
                next.transferred = true;
            }
            (Phase::PairRead, Precharge) if !self.transferred => {
                return Err(self.seq_err(now, "PRECHARGE before TRANSFER of the second read"));
            }
            (Phase::PairRead, Precharge) | (Phase::Accessing(_), Precharge) => {
                let shape = match self.phase {
                    Phase::Accessing(s) => s,
                    _ => TransactionShape::Rwr,
                };
                let service = shape.service_cycles(&self.timing);
                self.at(Precharge, now, service - 1)?;
                next.open_partitions.clear();
                next.switch = SwitchConfig::IDLE;
                next.driver_mode = DriverMode::WriteMode;
                next.busy_until = self.start + service;
                next.phase = Phase::Idle;
            }
            (Phase::Accessing(_) | Phase::PairRead, Activate) => {
                return Err(DeviceError::TimingViolation {
                    bank: self.bank,
                    cycle: now,
                    detail: format!("transaction started at cycle {} still in service", self.start),
                });
            }
            (_, Transfer) => return Err(self.seq_err(now, "TRANSFER only follows RWR")),
            (_, Rwr) => return Err(self.seq_err(now, "RWR must immediately follow DECOUPLE")),
            (Phase::Idle, k) => return Err(self.seq_err(now, format!("{k} with no active partition"))),
            (_, k) => return Err(self.seq_err(now, format!("{k} out of sequence"))),
        }
        if next.phase == Phase::Idle {
            next.pending_sequence.clear();
        } else {
            next.pending_sequence.push(*cmd);
        }
        debug_assert!(next.open_partitions.len() <= 2);
        debug_assert!(next.switch.pulse_shaper_connections() <= 1);
        *self = next;
        Ok(())
    }
}
