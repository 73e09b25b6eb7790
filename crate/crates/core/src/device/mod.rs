//! PCM device model: organisation, timing, commands and per-bank state.

mod bank;
mod command;
mod switch;
mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::request::{AccessKind, MemoryRequest, PairKind};
use crate::Cycle;

pub use bank::{BankState, DriverMode};
pub use command::{
    command_sequence, format_command, format_command_stream, parse_command_stream, Command, CommandKind,
    CommandSequence, StreamParseError, TransactionShape,
};
pub use switch::{transistor_config, PartitionRole, SwitchConfig, SwitchState};
pub use verify::{replay_stream, verify_stream, ReplayOutcome, Violation, ViolationKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeviceError {
    #[error("timing violation on bank {bank} at cycle {cycle}: {detail}")]
    TimingViolation { bank: usize, cycle: Cycle, detail: String },
    #[error("sequence violation on bank {bank} at cycle {cycle}: {detail}")]
    SequenceViolation { bank: usize, cycle: Cycle, detail: String },
    #[error("invalid switch configuration: {0}")]
    InvalidConfig(String),
    #[error("requests {first} and {second} cannot be paired")]
    IllegalPair { first: u64, second: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Memory organisation. All counts must be powers of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Geometry {
    pub channels: u32,
    pub ranks_per_channel: u32,
    pub banks_per_rank: u32,
    pub partitions_per_bank: u32,
    pub rows_per_partition: u32,
    pub columns_per_row: u32,
    /// Read/write granularity of one memory line.
    pub line_bits: u32,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            channels: 4,
            ranks_per_channel: 4,
            banks_per_rank: 8,
            partitions_per_bank: 8,
            rows_per_partition: 4096,
            columns_per_row: 512,
            line_bits: 128,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let counts = [
            ("channels", self.channels),
            ("ranks_per_channel", self.ranks_per_channel),
            ("banks_per_rank", self.banks_per_rank),
            ("partitions_per_bank", self.partitions_per_bank),
            ("rows_per_partition", self.rows_per_partition),
            ("columns_per_row", self.columns_per_row),
            ("line_bits", self.line_bits),
        ];
        for (name, v) in counts {
            if v == 0 || !v.is_power_of_two() {
                return Err(DeviceError::InvalidParameter(format!(
                    "{name} must be a power of two >= 1, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn total_banks(&self) -> usize {
        (self.channels * self.ranks_per_channel * self.banks_per_rank) as usize
    }

    /// Capacity in bytes implied by the geometry.
    pub fn capacity_bytes(&self) -> u64 {
        self.total_banks() as u64
            * self.partitions_per_bank as u64
            * self.rows_per_partition as u64
            * self.columns_per_row as u64
            * (self.line_bits as u64 / 8)
    }
}

/// Bank service latencies and the primitive timings they are built from,
/// in memory-clock cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingParams {
    /// ACTIVATE-READ-PRECHARGE.
    pub a_r_p: Cycle,
    /// ACTIVATE-WRITE-PRECHARGE.
    pub a_w_p: Cycle,
    pub t_rcd: Cycle,
    pub rl: Cycle,
    pub wl: Cycle,
    pub t_wr: Cycle,
    /// ACTIVATE-ACTIVATE-RWW-PRECHARGE.
    pub a_rww_p: Cycle,
    /// ACTIVATE-ACTIVATE-DECOUPLE-RWR-TRANSFER-PRECHARGE.
    pub a_rwr_p: Cycle,
    /// Both bursts of a paired read plus the TRANSFER cycle between them.
    pub transfer_read_pair: Cycle,
    pub clock_mhz: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            a_r_p: 19,
            a_w_p: 47,
            t_rcd: 1,
            rl: 10,
            wl: 3,
            t_wr: 35,
            a_rww_p: 48,
            a_rwr_p: 30,
            transfer_read_pair: 17,
            clock_mhz: 256.0,
        }
    }
}

impl TimingParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |msg: String| Err(DeviceError::InvalidParameter(msg));
        if self.t_rcd == 0 {
            return bad("t_rcd must be at least 1".into());
        }
        if self.transfer_read_pair < 3 || self.transfer_read_pair % 2 == 0 {
            return bad(format!(
                "transfer_read_pair must be two equal bursts plus one cycle, got {}",
                self.transfer_read_pair
            ));
        }
        if self.a_rww_p >= self.a_r_p + self.a_w_p {
            return bad(format!(
                "a_rww_p ({}) must be below a_r_p + a_w_p ({})",
                self.a_rww_p,
                self.a_r_p + self.a_w_p
            ));
        }
        if self.a_rwr_p >= 2 * self.a_r_p {
            return bad(format!("a_rwr_p ({}) must be below 2 * a_r_p ({})", self.a_rwr_p, 2 * self.a_r_p));
        }
        for shape in [
            TransactionShape::SingleRead,
            TransactionShape::SingleWrite,
            TransactionShape::Rww,
            TransactionShape::Rwr,
        ] {
            let offsets = shape.offsets(self);
            if offsets.windows(2).any(|w| w[0].1 >= w[1].1) {
                return bad(format!("{shape:?} service latency too short for its command sequence"));
            }
        }
        if !(self.clock_mhz > 0.0) {
            return bad("clock_mhz must be positive".into());
        }
        Ok(())
    }

    /// Length of one data burst.
    pub fn burst(&self) -> Cycle {
        (self.transfer_read_pair - 1) / 2
    }

    pub fn single_service(&self, kind: AccessKind) -> Cycle {
        match kind {
            AccessKind::Read => self.a_r_p,
            AccessKind::Write => self.a_w_p,
        }
    }

    pub fn pair_service(&self, kind: PairKind) -> Option<Cycle> {
        match kind {
            PairKind::RwwPair => Some(self.a_rww_p),
            PairKind::RwrPair => Some(self.a_rwr_p),
            PairKind::None => None,
        }
    }
}

/// Whether two requests can share one bank transaction.
pub fn legal_pairing(a: &MemoryRequest, b: &MemoryRequest) -> PairKind {
    if a.bank != b.bank || a.partition() == b.partition() || a.id == b.id {
        return PairKind::None;
    }
    match (a.kind, b.kind) {
        (AccessKind::Read, AccessKind::Read) => PairKind::RwrPair,
        (AccessKind::Write, AccessKind::Write) => PairKind::None,
        _ => PairKind::RwwPair,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::address::DecodedAddress;

    fn req(id: u64, kind: AccessKind, bank: u32, partition: u32) -> MemoryRequest {
        let a = DecodedAddress {
            bank,
            partition,
            ..Default::default()
        };
        MemoryRequest::new(id, kind, 0, a, &Geometry::default())
    }

    #[test]
    fn defaults() {
        let g = Geometry::default();
        assert_eq!((g.channels, g.ranks_per_channel, g.banks_per_rank, g.partitions_per_bank), (4, 4, 8, 8));
        assert_eq!(g.line_bits, 128);
        assert_eq!(g.total_banks(), 128);
        g.validate().unwrap();
        let t = TimingParams::default();
        assert_eq!((t.a_r_p, t.a_w_p, t.a_rww_p, t.a_rwr_p), (19, 47, 48, 30));
        assert_eq!(t.burst(), 8);
        t.validate().unwrap();
    }

    #[test]
    fn geometry_rejects_non_power_of_two() {
        let g = Geometry {
            banks_per_rank: 6,
            ..Default::default()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn timing_rejects_pairing_that_does_not_beat_serial() {
        let t = TimingParams {
            a_rww_p: 66,
            ..Default::default()
        };
        assert!(t.validate().is_err());
        let t = TimingParams {
            a_rwr_p: 38,
            ..Default::default()
        };
        assert!(t.validate().is_err());
    }

    #[test]
    fn pairing_fig8_read_write() {
        let r = req(0, AccessKind::Read, 3, 1);
        let w = req(1, AccessKind::Write, 3, 3);
        assert_eq!(legal_pairing(&r, &w), PairKind::RwwPair);
        assert_eq!(legal_pairing(&w, &r), PairKind::RwwPair);
    }

    #[test]
    fn pairing_fig8_read_read() {
        let a = req(0, AccessKind::Read, 3, 4);
        let b = req(1, AccessKind::Read, 3, 3);
        assert_eq!(legal_pairing(&a, &b), PairKind::RwrPair);
    }

    #[test]
    fn pairing_rejects() {
        assert_eq!(
            legal_pairing(&req(0, AccessKind::Write, 0, 2), &req(1, AccessKind::Write, 0, 5)),
            PairKind::None
        );
        assert_eq!(
            legal_pairing(&req(0, AccessKind::Read, 3, 1), &req(1, AccessKind::Read, 3, 1)),
            PairKind::None
        );
        assert_eq!(
            legal_pairing(&req(0, AccessKind::Read, 3, 1), &req(1, AccessKind::Write, 4, 2)),
            PairKind::None
        );
    }
}
