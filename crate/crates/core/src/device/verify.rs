//! Offline replay of a command stream against fresh bank state machines.

use std::collections::BTreeMap;

use serde::Serialize;

use super::bank::BankState;
use super::command::Command;
use super::{DeviceError, TimingParams};
use crate::Cycle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    Timing,
    Sequence,
    InvalidConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Position in the replay order, or `None` for transactions left open at
    /// the end of the stream.
    pub index: Option<usize>,
    pub bank: usize,
    pub cycle: Cycle,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ReplayOutcome {
    pub violations: Vec<Violation>,
    /// Cycle at which the last transaction releases its bank.
    pub final_retire: Cycle,
    pub commands: usize,
}

/// Replays `commands` (stable-sorted by cycle, then bank) and reports every
/// command the banks refuse. A refused command leaves its bank unchanged.
pub fn replay_stream(commands: &[Command], timing: &TimingParams) -> ReplayOutcome {
    let mut order: Vec<&Command> = commands.iter().collect();
    order.sort_by_key(|c| (c.issue_cycle, c.bank));

    let mut banks: BTreeMap<usize, BankState> = BTreeMap::new();
    let mut out = ReplayOutcome {
        commands: commands.len(),
        ..Default::default()
    };
    for (index, cmd) in order.into_iter().enumerate() {
        let bank = banks
            .entry(cmd.bank)
            .or_insert_with(|| BankState::new(cmd.bank, *timing));
        if let Err(e) = bank.issue(cmd, cmd.issue_cycle) {
            let (kind, detail) = match e {
                DeviceError::TimingViolation { detail, .. } => (ViolationKind::Timing, detail),
                DeviceError::SequenceViolation { detail, .. } => (ViolationKind::Sequence, detail),
                other => (ViolationKind::InvalidConfig, other.to_string()),
            };
            out.violations.push(Violation {
                index: Some(index),
                bank: cmd.bank,
                cycle: cmd.issue_cycle,
                kind,
                detail,
            });
        }
    }
    for (id, bank) in &banks {
        out.final_retire = out.final_retire.max(bank.busy_until);
        if !bank.is_idle() {
            let last = bank.pending_sequence.last().map_or(0, |c| c.issue_cycle);
            out.violations.push(Violation {
                index: None,
                bank: *id,
                cycle: last,
                kind: ViolationKind::Sequence,
                detail: "transaction never precharged".into(),
            });
        }
    }
    out
}

pub fn verify_stream(commands: &[Command], timing: &TimingParams) -> Vec<Violation> {
    replay_stream(commands, timing).violations
}
