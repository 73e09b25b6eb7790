//! Device commands, per-transaction command sequences and the plain-text
//! command-stream format.
//!
//! A stream file has one command per line:
//!
//! ```text
//! <cycle> <kind> <bank> [<partition> <row> <column>]
//! ```
//!
//! `kind` is one of `A R W P RWW RWR D T`. ACTIVATE lines carry the partition,
//! row and column. RWW lines carry the partition being written (the other
//! open partition is read). Blank lines and lines starting with `#` are
//! ignored.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DeviceError, TimingParams};
use crate::request::{AccessKind, PairKind, ScheduleDecision};
use crate::Cycle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommandKind {
    Activate,
    Read,
    Write,
    Precharge,
    Rww,
    Rwr,
    Decouple,
    Transfer,
}

impl CommandKind {
    pub fn mnemonic(self) -> &'static str {
        match self {
            CommandKind::Activate => "A",
            CommandKind::Read => "R",
            CommandKind::Write => "W",
            CommandKind::Precharge => "P",
            CommandKind::Rww => "RWW",
            CommandKind::Rwr => "RWR",
            CommandKind::Decouple => "D",
            CommandKind::Transfer => "T",
        }
    }
}

impl FromStr for CommandKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "A" => CommandKind::Activate,
            "R" => CommandKind::Read,
            "W" => CommandKind::Write,
            "P" => CommandKind::Precharge,
            "RWW" => CommandKind::Rww,
            "RWR" => CommandKind::Rwr,
            "D" => CommandKind::Decouple,
            "T" => CommandKind::Transfer,
            other => return Err(format!("unknown command kind {other:?}")),
        })
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    pub kind: CommandKind,
    /// Global bank index.
    pub bank: usize,
    /// ACTIVATE: partition being opened. RWW: partition being written.
    pub partition: Option<u32>,
    pub row: Option<u32>,
    pub column: Option<u32>,
    pub issue_cycle: Cycle,
}

impl Command {
    pub fn simple(kind: CommandKind, bank: usize, issue_cycle: Cycle) -> Self {
        Self {
            kind,
            bank,
            partition: None,
            row: None,
            column: None,
            issue_cycle,
        }
    }

    pub fn activate(bank: usize, partition: u32, row: u32, column: u32, issue_cycle: Cycle) -> Self {
        Self {
            kind: CommandKind::Activate,
            bank,
            partition: Some(partition),
            row: Some(row),
            column: Some(column),
            issue_cycle,
        }
    }

    pub fn rww(bank: usize, write_partition: u32, issue_cycle: Cycle) -> Self {
        Self {
            partition: Some(write_partition),
            ..Self::simple(CommandKind::Rww, bank, issue_cycle)
        }
    }
}

/// The four bank transactions the device supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransactionShape {
    SingleRead,
    SingleWrite,
    Rww,
    Rwr,
}

impl TransactionShape {
    pub fn of_decision(d: &ScheduleDecision) -> Result<Self, DeviceError> {
        match (d.pair_kind, d.paired.is_some()) {
            (PairKind::None, false) => Ok(match d.primary.kind {
                AccessKind::Read => TransactionShape::SingleRead,
                AccessKind::Write => TransactionShape::SingleWrite,
            }),
            (PairKind::RwwPair, true) => Ok(TransactionShape::Rww),
            (PairKind::RwrPair, true) => Ok(TransactionShape::Rwr),
            _ => Err(DeviceError::IllegalPair {
                first: d.primary.id,
                second: d.paired.map_or(d.primary.id, |p| p.id),
            }),
        }
    }

    pub fn service_cycles(self, t: &TimingParams) -> Cycle {
        match self {
            TransactionShape::SingleRead => t.a_r_p,
            TransactionShape::SingleWrite => t.a_w_p,
            TransactionShape::Rww => t.a_rww_p,
            TransactionShape::Rwr => t.a_rwr_p,
        }
    }

    /// Command kinds and their cycle offsets from the first ACTIVATE.
    ///
    /// PRECHARGE always sits in the last cycle of the service window, so the
    /// bank is free again at `service_cycles`.
    pub fn offsets(self, t: &TimingParams) -> Vec<(CommandKind, Cycle)> {
        use CommandKind::*;
        let last = self.service_cycles(t).saturating_sub(1);
        match self {
            TransactionShape::SingleRead => vec![(Activate, 0), (Read, t.t_rcd), (Precharge, last)],
            TransactionShape::SingleWrite => vec![(Activate, 0), (Write, t.t_rcd), (Precharge, last)],
            TransactionShape::Rww => vec![(Activate, 0), (Activate, 1), (Rww, 1 + t.t_rcd), (Precharge, last)],
            TransactionShape::Rwr => {
                let rwr = 2 + t.t_rcd;
                vec![
                    (Activate, 0),
                    (Activate, 1),
                    (Decouple, 1 + t.t_rcd),
                    (Rwr, rwr),
                    (Transfer, rwr + t.rl + t.burst()),
                    (Precharge, last),
                ]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandSequence {
    pub commands: Vec<Command>,
    pub service_cycles: Cycle,
}

/// Commands that serve `decision`, issued from `decision.decision_cycle`.
pub fn command_sequence(decision: &ScheduleDecision, timing: &TimingParams) -> Result<CommandSequence, DeviceError> {
    let shape = TransactionShape::of_decision(decision)?;
    let start = decision.decision_cycle;
    let bank = decision.bank();
    let mut activations = decision.requests();
    let commands = shape
        .offsets(timing)
        .into_iter()
        .map(|(kind, off)| {
            let at = start + off;
            match kind {
                CommandKind::Activate => {
                    let r = activations.next().expect("one ACTIVATE per request");
                    Command::activate(bank, r.address.partition, r.address.row, r.address.column, at)
                }
                CommandKind::Rww => {
                    let w = decision
                        .requests()
                        .find(|r| r.kind == AccessKind::Write)
                        .expect("RWW pair holds a write");
                    Command::rww(bank, w.partition(), at)
                }
                k => Command::simple(k, bank, at),
            }
        })
        .collect();
    Ok(CommandSequence {
        commands,
        service_cycles: shape.service_cycles(timing),
    })
}

pub fn format_command(c: &Command) -> String {
    match (c.kind, c.partition, c.row, c.column) {
        (CommandKind::Activate, Some(p), Some(r), Some(col)) => {
            format!("{} {} {} {} {} {}", c.issue_cycle, c.kind, c.bank, p, r, col)
        }
        (_, Some(p), _, _) => format!("{} {} {} {}", c.issue_cycle, c.kind, c.bank, p),
        _ => format!("{} {} {}", c.issue_cycle, c.kind, c.bank),
    }
}

pub fn format_command_stream(commands: &[Command]) -> String {
    let mut out = String::new();
    for c in commands {
        out.push_str(&format_command(c));
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct StreamParseError {
    pub line: usize,
    pub message: String,
}

pub fn parse_command_stream(text: &str) -> Result<Vec<Command>, StreamParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| StreamParseError { line: idx + 1, message };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 3 {
            return Err(err(format!("expected `cycle kind bank ...`, got {line:?}")));
        }
        let num = |s: &str, what: &str| -> Result<u64, StreamParseError> {
            s.parse::<u64>()
                .map_err(|_| err(format!("bad {what} {s:?}")))
        };
        let issue_cycle = num(tokens[0], "cycle")?;
        let kind: CommandKind = tokens[1].parse().map_err(err)?;
        let bank = num(tokens[2], "bank")? as usize;
        let rest = &tokens[3..];
        let cmd = match (kind, rest.len()) {
            (CommandKind::Activate, 3) => Command::activate(
                bank,
                num(rest[0], "partition")? as u32,
                num(rest[1], "row")? as u32,
                num(rest[2], "column")? as u32,
                issue_cycle,
            ),
            (CommandKind::Activate, _) => return Err(err("ACTIVATE needs partition, row and column".into())),
            (CommandKind::Rww, 1) => Command::rww(bank, num(rest[0], "partition")? as u32, issue_cycle),
            (CommandKind::Rww, _) => return Err(err("RWW needs the written partition".into())),
            (k, 0) => Command::simple(k, bank, issue_cycle),
            (k, n) => return Err(err(format!("{k} takes no operands, got {n}"))),
        };
        out.push(cmd);
    }
    Ok(out)
}
