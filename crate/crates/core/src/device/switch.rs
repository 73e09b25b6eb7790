//! Peripheral-structure switch settings.
//!
//! One peripheral structure (sense amplifier + write driver) is shared by all
//! partitions of a bank. Within a transaction the first activated partition
//! plays the role of `i` and the second the role of `j`:
//!
//! | transistor | connects                                        |
//! |------------|-------------------------------------------------|
//! | M0         | write driver to partition i                     |
//! | M1         | sense amplifier to partition i                  |
//! | M2         | write driver to partition j                     |
//! | M3         | sense amplifier to partition j                  |
//! | M4         | pulse shaper to verify logic (OFF = decoupled)  |
//! | M5 / M6    | data-bus select: verify logic / sense amplifier |

use std::fmt;

use serde::{Deserialize, Serialize};

use super::DeviceError;
use crate::request::{AccessKind, ScheduleDecision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SwitchState {
    On,
    Off,
}

impl SwitchState {
    fn is_on(self) -> bool {
        self == SwitchState::On
    }
}

const M0: u8 = 1 << 0;
const M1: u8 = 1 << 1;
const M2: u8 = 1 << 2;
const M3: u8 = 1 << 3;
const M4: u8 = 1 << 4;
const M5: u8 = 1 << 5;
const M6: u8 = 1 << 6;
const PATHS: u8 = M0 | M1 | M2 | M3;

/// Allowed M0..M3 patterns: idle, the four single-partition rows and the two
/// read-with-write rows. Everything else either shorts two cells onto one
/// sense amplifier or drives two partitions from one pulse shaper.
const VALID_PATHS: [u8; 7] = [0, M0, M1, M2, M3, M0 | M3, M1 | M2];

/// A validated M0..M6 setting. Construction rejects every combination that
/// is not a legal row for the current write-driver mode.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SwitchConfig(u8);

impl SwitchConfig {
    /// Precharged bank: nothing connected, write driver in write mode.
    pub const IDLE: SwitchConfig = SwitchConfig(M4 | M6);

    pub fn new(states: [SwitchState; 7]) -> Result<Self, DeviceError> {
        let bits = states
            .iter()
            .enumerate()
            .fold(0u8, |acc, (k, s)| if s.is_on() { acc | (1 << k) } else { acc });
        Self::from_bits(bits)
    }

    /// Write-mode setting with the given M0..M3 states.
    pub fn from_paths(m0: bool, m1: bool, m2: bool, m3: bool) -> Result<Self, DeviceError> {
        let mut bits = M4 | M6;
        for (on, m) in [(m0, M0), (m1, M1), (m2, M2), (m3, M3)] {
            if on {
                bits |= m;
            }
        }
        Self::from_bits(bits)
    }

    fn from_bits(bits: u8) -> Result<Self, DeviceError> {
        let paths = bits & PATHS;
        let on = |m: u8| bits & m != 0;
        if !VALID_PATHS.contains(&paths) {
            return Err(DeviceError::InvalidConfig(format!(
                "M0..M3 = {} is not a permitted combination",
                fmt_paths(paths)
            )));
        }
        if on(M5) == on(M6) {
            return Err(DeviceError::InvalidConfig("exactly one of M5/M6 must be ON".into()));
        }
        if !on(M4) {
            if paths != 0 && paths != (M1 | M2) && paths != (M0 | M3) {
                return Err(DeviceError::InvalidConfig(format!(
                    "decoupled mode needs both read paths, got M0..M3 = {}",
                    fmt_paths(paths)
                )));
            }
        } else if on(M5) {
            return Err(DeviceError::InvalidConfig(
                "M5 selects the verify logic, which only drives the bus in decoupled mode".into(),
            ));
        }
        Ok(SwitchConfig(bits))
    }

    pub fn is_on(&self, transistor: usize) -> bool {
        assert!(transistor < 7, "only M0..M6 exist");
        self.0 & (1 << transistor) != 0
    }

    pub fn state(&self, transistor: usize) -> SwitchState {
        if self.is_on(transistor) {
            SwitchState::On
        } else {
            SwitchState::Off
        }
    }

    pub fn is_decoupled(&self) -> bool {
        !self.is_on(4)
    }

    /// Number of partitions currently wired to the write pulse shaper.
    pub fn pulse_shaper_connections(&self) -> usize {
        if self.is_decoupled() {
            0
        } else {
            usize::from(self.is_on(0)) + usize::from(self.is_on(2))
        }
    }

    pub(crate) fn decoupled(self) -> Result<Self, DeviceError> {
        Self::from_bits(self.0 & !M4)
    }

    pub(crate) fn transferred(self) -> Result<Self, DeviceError> {
        Self::from_bits((self.0 | M5) & !M6)
    }
}

fn fmt_paths(paths: u8) -> String {
    (0..4)
        .map(|k| if paths & (1 << k) != 0 { '1' } else { '0' })
        .collect()
}

impl fmt::Debug for SwitchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = (0..7)
            .map(|k| format!("M{k}={}", if self.is_on(k) { "ON" } else { "OFF" }))
            .collect();
        write!(f, "SwitchConfig({})", s.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionRole {
    pub partition: u32,
    pub kind: AccessKind,
}

impl PartitionRole {
    /// Roles of a decision in activation order (primary first).
    pub fn of_decision(d: &ScheduleDecision) -> Vec<PartitionRole> {
        d.requests()
            .map(|r| PartitionRole {
                partition: r.partition(),
                kind: r.kind,
            })
            .collect()
    }
}

/// Switch setting that serves `roles`, given in activation order.
pub fn transistor_config(roles: &[PartitionRole]) -> Result<SwitchConfig, DeviceError> {
    use AccessKind::{Read, Write};
    match roles {
        [only] => match only.kind {
            Write => SwitchConfig::from_paths(true, false, false, false),
            Read => SwitchConfig::from_paths(false, true, false, false),
        },
        [i, j] if i.partition == j.partition => Err(DeviceError::InvalidConfig(format!(
            "partition {} cannot be connected twice",
            i.partition
        ))),
        [i, j] => match (i.kind, j.kind) {
            (Write, Read) => SwitchConfig::from_paths(true, false, false, true),
            (Read, Write) => SwitchConfig::from_paths(false, true, true, false),
            // Sense amplifier reads i, the decoupled verify logic reads j.
            (Read, Read) => SwitchConfig::from_paths(false, true, true, false)?.decoupled(),
            (Write, Write) => Err(DeviceError::InvalidConfig(
                "one pulse shaper cannot program two partitions".into(),
            )),
        },
        _ => Err(DeviceError::InvalidConfig(format!(
            "{} partitions requested, at most two may be connected",
            roles.len()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use SwitchState::{Off, On};

    fn role(partition: u32, kind: AccessKind) -> PartitionRole {
        PartitionRole { partition, kind }
    }

    fn paths(c: SwitchConfig) -> [bool; 4] {
        [c.is_on(0), c.is_on(1), c.is_on(2), c.is_on(3)]
    }

    #[test]
    fn write_i_read_j() {
        let c = transistor_config(&[role(0, AccessKind::Write), role(1, AccessKind::Read)]).unwrap();
        assert_eq!(paths(c), [true, false, false, true]);
        assert!(!c.is_decoupled());
    }

    #[test]
    fn read_i_write_j() {
        let c = transistor_config(&[role(0, AccessKind::Read), role(1, AccessKind::Write)]).unwrap();
        assert_eq!(paths(c), [false, true, true, false]);
    }

    #[test]
    fn single_partition_rows() {
        let r = transistor_config(&[role(4, AccessKind::Read)]).unwrap();
        assert_eq!(paths(r), [false, true, false, false]);
        let w = transistor_config(&[role(4, AccessKind::Write)]).unwrap();
        assert_eq!(paths(w), [true, false, false, false]);
        assert_eq!(w.pulse_shaper_connections(), 1);
    }

    #[test]
    fn read_read_is_decoupled() {
        let c = transistor_config(&[role(4, AccessKind::Read), role(3, AccessKind::Read)]).unwrap();
        assert!(c.is_decoupled());
        assert_eq!(c.state(5), Off);
        assert_eq!(c.state(6), On);
        assert_eq!(c.pulse_shaper_connections(), 0);
        let t = c.transferred().unwrap();
        assert_eq!((t.state(5), t.state(6)), (On, Off));
    }

    #[test]
    fn invalid_rows_rejected() {
        // The four "invalid" rows of the read-write table.
        for (m0, m1, m2, m3) in [
            (true, true, false, false),
            (false, false, true, true),
            (true, false, true, false),
            (false, true, false, true),
        ] {
            assert!(
                matches!(SwitchConfig::from_paths(m0, m1, m2, m3), Err(DeviceError::InvalidConfig(_))),
                "{m0} {m1} {m2} {m3}"
            );
        }
        // Three or four paths at once.
        assert!(SwitchConfig::from_paths(true, true, true, false).is_err());
        assert!(SwitchConfig::from_paths(true, true, true, true).is_err());
    }

    #[test]
    fn m5_requires_decoupled() {
        let s = [Off, On, Off, Off, On, On, Off];
        assert!(SwitchConfig::new(s).is_err());
        let s = [Off, On, On, Off, Off, On, Off];
        assert!(SwitchConfig::new(s).is_ok());
        let both = [Off, On, On, Off, Off, On, On];
        assert!(SwitchConfig::new(both).is_err());
    }

    #[test]
    fn write_write_rejected() {
        assert!(transistor_config(&[role(0, AccessKind::Write), role(1, AccessKind::Write)]).is_err());
        assert!(transistor_config(&[role(2, AccessKind::Read), role(2, AccessKind::Write)]).is_err());
        assert!(transistor_config(&[]).is_err());
    }

    #[test]
    fn exhaustive_reachable_configs_are_valid() {
        let mut valid = 0;
        for bits in 0u8..128 {
            if let Ok(c) = SwitchConfig::from_bits(bits) {
                valid += 1;
                assert!(c.pulse_shaper_connections() <= 1);
                if c.is_on(5) {
                    assert!(!c.is_on(6) && c.is_decoupled());
                }
            }
        }
        // 7 write-mode path rows + 3 decoupled path rows x 2 bus selections.
        assert_eq!(valid, 7 + 3 * 2);
    }
}
