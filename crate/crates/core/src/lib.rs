//! Cycle-level simulator of a phase-change-memory main memory whose banks can
//! serve two partitions at once.
//!
//! The crate is organised bottom-up:
//!
//! * [`address`] decodes physical addresses into channel/rank/bank/partition
//!   coordinates.
//! * [`device`] models banks, the shared peripheral switches and the command
//!   set (including the paired `RWW`/`RWR` paths), and replays command
//!   streams to check legality.
//! * [`scheduler`] holds the read-write queue, the running-average power
//!   ledger and the three scheduling policies.
//! * [`trace`] parses, writes, generates and classifies request traces.
//! * [`stats`] accumulates per-request outcomes into a run report.
//! * [`sim`] ties everything together in a deterministic event loop.

pub mod address;
pub mod device;
pub mod request;
pub mod scheduler;
pub mod sim;
pub mod stats;
pub mod trace;

/// Absolute memory-clock cycle.
pub type Cycle = u64;

pub use address::{DecodedAddress, MappingScheme, SchemeName};
pub use device::{Command, CommandKind, Geometry, TimingParams};
pub use request::{AccessKind, MemoryRequest, PairKind, ScheduleDecision};

pub use scheduler::{Policy, PowerLedger, SchedulerConfig};
pub use sim::{RunOutput, SimParams, Simulator};
pub use stats::RunReport;
