//! Request traces: the text format, a seeded synthetic generator and the
//! bank-conflict classifier.
//!
//! A trace file holds one request per line, `cycle SP kind SP 0xADDR LF`,
//! with a decimal cycle, `R` or `W`, and a hexadecimal physical address.
//! Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::address::{AddressError, ConflictKind, DecodedAddress, MappingScheme};
use crate::device::{Geometry, TimingParams};
use crate::request::{AccessKind, MemoryRequest};
use crate::Cycle;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: cycle {cycle} is earlier than the previous cycle {previous}")]
    NonMonotonicCycle { line: usize, cycle: Cycle, previous: Cycle },
    #[error("invalid synthetic trace configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Address(#[from] AddressError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceRecord {
    pub arrival_cycle: Cycle,
    pub kind: AccessKind,
    pub address: u64,
}

pub fn parse(source: &str) -> Result<Vec<TraceRecord>, TraceError> {
    parse_reader(source.as_bytes())
}

pub fn parse_reader<R: BufRead>(reader: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    let mut previous: Option<Cycle> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let record = parse_line(text).map_err(|message| TraceError::Parse { line: line_no, message })?;
        if let Some(prev) = previous.filter(|&p| record.arrival_cycle < p) {
            return Err(TraceError::NonMonotonicCycle {
                line: line_no,
                cycle: record.arrival_cycle,
                previous: prev,
            });
        }
        previous = Some(record.arrival_cycle);
        out.push(record);
    }
    Ok(out)
}

fn parse_line(text: &str) -> Result<TraceRecord, String> {
    let mut parts = text.split_whitespace();
    let (Some(cycle), Some(kind), Some(addr), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(format!("expected `<cycle> <R|W> <hex-address>`, got {text:?}"));
    };
    let arrival_cycle = cycle.parse().map_err(|_| format!("bad cycle {cycle:?}"))?;
    let kind = match kind {
        "R" => AccessKind::Read,
        "W" => AccessKind::Write,
        other => return Err(format!("kind must be R or W, got {other:?}")),
    };
    let digits = addr
        .strip_prefix("0x")
        .or_else(|| addr.strip_prefix("0X"))
        .ok_or_else(|| format!("address {addr:?} lacks a 0x prefix"))?;
    let address = u64::from_str_radix(digits, 16).map_err(|_| format!("bad hex address {addr:?}"))?;
    Ok(TraceRecord {
        arrival_cycle,
        kind,
        address,
    })
}

pub fn format_record(r: &TraceRecord) -> String {
    format!("{} {} 0x{:X}", r.arrival_cycle, r.kind.mnemonic(), r.address)
}

pub fn serialize(trace: &[TraceRecord]) -> String {
    let mut s = String::with_capacity(trace.len() * 20);
    for r in trace {
        writeln!(s, "{}", format_record(r)).expect("writing to a String cannot fail");
    }
    s
}

/// Decodes `trace` into queue requests numbered from 0 in file order.
pub fn to_requests(trace: &[TraceRecord], scheme: &MappingScheme, g: &Geometry) -> Result<Vec<MemoryRequest>, AddressError> {
    trace
        .iter()
        .enumerate()
        .map(|(id, r)| Ok(MemoryRequest::new(id as u64, r.kind, r.arrival_cycle, scheme.decode(r.address, g)?, g)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub request_count: usize,
    pub read_fraction: f64,
    /// Probability that a request reuses the previous request's bank.
    pub bank_locality: f64,
    /// Probability that a bank-reusing request moves to another partition.
    pub partition_spread: f64,
    /// Mean gap between arrivals, in cycles.
    pub inter_arrival: f64,
    pub seed: u64,
    /// Fraction of generated writes dropped afterwards, standing in for a
    /// write-absorbing cache in front of memory.
    pub write_thinning: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            request_count: 10_000,
            read_fraction: 0.7,
            bank_locality: 0.5,
            partition_spread: 0.8,
            inter_arrival: 8.0,
            seed: 1,
            write_thinning: 0.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        for (name, v) in [
            ("read_fraction", self.read_fraction),
            ("bank_locality", self.bank_locality),
            ("partition_spread", self.partition_spread),
            ("write_thinning", self.write_thinning),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(TraceError::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !self.inter_arrival.is_finite() || self.inter_arrival < 0.0 {
            return Err(TraceError::InvalidConfig(format!(
                "inter_arrival must be a finite non-negative mean, got {}",
                self.inter_arrival
            )));
        }
        Ok(())
    }
}

/// Generates a trace; the output depends only on the arguments.
pub fn generate(cfg: &SyntheticConfig, scheme: &MappingScheme, g: &Geometry) -> Result<Vec<TraceRecord>, TraceError> {
    cfg.validate()?;
    scheme.validate(g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gaps = Geometric::new(1.0 / (1.0 + cfg.inter_arrival))
        .map_err(|e| TraceError::InvalidConfig(format!("inter_arrival: {e}")))?;
    let banks = g.total_banks();
    let per_channel = (g.ranks_per_channel * g.banks_per_rank) as usize;

    let mut out = Vec::with_capacity(cfg.request_count);
    let mut cycle: Cycle = 0;
    let mut prev: Option<(usize, u32)> = None;
    for i in 0..cfg.request_count {
        if i > 0 {
            cycle += gaps.sample(&mut rng);
        }
        let kind = if rng.gen_bool(cfg.read_fraction) {
            AccessKind::Read
        } else {
            AccessKind::Write
        };
        let (bank, partition) = match prev {
            Some((bank, part)) if rng.gen_bool(cfg.bank_locality) => {
                let part = if g.partitions_per_bank > 1 && rng.gen_bool(cfg.partition_spread) {
                    // Uniform over the other partitions.
                    let shift = rng.gen_range(1..g.partitions_per_bank);
                    (part + shift) % g.partitions_per_bank
                } else {
                    part
                };
                (bank, part)
            }
            _ => (rng.gen_range(0..banks), rng.gen_range(0..g.partitions_per_bank)),
        };
        prev = Some((bank, partition));
        let d = DecodedAddress {
            channel: (bank / per_channel) as u32,
            rank: ((bank % per_channel) / g.banks_per_rank as usize) as u32,
            bank: (bank % g.banks_per_rank as usize) as u32,
            partition,
            row: rng.gen_range(0..g.rows_per_partition),
            column: rng.gen_range(0..g.columns_per_row),
            byte_in_line: 0,
        };
        let keep = kind == AccessKind::Read || cfg.write_thinning == 0.0 || !rng.gen_bool(cfg.write_thinning);
        if keep {
            out.push(TraceRecord {
                arrival_cycle: cycle,
                kind,
                address: scheme.encode(&d, g)?,
            });
        }
    }
    Ok(out)
}

/// Drops each write with probability `fraction`; reads are untouched.
pub fn thin_writes(trace: &[TraceRecord], fraction: f64, seed: u64) -> Vec<TraceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    trace
        .iter()
        .filter(|r| r.kind == AccessKind::Read || !rng.gen_bool(fraction.clamp(0.0, 1.0)))
        .copied()
        .collect()
}

/// When an older same-bank request counts as conflicting with a newer one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictWindow {
    /// The older request arrived at most this many cycles earlier.
    Cycles(Cycle),
    /// The older request has not completed by the newer one's arrival when
    /// the trace is served first-come first-served, one request at a time
    /// per bank.
    FcfsCoexistence,
}

impl Default for ConflictWindow {
    fn default() -> Self {
        ConflictWindow::FcfsCoexistence
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConflictHistogram {
    pub rr: u64,
    pub rw: u64,
    pub ww: u64,
    pub none: u64,
}

impl ConflictHistogram {
    pub fn total(&self) -> u64 {
        self.rr + self.rw + self.ww + self.none
    }

    pub fn add(&mut self, kind: ConflictKind) {
        match kind {
            ConflictKind::RR => self.rr += 1,
            ConflictKind::RW => self.rw += 1,
            ConflictKind::WW => self.ww += 1,
            ConflictKind::None => self.none += 1,
        }
    }

    /// `[rr, rw, ww, none]` as fractions of all requests; all zero for an
    /// empty trace.
    pub fn fractions(&self) -> [f64; 4] {
        let t = self.total();
        if t == 0 {
            return [0.0; 4];
        }
        [self.rr, self.rw, self.ww, self.none].map(|c| c as f64 / t as f64)
    }

    pub fn merge(&mut self, other: &ConflictHistogram) {
        self.rr += other.rr;
        self.rw += other.rw;
        self.ww += other.ww;
        self.none += other.none;
    }
}

/// Conflict class of every request, in trace order.
///
/// Within a bank both criteria are monotone in arrival order, so the most
/// recent qualifying older request is always the bank's previous request.
pub fn classify_each(
    requests: &[MemoryRequest],
    banks: usize,
    window: ConflictWindow,
    timing: &TimingParams,
) -> Vec<ConflictKind> {
    // Per bank: (kind, arrival, FCFS completion) of the latest request.
    let mut last: Vec<Option<(AccessKind, Cycle, Cycle)>> = vec![None; banks];
    requests
        .iter()
        .map(|r| {
            let slot = &mut last[r.bank];
            let class = match *slot {
                Some((kind, arrival, complete)) => {
                    let overlaps = match window {
                        ConflictWindow::Cycles(w) => r.arrival_cycle - arrival <= w,
                        ConflictWindow::FcfsCoexistence => complete > r.arrival_cycle,
                    };
                    if overlaps {
                        ConflictKind::of_kinds(kind, r.kind)
                    } else {
                        ConflictKind::None
                    }
                }
                None => ConflictKind::None,
            };
            let free = slot.map_or(0, |s| s.2);
            let complete = free.max(r.arrival_cycle) + timing.single_service(r.kind);
            *slot = Some((r.kind, r.arrival_cycle, complete));
            class
        })
        .collect()
}

pub fn classify_conflicts(
    trace: &[TraceRecord],
    scheme: &MappingScheme,
    g: &Geometry,
    window: ConflictWindow,
    timing: &TimingParams,
) -> Result<ConflictHistogram, AddressError> {
    let requests = to_requests(trace, scheme, g)?;
    let mut h = ConflictHistogram::default();
    for k in classify_each(&requests, g.total_banks(), window, timing) {
        h.add(k);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::address::SchemeName;
    use proptest::prelude::*;

    fn setup() -> (MappingScheme, Geometry) {
        let g = Geometry::default();
        (MappingScheme::named(SchemeName::DefaultMicron, &g).unwrap(), g)
    }

    fn rec(cycle: Cycle, kind: AccessKind, d: DecodedAddress) -> TraceRecord {
        let (s, g) = setup();
        TraceRecord {
            arrival_cycle: cycle,
            kind,
            address: s.encode(&d, &g).unwrap(),
        }
    }

    fn at_bank(bank: u32) -> DecodedAddress {
        DecodedAddress {
            bank,
            ..Default::default()
        }
    }

    #[test]
    fn parse_single_line() {
        let t = parse("0 R 0x0\n").unwrap();
        assert_eq!(
            t,
            [TraceRecord {
                arrival_cycle: 0,
                kind: AccessKind::Read,
                address: 0
            }]
        );
    }

    #[test]
    fn non_monotonic_rejected() {
        let err = parse("5 W 0x3F8B00\n3 R 0x0\n").unwrap_err();
        assert!(matches!(err, TraceError::NonMonotonicCycle { line: 2, .. }), "{err}");
    }

    #[test]
    fn comments_skipped() {
        let t = parse("# header\n\n1 W 0xff\n  # indented\n2 R 0X10\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].address, 0xff);
        assert_eq!(t[1].address, 0x10);
    }

    #[test]
    fn parse_errors_carry_line() {
        for bad in ["1 X 0x0", "1 R 12", "x R 0x0", "1 R 0x0 extra", "1 R", "1 R 0xZZ"] {
            let src = format!("0 R 0x0\n{bad}\n");
            assert!(matches!(parse(&src), Err(TraceError::Parse { line: 2, .. })), "{bad}");
        }
    }

    #[test]
    fn serialize_format_is_exact() {
        let t = [
            TraceRecord {
                arrival_cycle: 12,
                kind: AccessKind::Write,
                address: 0x3f8b00,
            },
            TraceRecord {
                arrival_cycle: 12,
                kind: AccessKind::Read,
                address: 0,
            },
        ];
        assert_eq!(serialize(&t), "12 W 0x3F8B00\n12 R 0x0\n");
    }

    #[test]
    fn read_fraction_one_has_no_writes() {
        let (s, g) = setup();
        let cfg = SyntheticConfig {
            read_fraction: 1.0,
            request_count: 2000,
            ..Default::default()
        };
        assert!(generate(&cfg, &s, &g).unwrap().iter().all(|r| r.kind == AccessKind::Read));
    }

    #[test]
    fn full_locality_stays_in_one_partition() {
        let (s, g) = setup();
        let cfg = SyntheticConfig {
            bank_locality: 1.0,
            partition_spread: 0.0,
            request_count: 500,
            ..Default::default()
        };
        let reqs = to_requests(&generate(&cfg, &s, &g).unwrap(), &s, &g).unwrap();
        let first = (reqs[0].bank, reqs[0].partition());
        assert!(reqs.iter().all(|r| (r.bank, r.partition()) == first));
    }

    #[test]
    fn same_seed_same_bytes() {
        let (s, g) = setup();
        let cfg = SyntheticConfig::default();
        assert_eq!(
            serialize(&generate(&cfg, &s, &g).unwrap()),
            serialize(&generate(&cfg, &s, &g).unwrap())
        );
        let other = SyntheticConfig { seed: 2, ..cfg };
        assert_ne!(generate(&cfg, &s, &g).unwrap(), generate(&other, &s, &g).unwrap());
    }

    #[test]
    fn read_fraction_within_two_percent() {
        let (s, g) = setup();
        let cfg = SyntheticConfig {
            request_count: 100_000,
            read_fraction: 0.85,
            ..Default::default()
        };
        let t = generate(&cfg, &s, &g).unwrap();
        let reads = t.iter().filter(|r| r.kind == AccessKind::Read).count() as f64;
        assert!((reads / t.len() as f64 - 0.85).abs() < 0.02);
    }

    #[test]
    fn invalid_config_rejected() {
        let (s, g) = setup();
        let cfg = SyntheticConfig {
            bank_locality: 1.5,
            ..Default::default()
        };
        assert!(matches!(generate(&cfg, &s, &g), Err(TraceError::InvalidConfig(_))));
    }

    #[test]
    fn thinning_drops_only_writes() {
        let (s, g) = setup();
        let t = generate(&SyntheticConfig::default(), &s, &g).unwrap();
        let thin = thin_writes(&t, 1.0, 3);
        assert!(thin.iter().all(|r| r.kind == AccessKind::Read));
        assert_eq!(thin.len(), t.iter().filter(|r| r.kind == AccessKind::Read).count());
        assert_eq!(thin_writes(&t, 0.0, 3), t);
    }

    #[test]
    fn distinct_banks_never_conflict() {
        let (s, g) = setup();
        let t: Vec<_> = (0..8).map(|b| rec(0, AccessKind::Read, at_bank(b))).collect();
        for w in [ConflictWindow::FcfsCoexistence, ConflictWindow::Cycles(1000)] {
            let h = classify_conflicts(&t, &s, &g, w, &TimingParams::default()).unwrap();
            assert_eq!(h.none, 8);
            assert_eq!(h.fractions()[3], 1.0);
        }
    }

    #[test]
    fn alternating_rw_is_rw_dominated() {
        let (s, g) = setup();
        let t: Vec<_> = (0..20)
            .map(|i| {
                let k = if i % 2 == 0 { AccessKind::Read } else { AccessKind::Write };
                rec(i, k, at_bank(2))
            })
            .collect();
        let h = classify_conflicts(&t, &s, &g, ConflictWindow::Cycles(100), &TimingParams::default()).unwrap();
        assert_eq!((h.rw, h.none, h.rr, h.ww), (19, 1, 0, 0));
    }

    #[test]
    fn fcfs_window_ends_at_completion() {
        let (s, g) = setup();
        // A read completes at 19: an arrival at 18 conflicts, one at 19 does not.
        let t = [
            rec(0, AccessKind::Read, at_bank(1)),
            rec(18, AccessKind::Read, at_bank(1)),
            rec(38, AccessKind::Write, at_bank(1)),
            rec(84, AccessKind::Write, at_bank(1)),
        ];
        let h = classify_conflicts(&t, &s, &g, ConflictWindow::FcfsCoexistence, &TimingParams::default()).unwrap();
        // Second read waits until 19 and finishes at 38; the first write
        // then runs 38..85.
        assert_eq!((h.rr, h.rw, h.ww, h.none), (1, 0, 1, 2));
    }

    proptest! {
        #[test]
        fn serialize_parse_roundtrip(recs in proptest::collection::vec((0u64..1000, any::<bool>(), 0u64..(1 << 37)), 0..50)) {
            let mut cycle = 0;
            let t: Vec<TraceRecord> = recs
                .into_iter()
                .map(|(gap, read, address)| {
                    cycle += gap;
                    TraceRecord {
                        arrival_cycle: cycle,
                        kind: if read { AccessKind::Read } else { AccessKind::Write },
                        address,
                    }
                })
                .collect();
            prop_assert_eq!(parse(&serialize(&t)).unwrap(), t);
        }

        #[test]
        fn fractions_sum_to_one(seed in any::<u64>(), loc in 0.0f64..1.0, rf in 0.0f64..1.0) {
            let (s, g) = setup();
            let cfg = SyntheticConfig { request_count: 300, seed, bank_locality: loc, read_fraction: rf, ..Default::default() };
            let t = generate(&cfg, &s, &g).unwrap();
            let h = classify_conflicts(&t, &s, &g, ConflictWindow::FcfsCoexistence, &TimingParams::default()).unwrap();
            prop_assert_eq!(h.total(), 300);
            prop_assert!((h.fractions().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
