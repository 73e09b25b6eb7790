use serde::{Deserialize, Serialize};

use crate::device::TimingParams;
use crate::request::{AccessKind, PairKind, ScheduleDecision};
use crate::Cycle;

/// Running-average power state, in pJ/access.
///
/// `p` is the cycle-weighted mean of the per-interval power of every
/// committed transaction; `n` is the number of cycles it averages over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLedger {
    pub n: Cycle,
    pub p: f64,
    pub p_sa: f64,
    pub p_wd: f64,
    pub peak: f64,
    /// Cycles charged for a read-read pair.
    pub rr_cycles: Cycle,
    /// Cycles charged for a read-write pair.
    pub rw_cycles: Cycle,
}

impl PowerLedger {
    pub fn new(p_sa: f64, p_wd: f64, timing: &TimingParams) -> Self {
        Self {
            n: 0,
            p: 0.0,
            p_sa,
            p_wd,
            peak: 0.0,
            rr_cycles: timing.a_rwr_p,
            rw_cycles: timing.a_rww_p,
        }
    }

    // P + w (x - P) with w = d / (N + d); equal to (N P + d x) / (N + d) but
    // exact at the fixed point x == P and at N == 0.
    fn blend(&self, cycles: Cycle, per_interval: f64) -> f64 {
        let w = cycles as f64 / (self.n + cycles) as f64;
        self.p + w * (per_interval - self.p)
    }

    /// Running average if a pair of `kind` were committed now. `None` for
    /// unpaired decisions.
    pub fn estimate_pair_power(&self, kind: PairKind) -> Option<f64> {
        let cycles = match kind {
            PairKind::RwrPair => self.rr_cycles,
            PairKind::RwwPair => self.rw_cycles,
            PairKind::None => return None,
        };
        Some(self.blend(cycles, self.p_sa + self.p_wd))
    }

    pub fn commit(&mut self, decision: &ScheduleDecision, service_cycles: Cycle) {
        match decision.pair_kind {
            PairKind::None => {
                let e = match decision.primary.kind {
                    AccessKind::Read => self.p_sa,
                    AccessKind::Write => self.p_wd,
                };
                self.p = self.blend(service_cycles, e);
                self.n += service_cycles;
            }
            kind => {
                self.p = self.estimate_pair_power(kind).expect("paired");
                self.n += if kind == PairKind::RwrPair {
                    self.rr_cycles
                } else {
                    self.rw_cycles
                };
            }
        }
        self.peak = self.peak.max(self.p);
    }
}

/// Free-function form of [`PowerLedger::estimate_pair_power`].
pub fn estimate_pair_power(kind: PairKind, ledger: &PowerLedger) -> Option<f64> {
    ledger.estimate_pair_power(kind)
}
