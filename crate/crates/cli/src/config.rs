//! The JSON simulation config. Every field is optional; missing fields take
//! the defaults in `configs/default.json`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use palp_core::address::{FieldSlice, MappingScheme, SchemeName, DEFAULT_BYTE_BITS};
use palp_core::device::{Geometry, TimingParams};
use palp_core::scheduler::{AgeUnit, Policy, SchedulerConfig};
use palp_core::sim::SimParams;
use palp_core::trace::{ConflictWindow, SyntheticConfig};
use palp_core::Cycle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub geometry: Geometry,
    pub timing: TimingParams,
    pub mapping: MappingConfig,
    pub scheduler: SchedulerSection,
    pub power: PowerSection,
    pub trace: TraceSource,
    pub output: OutputSection,
    /// Seed for synthetic traces; overrides `trace.synthetic.seed`.
    pub seed: Option<u64>,
    pub max_cycles: Option<Cycle>,
    pub conflict_window: ConflictWindow,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry::default(),
            timing: TimingParams::default(),
            mapping: MappingConfig::default(),
            scheduler: SchedulerSection::default(),
            power: PowerSection::default(),
            trace: TraceSource::Synthetic(SyntheticConfig::default()),
            output: OutputSection::default(),
            seed: None,
            max_cycles: None,
            conflict_window: ConflictWindow::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    pub scheme: SchemeName,
    /// Only for `custom`.
    pub fields: Vec<FieldSlice>,
    pub byte_bits: u32,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            scheme: SchemeName::DefaultMicron,
            fields: Vec::new(),
            byte_bits: DEFAULT_BYTE_BITS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerSection {
    pub policy: Policy,
    pub th_b: u64,
    pub th_b_unit: AgeUnit,
    pub multipartition_guard: bool,
    pub queue_capacity: Option<usize>,
}

impl Default for SchedulerSection {
    fn default() -> Self {
        let d = SchedulerConfig::default();
        Self {
            policy: d.policy,
            th_b: d.th_b,
            th_b_unit: d.th_b_unit,
            multipartition_guard: d.multipartition_guard,
            queue_capacity: d.queue_capacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub p_sa: f64,
    pub p_wd: f64,
    pub rapl_limit: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        let d = SimParams::default();
        Self {
            p_sa: d.p_sa,
            p_wd: d.p_wd,
            rapl_limit: d.scheduler.rapl_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceSource {
    File(PathBuf),
    Synthetic(SyntheticConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub policy: Option<Policy>,
    pub trace: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub rapl: Option<f64>,
    pub thb: Option<u64>,
}

impl SimConfig {
    /// Defaults, then `path` if given, then `overrides`; validated.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                let mut cfg: SimConfig =
                    serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
                // Relative trace paths are relative to the config file.
                if let TraceSource::File(f) = &mut cfg.trace {
                    if f.is_relative() {
                        if let Some(dir) = p.parent() {
                            *f = dir.join(&*f);
                        }
                    }
                }
                cfg
            }
            None => SimConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = o.policy {
            self.scheduler.policy = p;
        }
        if let Some(t) = &o.trace {
            self.trace = TraceSource::File(t.clone());
        }
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(d) = &o.out {
            self.output.dir = d.clone();
        }
        if let Some(r) = o.rapl {
            self.power.rapl_limit = r;
        }
        if let Some(t) = o.thb {
            self.scheduler.th_b = t;
        }
    }

    pub fn validate(&self) -> Result<()> {
        palp_core::sim::Simulator::new(self.sim_params())?;
        self.scheme()?;
        match &self.trace {
            TraceSource::File(p) if !p.is_file() => bail!("trace file {} does not exist", p.display()),
            TraceSource::File(_) => {}
            TraceSource::Synthetic(s) => s.validate()?,
        }
        if let ConflictWindow::Cycles(0) = self.conflict_window {
            bail!("conflict_window must be positive");
        }
        Ok(())
    }

    pub fn scheduler_config(&self) -> SchedulerConfig {
        SchedulerConfig {
            policy: self.scheduler.policy,
            th_b: self.scheduler.th_b,
            th_b_unit: self.scheduler.th_b_unit,
            rapl_limit: self.power.rapl_limit,
            multipartition_guard: self.scheduler.multipartition_guard,
            queue_capacity: self.scheduler.queue_capacity,
        }
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            geometry: self.geometry,
            timing: self.timing,
            scheduler: self.scheduler_config(),
            p_sa: self.power.p_sa,
            p_wd: self.power.p_wd,
            max_cycles: self.max_cycles,
            conflict_window: self.conflict_window,
        }
    }

    pub fn scheme(&self) -> Result<MappingScheme> {
        let m = &self.mapping;
        let scheme = match m.scheme {
            SchemeName::Custom => MappingScheme::custom(&m.fields, &self.geometry)?,
            name => {
                if !m.fields.is_empty() {
                    bail!("mapping.fields is only allowed with the custom scheme");
                }
                MappingScheme::named_with_byte_bits(name, &self.geometry, m.byte_bits)?
            }
        };
        Ok(scheme)
    }

    /// Synthetic settings with the top-level seed applied.
    pub fn synthetic(&self) -> SyntheticConfig {
        let mut s = match &self.trace {
            TraceSource::Synthetic(s) => *s,
            TraceSource::File(_) => SyntheticConfig::default(),
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s
    }
}
