use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use palp_core::device::{format_command_stream, parse_command_stream, replay_stream};
use palp_core::sim::Simulator;
use palp_core::stats::RunReport;
use palp_core::trace::{self, ConflictWindow, TraceRecord};

use crate::config::{Overrides, SimConfig, TraceSource};
use crate::SweepParam;

fn load_trace(cfg: &SimConfig) -> Result<Vec<TraceRecord>> {
    match &cfg.trace {
        TraceSource::File(path) => {
            let f = fs::File::open(path).with_context(|| format!("opening trace {}", path.display()))?;
            trace::parse_reader(std::io::BufReader::new(f)).with_context(|| format!("reading trace {}", path.display()))
        }
        TraceSource::Synthetic(_) => Ok(trace::generate(&cfg.synthetic(), &cfg.scheme()?, &cfg.geometry)?),
    }
}

fn simulate_once(cfg: &SimConfig, records: &[TraceRecord]) -> Result<palp_core::sim::RunOutput> {
    let sim = Simulator::new(cfg.sim_params())?;
    let mut out = sim.run_trace(records, &cfg.scheme()?)?;
    out.report.config = serde_json::to_value(cfg)?;
    Ok(out)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn simulate(config: Option<&Path>, overrides: &Overrides) -> Result<ExitCode> {
    let cfg = SimConfig::load(config, overrides)?;
    let records = load_trace(&cfg)?;
    let out = simulate_once(&cfg, &records)?;

    let dir = &cfg.output.dir;
    create_dir(dir)?;
    write(&dir.join("report.json"), &(out.report.to_json() + "\n"))?;
    write(
        &dir.join("report.csv"),
        &format!("{}\n{}\n", RunReport::csv_header(), out.report.csv_row()),
    )?;
    write(&dir.join("commands.txt"), &format_command_stream(&out.commands))?;

    let r = &out.report;
    println!(
        "{}: {} requests, total_cycles={}, avg_access_latency={:.2}, pairs rww={} rwr={}, peak_power={:.4}{}",
        r.policy,
        r.requests,
        r.total_cycles,
        r.avg_access_latency,
        r.pairs_rww,
        r.pairs_rwr,
        r.peak_power,
        if r.truncated { " (truncated)" } else { "" }
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
enum SweepValue {
    Rapl(f64),
    ThB(u64),
}

impl SweepValue {
    fn parse(param: SweepParam, s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match param {
            SweepParam::RaplLimit => SweepValue::Rapl(s.parse().with_context(|| format!("bad rapl_limit value {s:?}"))?),
            SweepParam::ThB => SweepValue::ThB(s.parse().with_context(|| format!("bad th_b value {s:?}"))?),
        })
    }

    fn apply(self, cfg: &mut SimConfig) {
        match self {
            SweepValue::Rapl(v) => cfg.power.rapl_limit = v,
            SweepValue::ThB(v) => cfg.scheduler.th_b = v,
        }
    }

    fn column(self) -> (&'static str, String) {
        match self {
            SweepValue::Rapl(v) => ("rapl_limit", v.to_string()),
            SweepValue::ThB(v) => ("th_b", v.to_string()),
        }
    }
}

pub fn sweep(config: Option<&Path>, overrides: &Overrides, param: SweepParam, values: &[String]) -> Result<ExitCode> {
    let base = SimConfig::load(config, overrides)?;
    let mut points = values
        .iter()
        .map(|s| SweepValue::parse(param, s))
        .collect::<Result<Vec<_>>>()?;
    if points.is_empty() {
        bail!("sweep needs at least one value");
    }
    points.sort_by(|a, b| a.partial_cmp(b).expect("sweep values are finite"));
    points.dedup();

    let configs = points
        .iter()
        .map(|p| {
            let mut cfg = base.clone();
            p.apply(&mut cfg);
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let records = load_trace(&base)?;
    let reports = configs
        .par_iter()
        .map(|cfg| simulate_once(cfg, &records).map(|o| o.report))
        .collect::<Result<Vec<_>>>()?;

    let dir = &base.output.dir;
    create_dir(dir)?;
    let mut csv = format!("parameter,value,{}\n", RunReport::csv_header());
    for (p, r) in points.iter().zip(&reports) {
        let (name, value) = p.column();
        csv.push_str(&format!("{name},{value},{}\n", r.csv_row()));
        println!("{name}={value}: total_cycles={} pairs={}", r.total_cycles, r.pairs_total());
    }
    write(&dir.join("sweep.csv"), &csv)?;
    write(&dir.join("sweep.json"), &(serde_json::to_string_pretty(&reports)? + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Default)]
pub struct SyntheticOverrides {
    pub request_count: Option<usize>,
    pub read_fraction: Option<f64>,
    pub bank_locality: Option<f64>,
    pub partition_spread: Option<f64>,
    pub inter_arrival: Option<f64>,
    pub write_thinning: Option<f64>,
}

pub fn gen_trace(config: Option<&Path>, seed: Option<u64>, knobs: &SyntheticOverrides, output: &Path) -> Result<ExitCode> {
    let mut cfg = SimConfig::load(
        config,
        &Overrides {
            seed,
            ..Default::default()
        },
    )?;
    let mut s = cfg.synthetic();
    if let Some(v) = knobs.request_count {
        s.request_count = v;
    }
    if let Some(v) = knobs.read_fraction {
        s.read_fraction = v;
    }
    if let Some(v) = knobs.bank_locality {
        s.bank_locality = v;
    }
    if let Some(v) = knobs.partition_spread {
        s.partition_spread = v;
    }
    if let Some(v) = knobs.inter_arrival {
        s.inter_arrival = v;
    }
    if let Some(v) = knobs.write_thinning {
        s.write_thinning = v;
    }
    cfg.trace = TraceSource::Synthetic(s);
    let records = load_trace(&cfg)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write(output, &trace::serialize(&records))?;
    println!("wrote {} requests to {}", records.len(), output.display());
    Ok(ExitCode::SUCCESS)
}

pub fn classify(
    config: Option<&Path>,
    trace_path: Option<PathBuf>,
    seed: Option<u64>,
    window: Option<u64>,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let mut cfg = SimConfig::load(
        config,
        &Overrides {
            trace: trace_path,
            seed,
            ..Default::default()
        },
    )?;
    if let Some(w) = window {
        if w == 0 {
            bail!("--window must be positive");
        }
        cfg.conflict_window = ConflictWindow::Cycles(w);
    }
    let records = load_trace(&cfg)?;
    let h = trace::classify_conflicts(&records, &cfg.scheme()?, &cfg.geometry, cfg.conflict_window, &cfg.timing)?;
    let [rr, rw, ww, none] = h.fractions();
    let window = match cfg.conflict_window {
        ConflictWindow::Cycles(n) => n.to_string(),
        ConflictWindow::FcfsCoexistence => "fcfs".to_string(),
    };
    let csv = format!(
        "window,requests,rr,rw,ww,none,rr_share,rw_share,ww_share,none_share\n{window},{},{},{},{},{},{rr},{rw},{ww},{none}\n",
        h.total(),
        h.rr,
        h.rw,
        h.ww,
        h.none
    );
    print!("{csv}");
    if let Some(dir) = out {
        create_dir(dir)?;
        write(&dir.join("classify.csv"), &csv)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn verify(config: Option<&Path>, stream: &Path) -> Result<ExitCode> {
    let cfg = SimConfig::load(config, &Overrides::default())?;
    let text = fs::read_to_string(stream).with_context(|| format!("reading {}", stream.display()))?;
    let commands = parse_command_stream(&text).with_context(|| format!("parsing {}", stream.display()))?;
    let outcome = replay_stream(&commands, &cfg.timing);
    for v in &outcome.violations {
        println!("{:?} violation at cycle {} on bank {}: {}", v.kind, v.cycle, v.bank, v.detail);
    }
    println!(
        "{} commands, final retire cycle {}, {} violation(s)",
        outcome.commands,
        outcome.final_retire,
        outcome.violations.len()
    );
    Ok(if outcome.violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
