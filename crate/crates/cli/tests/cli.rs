use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use palp_core::address::{DecodedAddress, MappingScheme};
use palp_core::device::Geometry;
use palp_core::request::AccessKind;
use palp_core::trace::{serialize, TraceRecord};
use tempfile::TempDir;

fn palp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_palp")).args(args).output().expect("spawn palp")
}

fn six_request_trace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../traces/six_request_bank_conflict.trace")
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn run_ok(args: &[&str]) -> Output {
    let out = palp(args);
    assert!(
        out.status.success(),
        "palp {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_trace(dir: &Path, name: &str, records: &[TraceRecord]) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serialize(records)).unwrap();
    path
}

#[test]
fn six_request_totals_per_policy() {
    let tmp = TempDir::new().unwrap();
    let trace = six_request_trace();
    for (policy, total) in [("palp", 126), ("baseline_fcfs", 170), ("multipartition", 134)] {
        let out = tmp.path().join(policy);
        run_ok(&[
            "simulate",
            "--trace",
            trace.to_str().unwrap(),
            "--policy",
            policy,
            "--rapl",
            "10",
            "--out",
            out.to_str().unwrap(),
        ]);
        let r = report(&out);
        assert_eq!(r["total_cycles"], total, "{policy}");
        assert_eq!(r["requests"], 6);
        assert_eq!(r["policy"], policy);
        let csv = fs::read_to_string(out.join("report.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
        // The written command stream replays cleanly.
        let stream = out.join("commands.txt");
        let v = run_ok(&["verify", stream.to_str().unwrap()]);
        let text = String::from_utf8_lossy(&v.stdout);
        assert!(text.contains(&format!("final retire cycle {total}, 0 violation(s)")), "{text}");
    }
}

#[test]
fn empty_trace_reports_zero_requests() {
    let tmp = TempDir::new().unwrap();
    let trace = tmp.path().join("empty.trace");
    fs::write(&trace, "# nothing\n").unwrap();
    let out = tmp.path().join("out");
    run_ok(&["simulate", "--trace", trace.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let r = report(&out);
    assert_eq!(r["requests"], 0);
    assert_eq!(r["total_cycles"], 0);
}

#[test]
fn reports_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("out");
    let read_all = || ["report.json", "report.csv", "commands.txt"].map(|f| fs::read_to_string(dir.join(f)).unwrap());
    run_ok(&["simulate", "--seed", "5", "--out", dir.to_str().unwrap()]);
    let first = read_all();
    run_ok(&["simulate", "--seed", "5", "--out", dir.to_str().unwrap()]);
    assert!(first == read_all(), "outputs differ between identical runs");
    run_ok(&["simulate", "--seed", "6", "--out", dir.to_str().unwrap()]);
    assert!(first[0] != read_all()[0]);
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"trace": {{"file": "{}"}}, "scheduler": {{"policy": "baseline_fcfs"}}, "power": {{"rapl_limit": 10.0}}}}"#,
            six_request_trace().display()
        ),
    )
    .unwrap();
    let out = tmp.path().join("out");
    run_ok(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(report(&out)["total_cycles"], 170);
    run_ok(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--policy",
        "palp",
        "--out",
        out.to_str().unwrap(),
    ]);
    let r = report(&out);
    assert_eq!(r["total_cycles"], 126);
    assert_eq!(r["config"]["scheduler"]["policy"], "palp");
}

#[test]
fn committed_default_config_loads() {
    let tmp = TempDir::new().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    let trace = six_request_trace();
    run_ok(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
}

#[test]
fn user_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"power": {"rapl_limit": -2}}"#).unwrap();
    let typo = tmp.path().join("typo.json");
    fs::write(&typo, r#"{"polcy": "palp"}"#).unwrap();
    let trace = tmp.path().join("bad.trace");
    fs::write(&trace, "5 W 0x10\n3 R 0x0\n").unwrap();
    for args in [
        vec!["simulate", "--config", bad.to_str().unwrap()],
        vec!["simulate", "--config", typo.to_str().unwrap()],
        vec!["simulate", "--trace", "/definitely/missing.trace"],
        vec!["simulate", "--trace", trace.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()],
        vec!["simulate", "--policy", "frfcfs"],
        vec!["sweep", "--param", "rapl_limit", "--values", "x"],
        vec!["frobnicate"],
    ] {
        let out = palp(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(palp(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_flags_illegal_stream() {
    let tmp = TempDir::new().unwrap();
    let stream = tmp.path().join("overlap.txt");
    fs::write(&stream, "0 A 0 1 2 3\n1 W 0\n2 A 0 2 2 3\n3 W 0\n46 P 0\n48 P 0\n").unwrap();
    let out = palp(&["verify", stream.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Timing violation"));
    let garbage = tmp.path().join("garbage.txt");
    fs::write(&garbage, "0 ZAP 0\n").unwrap();
    assert_eq!(palp(&["verify", garbage.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn gen_trace_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a.trace"), tmp.path().join("b.trace"), tmp.path().join("c.trace"));
    run_ok(&["gen-trace", "--seed", "42", "--requests", "500", a.to_str().unwrap()]);
    run_ok(&["gen-trace", "--seed", "42", "--requests", "500", b.to_str().unwrap()]);
    run_ok(&["gen-trace", "--seed", "43", "--requests", "500", c.to_str().unwrap()]);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_ne!(text, fs::read_to_string(&c).unwrap());
    assert_eq!(text.lines().count(), 500);
    assert!(text.lines().all(|l| l.split(' ').count() == 3 && l.contains(" 0x")));
}

fn classify(trace: &Path) -> Vec<String> {
    let out = run_ok(&["classify", "--trace", trace.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).expect("csv row");
    row.split(',').map(str::to_string).collect()
}

#[test]
fn classify_distinct_banks_is_conflict_free() {
    let tmp = TempDir::new().unwrap();
    let g = Geometry::default();
    let s = MappingScheme::default_micron(&g).unwrap();
    let records: Vec<TraceRecord> = (0..g.banks_per_rank)
        .map(|b| TraceRecord {
            arrival_cycle: 0,
            kind: AccessKind::Read,
            address: s
                .encode(
                    &DecodedAddress {
                        bank: b,
                        ..Default::default()
                    },
                    &g,
                )
                .unwrap(),
        })
        .collect();
    let trace = write_trace(tmp.path(), "distinct.trace", &records);
    let row = classify(&trace);
    // window,requests,rr,rw,ww,none,rr_share,rw_share,ww_share,none_share
    assert_eq!(row[1], "8");
    assert_eq!(row[5], "8");
    assert_eq!(row[9], "1");
}

#[test]
fn classify_read_heavy_locality_trace() {
    let tmp = TempDir::new().unwrap();
    let trace = tmp.path().join("local.trace");
    run_ok(&[
        "gen-trace",
        "--requests",
        "5000",
        "--read-fraction",
        "0.85",
        "--bank-locality",
        "0.6",
        trace.to_str().unwrap(),
    ]);
    let row = classify(&trace);
    let share = |i: usize| row[i].parse::<f64>().unwrap();
    assert!(share(6) > share(7) && share(7) > share(8), "{row:?}");
}

#[test]
fn sweep_rows_and_single_value_equivalence() {
    let tmp = TempDir::new().unwrap();
    let trace = tmp.path().join("t.trace");
    run_ok(&[
        "gen-trace",
        "--requests",
        "3000",
        "--bank-locality",
        "0.9",
        "--inter-arrival",
        "4",
        trace.to_str().unwrap(),
    ]);
    let sweep_dir = tmp.path().join("sweep");
    run_ok(&[
        "sweep",
        "--trace",
        trace.to_str().unwrap(),
        "--param",
        "rapl_limit",
        "--values",
        "0.4,0.2,0.3",
        "--out",
        sweep_dir.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r[1]).collect::<Vec<_>>(), ["0.2", "0.3", "0.4"]);
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "total_cycles").unwrap();
    let totals: Vec<u64> = rows.iter().map(|r| r[col].parse().unwrap()).collect();
    assert!(totals.windows(2).all(|w| w[1] <= w[0]), "{totals:?}");

    let single = tmp.path().join("single");
    run_ok(&[
        "sweep",
        "--trace",
        trace.to_str().unwrap(),
        "--param",
        "th_b",
        "--values",
        "8",
        "--out",
        single.to_str().unwrap(),
    ]);
    let sim = tmp.path().join("sim");
    run_ok(&["simulate", "--trace", trace.to_str().unwrap(), "--out", sim.to_str().unwrap()]);
    let sweep_row = fs::read_to_string(single.join("sweep.csv")).unwrap();
    let sweep_row = sweep_row.lines().nth(1).unwrap();
    let sim_row = fs::read_to_string(sim.join("report.csv")).unwrap();
    let sim_row = sim_row.lines().nth(1).unwrap();
    assert_eq!(sweep_row, format!("th_b,8,{sim_row}"));
}
