use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use election_core::metrics::RunReport;
use election_core::simnet::{Record, Trace};

fn election(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_election"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn two_node(dir: &Path) -> String {
    let p = dir.join("two.txt");
    fs::write(&p, "2 1\n0 1\n").unwrap();
    p.to_string_lossy().into_owned()
}

const SMOKE: &[&str] = &[
    "--c",
    "1",
    "--quorum-fraction",
    "1",
    "--forced-candidates",
    "1",
    "--forced-referees",
    "1",
    "--adversary",
    "unit",
    "--keep-traces",
    "all",
];

fn smoke(dir: &Path, out: &str) -> Output {
    let edges = two_node(dir);
    let out = dir.join(out);
    let mut args = vec!["run", "--edge-list", &edges, "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMOKE);
    election(&args)
}

#[test]
fn two_node_smoke_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = smoke(dir.path(), "out");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: RunReport = serde_json::from_slice(
        &fs::read(dir.path().join("out/reports/edge-list-n2-unit-00000.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report.leaders_elected.len(), 1);
    assert_eq!(report.total_transmissions, 4);
    let csv = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("edge-list,2,unit,1,1,1,1,"), "{row}");
    assert!(stdout(&o)
        .lines()
        .any(|l| l.starts_with("PASS") && l.contains(" safety ")));
}

#[test]
fn size_one_is_rejected() {
    let o = election(&["run", "--graph", "ring", "--n", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("graph.sizes"), "{err}");
}

#[test]
fn missing_graph_is_a_usage_error() {
    let o = election(&["run", "--n", "8"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = election(&[
            "run",
            "--graph",
            "ring",
            "--n",
            "16,32",
            "--adversary",
            "uniform,arbitrary-order",
            "--trials",
            "6",
            "--seed",
            "41",
            "--preset",
            "desk",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.code().is_some());
        fs::read(out.join("summary.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 5);
}

#[test]
fn config_file_round_trips_through_print() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "adversaries = [\"unit\"]\ntrials = 2\nseed = 3\n[graph]\nfamily = \"complete\"\nsizes = [8]\n[protocol]\nn_estimate = \"upper:1.5\"\n",
    )
    .unwrap();
    let o = election(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "5",
        "--print-config",
    ]);
    assert!(o.status.success());
    let printed = stdout(&o);
    assert!(printed.contains("trials = 5"), "{printed}");
    assert!(printed.contains("n_estimate = \"upper:1.5\""), "{printed}");
    let again = dir.path().join("d.toml");
    fs::write(&again, &printed).unwrap();
    let o2 = election(&["run", "--config", again.to_str().unwrap(), "--print-config"]);
    assert_eq!(stdout(&o2), printed);
}

#[test]
fn replay_accepts_kept_trace_and_rejects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    assert!(smoke(dir.path(), "out").status.success());
    let trace_path = dir
        .path()
        .join("out/traces/edge-list-n2-unit-00000.jsonl.gz");
    let o = election(&["replay", trace_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("regenerated identically"));

    let mut t = Trace::load(&trace_path).unwrap();
    let k = t
        .records
        .iter()
        .position(|r| matches!(r, Record::Deliver { .. }))
        .unwrap();
    t.records.remove(k);
    let bad = dir.path().join("bad.jsonl");
    t.save(&bad).unwrap();
    let o = election(&["replay", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&format!("record {k}")), "{err}");
}

#[test]
fn flood_reports_pipelining_bound() {
    let o = election(&["flood", "--graph", "ring", "--n", "8", "--k", "5"]);
    assert!(o.status.success());
    assert!(
        stdout(&o).contains("completion=8 D+k-1=8"),
        "{}",
        stdout(&o)
    );
}
