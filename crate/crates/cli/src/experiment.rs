//! Runs a configured sweep: every (size, adversary) point for the
//! configured number of trials, then the metric checks over all reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use election_core::graph::{generate, Graph, GraphFamily};
use election_core::metrics::{
    any_hard_failure, check_message_bound, check_role_concentration, check_time_bound, summarize,
    verify_liveness, verify_safety, verify_trace, write_csv, BoundVerdict, Liveness, RunReport,
    Series, Status, SweepRow, Verdict,
};
use election_core::protocol::ProtocolParams;
use election_core::seed::derive;
use election_core::simnet::{run, AdversaryKind, Roles, RunOptions, Trace, DEFAULT_EVENT_BUDGET};
use election_core::Result;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Retention};

/// Exactly-one-leader rate each point must reach.
pub const LIVENESS_RATE: f64 = 0.99;

struct Point {
    n: usize,
    adversary: AdversaryKind,
    family: GraphFamily,
    /// Built once for deterministic families.
    graph: Option<Graph>,
    params: ProtocolParams,
}

impl Point {
    fn label(&self) -> String {
        format!("{}-n{}-{}", self.family.label(), self.n, self.adversary)
    }
}

/// Seed of trial `index` at every point of an experiment.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    derive(master, index as u64)
}

#[derive(Clone, Debug, Default)]
struct TraceChecks {
    checked: usize,
    safety: Vec<String>,
    model: Vec<String>,
}

struct TrialResult {
    report: RunReport,
    trace: Option<Trace>,
    checks: TraceChecks,
}

pub struct ExperimentOutcome {
    pub reports: Vec<RunReport>,
    pub rows: Vec<SweepRow>,
    pub verdicts: Vec<Verdict>,
    /// The summary CSV exactly as written to disk.
    pub summary_csv: Vec<u8>,
    pub traces_kept: usize,
}

impl ExperimentOutcome {
    /// True iff no hard verdict failed.
    pub fn passed(&self) -> bool {
        !any_hard_failure(&self.verdicts)
    }

    pub fn verdict(&self, check: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.check == check)
    }
}

fn options(cfg: &ExperimentConfig, record_trace: bool) -> RunOptions {
    RunOptions {
        roles: match cfg.protocol.forced() {
            Some((candidates, referees)) => Roles::Forced {
                candidates,
                referees,
            },
            None => Roles::Coins,
        },
        distinct_ranks: cfg.protocol.distinct_ranks,
        record_trace,
        event_budget: cfg.event_budget.unwrap_or(DEFAULT_EVENT_BUDGET),
        check_invariants: true,
    }
}

fn run_trial(cfg: &ExperimentConfig, point: &Point, index: usize) -> Result<TrialResult> {
    let seed = trial_seed(cfg.seed, index);
    let owned;
    let graph = match &point.graph {
        Some(g) => g,
        None => {
            owned = generate(&point.family, seed)?;
            &owned
        }
    };
    let attempt = |traced: bool| {
        run(
            graph,
            &point.params,
            point.adversary.build(graph, seed),
            seed,
            &options(cfg, traced),
        )
    };
    let mut out = attempt(cfg.keep_traces == Retention::All)?;
    let failed = |r: &RunReport| verify_liveness(r) != Liveness::Pass;
    if cfg.keep_traces == Retention::FailuresOnly && failed(&out.report) {
        // Runs are deterministic, so a traced rerun reproduces the failure.
        out = attempt(true)?;
    }
    out.report.graph = point.family.label().to_string();
    let mut checks = TraceChecks::default();
    if let Some(t) = &out.trace {
        checks.checked = 1;
        let s = verify_safety(t);
        let m = verify_trace(t);
        let tag = format!("{} #{index}", point.label());
        checks
            .safety
            .extend(s.violations.into_iter().map(|v| format!("{tag}: {v}")));
        checks
            .model
            .extend(m.violations.into_iter().map(|v| format!("{tag}: {v}")));
    }
    Ok(TrialResult {
        report: out.report,
        trace: out.trace,
        checks,
    })
}

fn points(cfg: &ExperimentConfig) -> Result<Vec<Point>> {
    let mut out = Vec::new();
    for n in cfg.sizes()? {
        let family = cfg.family(n)?;
        let graph = if family.is_random() {
            None
        } else {
            Some(generate(&family, 0)?)
        };
        let params = cfg.protocol.params(n)?;
        for &adversary in &cfg.adversaries {
            out.push(Point {
                n,
                adversary,
                family: family.clone(),
                graph: graph.clone(),
                params: params.clone(),
            });
        }
    }
    Ok(out)
}

/// Validates the config, runs every trial in parallel, merges results in
/// trial order, evaluates the checks and, if an output directory is set,
/// writes reports, traces, the summary and the verdicts there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let points = points(cfg)?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.trials).map(move |i| (p, i)))
        .collect();
    let results: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(p, i)| run_trial(cfg, &points[p], i))
        .collect::<Result<_>>()?;

    let mut checks = TraceChecks::default();
    for r in &results {
        checks.checked += r.checks.checked;
        checks.safety.extend(r.checks.safety.iter().cloned());
        checks.model.extend(r.checks.model.iter().cloned());
    }
    let reports: Vec<RunReport> = results.iter().map(|r| r.report.clone()).collect();
    let rows = summarize(&reports);
    let mut summary_csv = Vec::new();
    write_csv(&rows, &mut summary_csv)?;
    let verdicts = evaluate(cfg, &points, &reports, &checks);

    let mut traces_kept = 0;
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir.join("reports"))?;
        fs::write(dir.join("config.toml"), cfg.to_toml())?;
        fs::write(dir.join("summary.csv"), &summary_csv)?;
        fs::write(dir.join("verdicts.txt"), verdict_table(&verdicts))?;
        fs::write(
            dir.join("verdicts.json"),
            serde_json::to_vec_pretty(&verdicts)?,
        )?;
        for (&(p, i), r) in jobs.iter().zip(&results) {
            let name = format!("{}-{i:05}", points[p].label());
            fs::write(
                dir.join("reports").join(format!("{name}.json")),
                serde_json::to_vec_pretty(&r.report)?,
            )?;
            if let Some(t) = &r.trace {
                let traces = dir.join("traces");
                fs::create_dir_all(&traces)?;
                t.save(&traces.join(format!("{name}.jsonl.gz")))?;
                traces_kept += 1;
            }
        }
    } else {
        traces_kept = results.iter().filter(|r| r.trace.is_some()).count();
    }
    Ok(ExperimentOutcome {
        reports,
        rows,
        verdicts,
        summary_csv,
        traces_kept,
    })
}

fn series_status(series: &[Series]) -> Status {
    if series.iter().any(|s| !s.bounded) {
        Status::Fail
    } else if series.is_empty() || series.iter().any(|s| s.points.len() < 3) {
        Status::Inconclusive
    } else {
        Status::Pass
    }
}

fn series_detail(v: &BoundVerdict) -> String {
    let parts: Vec<String> = v
        .series
        .iter()
        .map(|s| {
            let maxes: Vec<String> = s
                .points
                .iter()
                .map(|p| format!("{}:{:.3}", p.n, p.max))
                .collect();
            format!(
                "{} {}/{} [{}]",
                s.quantity,
                s.family,
                s.adversary,
                maxes.join(" ")
            )
        })
        .collect();
    format!("max ratio {:.3}; {}", v.fitted_constant, parts.join("; "))
}

fn listed(count: usize, what: &str, examples: &[String]) -> String {
    match examples.first() {
        None => format!("0 {what}"),
        Some(first) => format!("{count} {what}, first: {first}"),
    }
}

fn evaluate(
    cfg: &ExperimentConfig,
    points: &[Point],
    reports: &[RunReport],
    checks: &TraceChecks,
) -> Vec<Verdict> {
    let mut v = Vec::new();

    let collisions = reports.iter().filter(|r| r.flags.rank_collision).count();
    let multi: Vec<String> = reports
        .iter()
        .filter(|r| !r.flags.rank_collision && r.leaders_elected.len() > 1)
        .map(|r| {
            format!(
                "seed {} on {} n={}: {} leaders",
                r.seed,
                r.graph,
                r.n,
                r.leaders_elected.len()
            )
        })
        .collect();
    let safety_bad = multi.len() + checks.safety.len();
    let mut examples = multi;
    examples.extend(checks.safety.iter().cloned());
    v.push(Verdict::new(
        "safety",
        if safety_bad == 0 {
            Status::Pass
        } else {
            Status::Fail
        },
        true,
        format!(
            "{}; {collisions} rank-collision runs excluded; {} traces checked",
            listed(safety_bad, "violations", &examples),
            checks.checked
        ),
    ));

    let bad_quorum: Vec<String> = reports
        .iter()
        .filter(|r| r.quorum_sizes.iter().any(|&q| q as u64 != r.quorum_low))
        .map(|r| {
            format!(
                "seed {}: quorums {:?}, threshold {}",
                r.seed, r.quorum_sizes, r.quorum_low
            )
        })
        .collect();
    v.push(Verdict::new(
        "quorum-count",
        if bad_quorum.is_empty() {
            Status::Pass
        } else {
            Status::Fail
        },
        true,
        listed(
            bad_quorum.len(),
            "runs with a wrong quorum size",
            &bad_quorum,
        ),
    ));

    v.push(Verdict::new(
        "fifo-and-delays",
        if checks.checked == 0 {
            Status::Inconclusive
        } else if checks.model.is_empty() {
            Status::Pass
        } else {
            Status::Fail
        },
        true,
        if checks.checked == 0 {
            "no traces recorded".to_string()
        } else {
            format!(
                "{} traces; {}",
                checks.checked,
                listed(checks.model.len(), "violations", &checks.model)
            )
        },
    ));

    let mut low_points = Vec::new();
    let mut rates = Vec::new();
    let mut by_point: BTreeMap<(&str, usize, &str), (usize, usize, usize)> = BTreeMap::new();
    for r in reports {
        let e = by_point
            .entry((r.graph.as_str(), r.n, r.adversary.as_str()))
            .or_default();
        e.0 += 1;
        e.1 += usize::from(r.succeeded());
        e.2 += usize::from(r.flags.election_failure.is_some());
    }
    for (&(family, n, adv), &(runs, ok, failures)) in &by_point {
        let rate = ok as f64 / runs as f64;
        rates.push(format!(
            "{family} n={n} {adv}: {ok}/{runs} ({failures} election failures)"
        ));
        if rate < LIVENESS_RATE {
            low_points.push(format!("{family} n={n} {adv}"));
        }
    }
    v.push(Verdict::new(
        "liveness",
        if low_points.is_empty() {
            Status::Pass
        } else {
            Status::Fail
        },
        false,
        format!("exactly one leader, all agree: {}", rates.join("; ")),
    ));

    let messages = check_message_bound(reports);
    v.push(Verdict::new(
        "message-limits",
        if messages.violations.is_empty() {
            Status::Pass
        } else {
            Status::Fail
        },
        true,
        listed(
            messages.violations.len(),
            "runs over a per-payload or per-referee limit",
            &messages.violations,
        ),
    ));
    v.push(Verdict::new(
        "message-scaling",
        series_status(&messages.series),
        false,
        series_detail(&messages),
    ));

    let time = check_time_bound(reports);
    v.push(Verdict::new(
        "envelope",
        if time.violations.is_empty() {
            Status::Pass
        } else {
            Status::Fail
        },
        true,
        listed(
            time.violations.len(),
            "runs over 5·(D + unique messages)",
            &time.violations,
        ),
    ));
    v.push(Verdict::new(
        "time-scaling",
        series_status(&time.series),
        false,
        series_detail(&time),
    ));

    if cfg.protocol.forced().is_none() {
        let mut seen = Vec::new();
        for p in points {
            if seen.contains(&p.n) {
                continue;
            }
            seen.push(p.n);
            let at_n: Vec<RunReport> = reports.iter().filter(|r| r.n == p.n).cloned().collect();
            let c = check_role_concentration(&at_n, &p.params);
            v.push(Verdict::new(
                format!("role-concentration n={}", p.n),
                c.status,
                false,
                c.detail,
            ));
        }
    }

    let cut = reports.iter().filter(|r| r.flags.non_quiescent).count();
    v.push(Verdict::new(
        "quiescence",
        if cut == 0 {
            Status::Pass
        } else {
            Status::Inconclusive
        },
        false,
        format!("{cut} of {} runs hit the event budget", reports.len()),
    ));
    v
}

pub fn verdict_table(verdicts: &[Verdict]) -> String {
    let mut s = String::new();
    for v in verdicts {
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

/// Loads every trace kept under an experiment's output directory.
pub fn retained_traces(out: &Path) -> Result<Vec<(String, Trace)>> {
    let dir = out.join("traces");
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut names: Vec<_> = fs::read_dir(&dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    names
        .into_iter()
        .map(|p| {
            let name = p
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            Ok((name, Trace::load(&p)?))
        })
        .collect()
}
