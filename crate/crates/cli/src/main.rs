use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use election_cli::config::{
    ExperimentConfig, Family, GraphSpec, NEstimate, ProtocolSpec, Retention,
};
use election_cli::experiment::{run_experiment, verdict_table};
use election_core::graph::{generate, Graph};
use election_core::metrics::{verify_liveness, verify_safety, verify_trace, Liveness};
use election_core::protocol::Preset;
use election_core::simnet::{
    builtin_adversaries, flood_only, replay, AdversaryKind, Trace, UniformDelay, UnitDelay,
};

#[derive(Parser)]
#[command(
    name = "election",
    version,
    about = "Simulate randomized leader election on adversarial asynchronous networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and/or flags.
    Run(Box<RunArgs>),
    /// Re-execute a saved trace and re-check it.
    Replay { trace: PathBuf },
    /// Flood k tokens from one node with the protocol switched off.
    Flood(FloodArgs),
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    match s {
        "paper" => Ok(Preset::Paper),
        "desk" => Ok(Preset::Desk),
        _ => Err(format!("unknown preset '{s}', expected paper or desk")),
    }
}

#[derive(Clone)]
struct AdversaryList(Vec<AdversaryKind>);

fn parse_adversaries(s: &str) -> Result<AdversaryList, String> {
    if s == "all" {
        return Ok(AdversaryList(builtin_adversaries().to_vec()));
    }
    s.split(',')
        .map(|a| {
            a.trim()
                .parse()
                .map_err(|e: election_core::Error| e.to_string())
        })
        .collect::<Result<_, _>>()
        .map(AdversaryList)
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    graph: Option<Family>,
    /// Sizes to sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Edge-list file ("n m" then one "u v" per line); implies --graph edge-list.
    #[arg(long)]
    edge_list: Option<PathBuf>,
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// Role coefficient.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    quorum_fraction: Option<f64>,
    /// Approval threshold, overriding the computed one.
    #[arg(long)]
    quorum_low: Option<u64>,
    /// exact, lower:<factor> or upper:<factor>.
    #[arg(long)]
    n_estimate_policy: Option<NEstimate>,
    #[arg(long)]
    forced_candidates: Option<usize>,
    #[arg(long)]
    forced_referees: Option<usize>,
    /// Redraw coins until all ranks differ.
    #[arg(long)]
    distinct_ranks: bool,
    /// Comma-separated adversary names, or "all".
    #[arg(long, value_parser = parse_adversaries)]
    adversary: Option<AdversaryList>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for reports, summary, verdicts and traces.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    keep_traces: Option<Retention>,
    #[arg(long)]
    event_budget: Option<u64>,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

impl RunArgs {
    fn resolve(self) -> Result<(ExperimentConfig, bool)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => {
                let family = match (self.graph, &self.edge_list) {
                    (Some(f), _) => f,
                    (None, Some(_)) => Family::EdgeList,
                    (None, None) => bail!("either --config or --graph is required"),
                };
                ExperimentConfig {
                    graph: GraphSpec {
                        family,
                        sizes: Vec::new(),
                        p: None,
                        avg_degree: 6.0,
                        m: None,
                        edge_list: None,
                    },
                    protocol: ProtocolSpec::default(),
                    adversaries: vec![AdversaryKind::Uniform],
                    trials: 1,
                    seed: 0,
                    out: None,
                    keep_traces: Retention::None,
                    event_budget: None,
                }
            }
        };
        if let Some(f) = self.graph {
            cfg.graph.family = f;
        }
        if !self.n.is_empty() {
            cfg.graph.sizes = self.n;
        }
        if let Some(p) = self.edge_list {
            cfg.graph.family = Family::EdgeList;
            cfg.graph.edge_list = Some(p);
        }
        let p = &mut cfg.protocol;
        if let Some(x) = self.preset {
            p.preset = x;
        }
        p.c = self.c.or(p.c);
        p.quorum_fraction = self.quorum_fraction.or(p.quorum_fraction);
        p.quorum_low = self.quorum_low.or(p.quorum_low);
        p.forced_candidates = self.forced_candidates.or(p.forced_candidates);
        p.forced_referees = self.forced_referees.or(p.forced_referees);
        p.distinct_ranks |= self.distinct_ranks;
        if let Some(x) = self.n_estimate_policy {
            p.n_estimate = x;
        }
        if let Some(a) = self.adversary {
            cfg.adversaries = a.0;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        if let Some(k) = self.keep_traces {
            cfg.keep_traces = k;
        }
        cfg.event_budget = self.event_budget.or(cfg.event_budget);
        Ok((cfg, self.print_config))
    }
}

#[derive(Args)]
struct FloodArgs {
    #[arg(long, value_enum)]
    graph: Option<Family>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    edge_list: Option<PathBuf>,
    /// Number of distinct tokens.
    #[arg(long, default_value_t = 1)]
    k: u32,
    #[arg(long, default_value_t = 0)]
    source: u32,
    /// unit or uniform.
    #[arg(long, default_value = "unit")]
    adversary: AdversaryKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_run(args: RunArgs) -> Result<bool> {
    let (cfg, print) = args.resolve()?;
    if print {
        print!("{}", cfg.to_toml());
        return Ok(true);
    }
    let out = run_experiment(&cfg)?;
    println!(
        "{:<10} {:>6} {:<16} {:>6} {:>8} {:>12} {:>9} {:>10} {:>8}",
        "family", "n", "adversary", "runs", "leaders", "transmit", "kappa", "completion", "tau"
    );
    for r in &out.rows {
        println!(
            "{:<10} {:>6} {:<16} {:>6} {:>8} {:>12.1} {:>9.4} {:>10.2} {:>8.4}",
            r.family,
            r.n,
            r.adversary,
            r.runs,
            r.succeeded,
            r.mean_transmissions,
            r.max_kappa,
            r.mean_completion,
            r.max_tau
        );
    }
    println!();
    print!("{}", verdict_table(&out.verdicts));
    if let Some(dir) = &cfg.out {
        println!("\nwrote {} ({} traces)", dir.display(), out.traces_kept);
    }
    Ok(out.passed())
}

fn cmd_replay(path: PathBuf) -> Result<bool> {
    let trace = Trace::load(&path).with_context(|| format!("reading {}", path.display()))?;
    let out = replay(&trace)?;
    println!(
        "replay: {} records regenerated identically",
        trace.records.len()
    );
    let safety = verify_safety(&trace);
    let model = verify_trace(&trace);
    let live = verify_liveness(&out.report);
    println!(
        "safety:          {}",
        if safety.pass { "PASS" } else { "FAIL" }
    );
    for v in &safety.violations {
        println!("  {v}");
    }
    println!(
        "fifo-and-delays: {}",
        if model.pass { "PASS" } else { "FAIL" }
    );
    for v in &model.violations {
        println!("  {v}");
    }
    println!("liveness:        {}", serde_json::to_string(&live)?);
    println!(
        "transmissions {}  completion {}  leaders {:?}",
        out.report.total_transmissions, out.report.completion_time, out.report.leaders_elected
    );
    Ok(safety.pass && model.pass && !matches!(live, Liveness::Fail { .. }))
}

fn cmd_flood(args: FloodArgs) -> Result<bool> {
    let graph = match (&args.edge_list, args.graph, args.n) {
        (Some(p), _, _) => Graph::parse_edge_list(&std::fs::read_to_string(p)?)?,
        (None, Some(family), Some(n)) => {
            let mut cfg = ExperimentConfig::from_toml(
                "adversaries = []\ntrials = 1\n[graph]\nfamily = \"ring\"",
            )?;
            cfg.graph.family = family;
            generate(&cfg.family(n)?, args.seed)?
        }
        _ => bail!("flood needs --edge-list, or --graph with --n"),
    };
    let t = match args.adversary {
        AdversaryKind::Unit => flood_only(&graph, args.source, args.k, &mut UnitDelay)?,
        AdversaryKind::Uniform => flood_only(
            &graph,
            args.source,
            args.k,
            &mut UniformDelay::new(args.seed),
        )?,
        other => bail!("flood supports the unit and uniform adversaries, not {other}"),
    };
    let d = graph.diameter();
    println!(
        "n={} m={} D={d} k={} completion={t} D+k-1={}",
        graph.node_count(),
        graph.edge_count(),
        args.k,
        d as u64 + args.k as u64 - 1
    );
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(*a),
        Command::Replay { trace } => cmd_replay(trace),
        Command::Flood(a) => cmd_flood(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
