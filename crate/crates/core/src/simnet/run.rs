use std::collections::HashSet;

use rand::seq::index::sample;

use super::adversary::{Adversary, RecordedDelays, RecordedOrder};
use super::engine::{Arrival, Engine, Logic, NodeIo};
use super::trace::{Record, Trace, TraceHeader};
use crate::error::{Error, Result};
use crate::graph::{ArcId, Graph, NodeId};
use crate::metrics::{FailureKind, RunFlags, RunReport};
use crate::protocol::{
    initialize_into, on_receive_into, Coins, Emission, Message, NodeState, Notice, ProtocolParams,
    Rank,
};
use crate::seed::{self, STREAM_COINS, STREAM_ROLES};

pub const DEFAULT_EVENT_BUDGET: u64 = 1_000_000_000;

/// How nodes get their roles.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Roles {
    /// Each node flips its own coins with the role probability.
    #[default]
    Coins,
    /// Exactly this many candidates and referees, chosen as independent
    /// uniform subsets. Ranks are still random.
    Forced { candidates: usize, referees: usize },
    /// Fixed coins per node.
    Explicit(Vec<Coins>),
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub roles: Roles,
    /// Redraw until all ranks differ.
    pub distinct_ranks: bool,
    pub record_trace: bool,
    pub event_budget: u64,
    /// Check node invariants after every transition.
    pub check_invariants: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            roles: Roles::Coins,
            distinct_ranks: false,
            record_trace: false,
            event_budget: DEFAULT_EVENT_BUDGET,
            check_invariants: true,
        }
    }
}

impl RunOptions {
    pub fn traced() -> Self {
        RunOptions {
            record_trace: true,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: Option<Trace>,
    pub report: RunReport,
}

fn has_duplicate(coins: &[Coins]) -> bool {
    let mut seen = HashSet::with_capacity(coins.len());
    !coins.iter().all(|c| seen.insert(c.rank))
}

/// Draws every node's coins for a run.
pub fn draw_coins(
    n: usize,
    params: &ProtocolParams,
    seed: u64,
    opts: &RunOptions,
) -> Result<Vec<Coins>> {
    if let Roles::Explicit(c) = &opts.roles {
        if c.len() != n {
            return Err(Error::Parameter(format!(
                "{} coin sets for {n} nodes",
                c.len()
            )));
        }
        return Ok(c.clone());
    }
    if let Roles::Forced {
        candidates,
        referees,
    } = opts.roles
    {
        if candidates > n || referees > n {
            return Err(Error::Parameter(format!(
                "cannot force {candidates} candidates and {referees} referees among {n} nodes"
            )));
        }
    }
    if opts.distinct_ranks && (n as u64) > params.rank_space_max {
        return Err(Error::Parameter(
            "rank space too small for distinct ranks".into(),
        ));
    }
    for attempt in 0u64.. {
        let s = if attempt == 0 {
            seed
        } else {
            seed::derive(seed, attempt)
        };
        let mut coins: Vec<Coins> = (0..n as u64)
            .map(|v| Coins::draw(params, &mut seed::rng(seed::derive(s, v), STREAM_COINS)))
            .collect();
        if let Roles::Forced {
            candidates,
            referees,
        } = opts.roles
        {
            let mut rng = seed::rng(s, STREAM_ROLES);
            for c in &mut coins {
                c.candidate = false;
                c.referee = false;
            }
            for v in sample(&mut rng, n, candidates) {
                coins[v].candidate = true;
            }
            for v in sample(&mut rng, n, referees) {
                coins[v].referee = true;
            }
        }
        if !opts.distinct_ranks || !has_duplicate(&coins) {
            return Ok(coins);
        }
    }
    unreachable!()
}

/// Everything the run records about itself, kept apart from node state so
/// the scratch emission can be borrowed alongside it.
struct Observer<'a> {
    graph: &'a Graph,
    params: &'a ProtocolParams,
    records: Option<Vec<Record>>,
    check: bool,
    awake: usize,
    all_awake_at: Option<f64>,
    referee_generated: Vec<u64>,
    elected: Vec<(NodeId, Rank, Vec<Rank>)>,
}

impl Observer<'_> {
    fn record(&mut self, r: impl FnOnce() -> Record) {
        if let Some(rs) = &mut self.records {
            rs.push(r());
        }
    }

    fn apply(
        &mut self,
        node: NodeId,
        state: &NodeState,
        em: &Emission,
        trigger: Option<u32>,
        io: &mut NodeIo<'_, Message>,
    ) -> Result<()> {
        let t = io.now;
        if let (Some(port), Some(id)) = (em.withdraw, trigger) {
            io.withdraw(port, id);
        }
        for notice in &em.notices {
            if let Notice::Initialized(coins) = notice {
                self.awake += 1;
                if self.awake == self.graph.node_count() {
                    self.all_awake_at = Some(t);
                }
                let coins = *coins;
                self.record(|| Record::Init { t, node, coins });
            }
        }
        for b in &em.sends {
            io.broadcast(&b.msg, b.except);
            if b.generated {
                if matches!(
                    b.msg,
                    Message::Wakeup
                        | Message::Approved { .. }
                        | Message::Declined { .. }
                        | Message::Dispute { .. }
                ) {
                    self.referee_generated[node as usize] += 1;
                }
                let msg = b.msg;
                self.record(|| Record::Generate { t, node, msg });
            }
        }
        for notice in &em.notices {
            match *notice {
                Notice::Elected { rank, ref quorum } => {
                    self.record(|| Record::Elected {
                        t,
                        node,
                        rank,
                        quorum: quorum.clone(),
                    });
                    self.elected.push((node, rank, quorum.clone()));
                }
                Notice::LearnedLeader(leader) => {
                    self.record(|| Record::Learned { t, node, leader })
                }
                Notice::RankCollision(rank) => self.record(|| Record::Collision { t, node, rank }),
                Notice::Initialized(_) | Notice::Terminated => {}
            }
        }
        if self.check {
            state.check_invariants(self.params)?;
        }
        Ok(())
    }
}

struct ProtocolLogic<'a> {
    coins: &'a [Coins],
    states: Vec<NodeState>,
    scratch: Emission,
    obs: Observer<'a>,
}

impl Logic<Message> for ProtocolLogic<'_> {
    fn wake(&mut self, node: NodeId, io: &mut NodeIo<'_, Message>) -> Result<()> {
        let t = io.now;
        self.obs.record(|| Record::Wake { t, node });
        let state = &mut self.states[node as usize];
        if state.awake {
            return Ok(());
        }
        self.scratch.clear();
        initialize_into(state, io, &self.coins[node as usize], &mut self.scratch)?;
        self.obs.apply(node, state, &self.scratch, None, io)
    }

    fn deliver(&mut self, at: Arrival, io: &mut NodeIo<'_, Message>) -> Result<()> {
        let msg = io.payload(at.id);
        let t = io.now;
        self.obs.record(|| Record::Deliver {
            t,
            src: at.src,
            dst: at.dst,
            msg,
        });
        let v = at.dst as usize;
        let state = &mut self.states[v];
        self.scratch.clear();
        on_receive_into(
            state,
            io,
            at.port,
            &msg,
            self.obs.params,
            &self.coins[v],
            &mut self.scratch,
        )?;
        self.obs
            .apply(at.dst, state, &self.scratch, Some(at.id), io)
    }

    fn transmitted(&mut self, now: f64, arc: ArcId, msg: &Message, delay: f64, pick: usize) {
        let g = self.obs.graph;
        let (src, dst) = (g.arc_tail(arc), g.arc_head(arc));
        let msg = *msg;
        self.obs.record(|| Record::Send {
            t: now,
            src,
            dst,
            msg,
            delay,
            pick,
        });
    }
}

/// Simulates one execution of the election protocol.
pub fn run(
    graph: &Graph,
    params: &ProtocolParams,
    adversary: Adversary,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    params.validate()?;
    let n = graph.node_count();
    if n < 2 {
        return Err(Error::Parameter("need at least two nodes".into()));
    }
    for &(v, t) in &adversary.wakeup {
        if v as usize >= n || !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!("bad wake-up ({v}, {t})")));
        }
    }
    let coins = draw_coins(n, params, seed, opts)?;
    let Adversary {
        name,
        wakeup,
        mut delay,
        mut order,
    } = adversary;

    let mut logic = ProtocolLogic {
        coins: &coins,
        states: vec![NodeState::new(); n],
        scratch: Emission::default(),
        obs: Observer {
            graph,
            params,
            records: opts.record_trace.then(Vec::new),
            check: opts.check_invariants,
            awake: 0,
            all_awake_at: None,
            referee_generated: vec![0; n],
            elected: Vec::new(),
        },
    };
    delay.observe_coins(&coins);
    let mut engine = Engine::new(graph);
    engine.track_enqueues = opts.check_invariants;
    let finish = engine.run(
        &mut logic,
        delay.as_mut(),
        order.as_mut(),
        &wakeup,
        opts.event_budget,
    )?;

    let candidates = coins.iter().filter(|c| c.candidate).count();
    let referees = coins.iter().filter(|c| c.referee).count();
    let leaders_elected: Vec<Rank> = logic.obs.elected.iter().map(|e| e.1).collect();
    let election_failure = if !leaders_elected.is_empty() {
        None
    } else if candidates == 0 {
        Some(FailureKind::NoCandidate)
    } else {
        let top = coins
            .iter()
            .filter(|c| c.candidate)
            .max_by_key(|c| c.rank)
            .expect("at least one candidate");
        let usable = referees - usize::from(top.referee);
        ((usable as u64) < params.quorum_low).then_some(FailureKind::RefereeShortfall)
    };
    let first = logic.states[0].leader_rank;
    let agreed_leader = first.filter(|_| logic.states.iter().all(|s| s.leader_rank == first));
    let max_referee_generated = (0..n)
        .filter(|&v| coins[v].referee)
        .map(|v| logic.obs.referee_generated[v])
        .max()
        .unwrap_or(0);

    let report = RunReport {
        graph: String::new(),
        adversary: name.clone(),
        seed,
        n,
        m: graph.edge_count(),
        diameter: graph.diameter(),
        n_estimate: params.n_estimate,
        quorum_low: params.quorum_low,
        candidates,
        referees,
        leader_nodes: logic.obs.elected.iter().map(|e| e.0).collect(),
        quorum_sizes: logic
            .obs
            .elected
            .iter()
            .map(|e| e.2.iter().collect::<HashSet<_>>().len())
            .collect(),
        leaders_elected,
        agreed_leader,
        all_terminated: logic.states.iter().all(|s| s.terminated),
        total_transmissions: engine.transmissions,
        unique_messages: engine.table.len() as u64,
        max_payload_transmissions: engine.per_payload.iter().copied().max().unwrap_or(0) as u64,
        max_referee_generated,
        double_enqueues: engine.double_enqueues,
        completion_time: finish.last_time - finish.first_time,
        all_awake_time: logic.obs.all_awake_at.map(|t| t - finish.first_time),
        events: engine.events,
        flags: RunFlags {
            rank_collision: has_duplicate(&coins),
            election_failure,
            non_quiescent: !finish.quiescent,
        },
    };
    let trace = logic.obs.records.map(|records| Trace {
        header: TraceHeader {
            n,
            edges: graph.edges().to_vec(),
            params: params.clone(),
            seed,
            adversary: name,
            wakeup,
            event_budget: opts.event_budget,
        },
        records,
    });
    Ok(RunOutcome { trace, report })
}

/// Re-executes a recorded run from its inputs (wake-ups, coins, delays and
/// queue picks) and checks that every record comes out identical.
pub fn replay(trace: &Trace) -> Result<RunOutcome> {
    let h = &trace.header;
    let graph = Graph::from_edges(h.n, &h.edges)?;
    let mut coins = vec![
        Coins {
            rank: Rank(1),
            candidate: false,
            referee: false,
        };
        h.n
    ];
    let mut delays = Vec::new();
    let mut picks = Vec::new();
    for r in &trace.records {
        match r {
            Record::Init { node, coins: c, .. } => coins[*node as usize] = *c,
            Record::Send { delay, pick, .. } => {
                delays.push(*delay);
                picks.push(*pick);
            }
            _ => {}
        }
    }
    let fifo = picks.iter().all(|&p| p == 0);
    let adversary = if fifo {
        Adversary::new(
            h.adversary.clone(),
            h.wakeup.clone(),
            RecordedDelays::new(delays),
            crate::protocol::Fifo,
        )
    } else {
        Adversary::new(
            h.adversary.clone(),
            h.wakeup.clone(),
            RecordedDelays::new(delays),
            RecordedOrder::new(picks),
        )
    };
    let opts = RunOptions {
        roles: Roles::Explicit(coins),
        record_trace: true,
        event_budget: h.event_budget,
        ..RunOptions::default()
    };
    let outcome = match run(&graph, &h.params, adversary, h.seed, &opts) {
        Ok(o) => o,
        Err(Error::InvalidDelay { .. }) => {
            return Err(Error::ReplayMismatch {
                index: trace.records.len(),
                expected: "end of trace".into(),
                actual: "a transmission beyond the recorded ones".into(),
            })
        }
        Err(e) => return Err(e),
    };
    let actual = &outcome.trace.as_ref().expect("traced").records;
    for (i, (a, b)) in trace.records.iter().zip(actual).enumerate() {
        if a != b {
            return Err(Error::ReplayMismatch {
                index: i,
                expected: format!("{a:?}"),
                actual: format!("{b:?}"),
            });
        }
    }
    if trace.records.len() != actual.len() {
        let i = trace.records.len().min(actual.len());
        let show = |rs: &[Record]| {
            rs.get(i)
                .map_or("end of trace".to_string(), |r| format!("{r:?}"))
        };
        return Err(Error::ReplayMismatch {
            index: i,
            expected: show(&trace.records),
            actual: show(actual),
        });
    }
    Ok(outcome)
}
