use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::report::{FailureKind, RunReport};
use crate::graph::NodeId;
use crate::protocol::{Message, Rank};
use crate::simnet::{Record, Trace};

fn has_rank_collision(trace: &Trace) -> bool {
    let mut seen = HashSet::new();
    trace.records.iter().any(|r| match r {
        Record::Init { coins, .. } => !seen.insert(coins.rank),
        _ => false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetyVerdict {
    pub pass: bool,
    pub leaders: Vec<Rank>,
    /// Two nodes drew the same rank; the run is excluded from safety
    /// accounting but still reported.
    pub rank_collision: bool,
    /// `2·quorum_low − N_R`: the smallest overlap any two approval quorums
    /// can have. Positive means quorums must intersect.
    pub guaranteed_overlap: i64,
    /// Smallest overlap observed between two elected quorums, when there
    /// were at least two.
    pub min_quorum_overlap: Option<usize>,
    pub violations: Vec<String>,
}

/// At most one node may ever reach Elected. Also checks the mechanism that
/// guarantees it: every elected quorum holds exactly `quorum_low` distinct
/// referees, each of which really approved that candidate beforehand, and,
/// when quorums are forced to overlap, any two of them do.
pub fn verify_safety(trace: &Trace) -> SafetyVerdict {
    let q = trace.header.params.quorum_low as usize;
    let rank_collision = has_rank_collision(trace);
    let mut referees = 0i64;
    let mut approvals: HashMap<Rank, HashSet<Rank>> = HashMap::new();
    let mut elected: Vec<(NodeId, Rank, HashSet<Rank>)> = Vec::new();
    let mut violations = Vec::new();
    for r in &trace.records {
        match r {
            Record::Init { coins, .. } => referees += i64::from(coins.referee),
            Record::Generate {
                msg: Message::Approved { candidate, referee },
                ..
            } => {
                approvals.entry(*candidate).or_default().insert(*referee);
            }
            Record::Elected {
                node, rank, quorum, ..
            } => {
                let set: HashSet<Rank> = quorum.iter().copied().collect();
                if quorum.len() != q {
                    violations.push(format!(
                        "node {node} elected with {} approvals, threshold {q}",
                        quorum.len()
                    ));
                }
                if set.len() != quorum.len() && !rank_collision {
                    violations.push(format!("node {node} counted a referee twice"));
                }
                let approved = approvals.get(rank);
                if let Some(r) = set.iter().find(|r| approved.is_none_or(|a| !a.contains(r))) {
                    violations.push(format!(
                        "node {node} counted an approval from {r} that was never sent"
                    ));
                }
                elected.push((*node, *rank, set));
            }
            _ => {}
        }
    }
    let leaders: Vec<Rank> = elected.iter().map(|e| e.1).collect();
    if leaders.len() > 1 {
        let list: Vec<String> = leaders.iter().map(|r| r.to_string()).collect();
        violations.push(format!(
            "{} leaders elected: {}",
            leaders.len(),
            list.join(", ")
        ));
    }
    let guaranteed_overlap = 2 * q as i64 - referees;
    let mut min_quorum_overlap = None;
    for (i, a) in elected.iter().enumerate() {
        for b in &elected[i + 1..] {
            let k = a.2.intersection(&b.2).count();
            min_quorum_overlap = Some(min_quorum_overlap.map_or(k, |m: usize| m.min(k)));
            if guaranteed_overlap > 0 && k == 0 && !rank_collision {
                violations.push(format!(
                    "quorums of ranks {} and {} are disjoint although they must overlap",
                    a.1, b.1
                ));
            }
        }
    }
    SafetyVerdict {
        pass: violations.is_empty(),
        leaders,
        rank_collision,
        guaranteed_overlap,
        min_quorum_overlap,
        violations,
    }
}

/// Model-level properties of a trace that do not depend on the protocol's
/// correctness argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceVerdict {
    pub pass: bool,
    pub transmissions: usize,
    pub deliveries: usize,
    pub violations: Vec<String>,
}

/// Checks per-direction FIFO delivery, the delay range, time monotonicity,
/// transmission/delivery conservation, and, for collision-free runs, that
/// every referee only ever moves its backing to stronger candidates and only
/// after hearing the previous one concede.
pub fn verify_trace(trace: &Trace) -> TraceVerdict {
    let mut violations = Vec::new();
    let mut inflight: HashMap<(NodeId, NodeId), VecDeque<(Message, f64)>> = HashMap::new();
    let mut heard_loses: HashMap<NodeId, HashSet<Rank>> = HashMap::new();
    let mut backing: HashMap<NodeId, Rank> = HashMap::new();
    let collision = has_rank_collision(trace);
    let mut last = f64::NEG_INFINITY;
    let (mut sends, mut deliveries) = (0, 0);
    let note = |v: &mut Vec<String>, s: String| {
        if v.len() < 20 {
            v.push(s);
        }
    };
    for (i, r) in trace.records.iter().enumerate() {
        let t = r.time();
        if t < last {
            note(&mut violations, format!("record {i}: time goes backwards"));
        }
        last = t;
        match r {
            Record::Send {
                src,
                dst,
                msg,
                delay,
                ..
            } => {
                sends += 1;
                if !(*delay > 0.0 && *delay <= 1.0) {
                    note(
                        &mut violations,
                        format!("record {i}: delay {delay} out of range"),
                    );
                }
                let q = inflight.entry((*src, *dst)).or_default();
                if !q.is_empty() {
                    note(
                        &mut violations,
                        format!("record {i}: {src}->{dst} already busy"),
                    );
                }
                q.push_back((*msg, t + delay));
            }
            Record::Deliver { src, dst, msg, .. } => {
                deliveries += 1;
                match inflight.get_mut(&(*src, *dst)).and_then(|q| q.pop_front()) {
                    Some((m, due)) if m == *msg && due == t => {}
                    Some((m, _)) if m == *msg => note(
                        &mut violations,
                        format!("record {i}: delivered at the wrong time"),
                    ),
                    Some(_) => note(
                        &mut violations,
                        format!("record {i}: {src}->{dst} out of order"),
                    ),
                    None => note(
                        &mut violations,
                        format!("record {i}: delivery without a send"),
                    ),
                }
                if let Message::Loses { rank } = msg {
                    heard_loses.entry(*dst).or_default().insert(*rank);
                }
            }
            Record::Generate {
                node,
                msg: Message::Approved { candidate, .. },
                ..
            } if !collision => {
                if let Some(prev) = backing.insert(*node, *candidate) {
                    if *candidate <= prev {
                        note(
                            &mut violations,
                            format!("record {i}: referee {node} moved from {prev} to weaker {candidate}"),
                        );
                    }
                    if !heard_loses.get(node).is_some_and(|s| s.contains(&prev)) {
                        note(
                            &mut violations,
                            format!(
                                "record {i}: referee {node} replaced {prev} before it conceded"
                            ),
                        );
                    }
                }
            }
            _ => {}
        }
    }
    if sends != deliveries {
        note(
            &mut violations,
            format!("{sends} transmissions but {deliveries} deliveries"),
        );
    }
    TraceVerdict {
        pass: violations.is_empty(),
        transmissions: sends,
        deliveries,
        violations,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Liveness {
    Pass,
    Fail {
        reason: String,
    },
    /// Roles made an election impossible; counted, not failed.
    ElectionFailure {
        kind: FailureKind,
    },
    /// The run was cut off before going quiet.
    Inconclusive,
}

impl Liveness {
    pub fn is_fail(&self) -> bool {
        matches!(self, Liveness::Fail { .. })
    }
}

/// Exactly one leader, and every node terminated knowing it.
pub fn verify_liveness(report: &RunReport) -> Liveness {
    if report.flags.non_quiescent {
        return Liveness::Inconclusive;
    }
    if let Some(kind) = report.flags.election_failure {
        return Liveness::ElectionFailure { kind };
    }
    let fail = |reason: String| Liveness::Fail { reason };
    match report.leaders_elected.as_slice() {
        [] => fail("no leader elected".into()),
        [leader] => {
            if !report.all_terminated {
                fail("some node never terminated".into())
            } else if report.agreed_leader != Some(*leader) {
                fail(format!("nodes disagree on the leader {leader}"))
            } else {
                Liveness::Pass
            }
        }
        many => fail(format!("{} leaders elected", many.len())),
    }
}
