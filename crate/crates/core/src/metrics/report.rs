use serde::{Deserialize, Serialize};

use crate::graph::NodeId;
use crate::protocol::Rank;

/// Why a run could not have elected anyone, independent of scheduling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    /// No node became a candidate.
    NoCandidate,
    /// Too few referees other than the strongest candidate itself to reach
    /// the approval threshold.
    RefereeShortfall,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunFlags {
    /// Two nodes drew the same rank.
    pub rank_collision: bool,
    pub election_failure: Option<FailureKind>,
    /// The event budget ran out before the network went quiet.
    pub non_quiescent: bool,
}

/// Summary of one simulated execution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub graph: String,
    pub adversary: String,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub diameter: usize,
    pub n_estimate: u64,
    pub quorum_low: u64,
    pub candidates: usize,
    pub referees: usize,
    pub leaders_elected: Vec<Rank>,
    pub leader_nodes: Vec<NodeId>,
    /// The leader every node ended up knowing, if they all agree.
    pub agreed_leader: Option<Rank>,
    pub all_terminated: bool,
    pub total_transmissions: u64,
    pub unique_messages: u64,
    /// Largest number of times any single payload crossed an edge.
    pub max_payload_transmissions: u64,
    /// Largest number of messages a referee originated (verdicts, disputes
    /// and its own wake-up).
    pub max_referee_generated: u64,
    /// Payloads queued twice on the same arc; always 0 in a correct engine.
    pub double_enqueues: u64,
    pub quorum_sizes: Vec<usize>,
    pub completion_time: f64,
    pub all_awake_time: Option<f64>,
    pub events: u64,
    pub flags: RunFlags,
}

impl RunReport {
    pub fn elected_one(&self) -> bool {
        self.leaders_elected.len() == 1
    }

    /// Exactly one leader and every node terminated knowing it.
    pub fn succeeded(&self) -> bool {
        self.elected_one()
            && self.all_terminated
            && self.agreed_leader == self.leaders_elected.first().copied()
    }
}
