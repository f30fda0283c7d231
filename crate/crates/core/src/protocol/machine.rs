//! Per-node transition functions.
//!
//! Every function takes the node's protocol variables, its heard-message log,
//! and the triggering input, mutates the state in place, and returns an
//! [`Emission`] (the `_into` forms append to one instead): the broadcasts to
//! enqueue and any notices for the harness. Nothing here touches send
//! queues directly; the caller applies the emission. Given the same inputs
//! the functions always produce the same outputs.

use std::collections::HashSet;
use std::hash::BuildHasher;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::message::{Message, Rank};
use super::params::{Coins, ProtocolParams};
use crate::error::{Error, Result};
use crate::graph::Port;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CandState {
    Candidate,
    NonElected,
    Elected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RefState {
    NonSelected,
    Ready,
    ChosenSelected,
    InDispute,
}

/// Protocol variables of one node. The heard-message set lives behind
/// [`MessageLog`] and the per-edge send queues belong to the caller.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeState {
    pub awake: bool,
    pub terminated: bool,
    pub rank: Option<Rank>,
    pub cand_state: CandState,
    pub ref_state: RefState,
    pub chosen: Option<Rank>,
    pub contender: Option<Rank>,
    pub num_replies: u64,
    pub leader_rank: Option<Rank>,
    /// Referee ranks of the approvals counted toward `num_replies`.
    pub quorum: Vec<Rank>,
}

impl Default for NodeState {
    fn default() -> Self {
        Self::new()
    }
}

impl NodeState {
    pub fn new() -> Self {
        NodeState {
            awake: false,
            terminated: false,
            rank: None,
            cand_state: CandState::NonElected,
            ref_state: RefState::NonSelected,
            chosen: None,
            contender: None,
            num_replies: 0,
            leader_rank: None,
            quorum: Vec::new(),
        }
    }

    pub fn is_referee(&self) -> bool {
        self.ref_state != RefState::NonSelected
    }

    /// Checks the per-state invariants on chosen/contender/replies.
    pub fn check_invariants(&self, params: &ProtocolParams) -> Result<()> {
        let fail = |what: &str| Err(Error::Invariant(format!("{what}: {self:?}")));
        match self.ref_state {
            RefState::InDispute => match (self.chosen, self.contender) {
                (Some(c), Some(w)) if w > c => {}
                _ => return fail("in-dispute needs chosen < contender"),
            },
            RefState::ChosenSelected => {
                if self.chosen.is_none() || self.contender.is_some() {
                    return fail("chosen-selected needs chosen and no contender");
                }
            }
            RefState::Ready => {
                if self.chosen.is_some() || self.contender.is_some() {
                    return fail("ready referee holds a candidate");
                }
            }
            RefState::NonSelected => {}
        }
        if self.num_replies > params.quorum_low {
            return fail("reply counter above quorum");
        }
        if self.cand_state == CandState::Elected && self.num_replies != params.quorum_low {
            return fail("elected without a full quorum");
        }
        if self.terminated && self.leader_rank.is_none() && self.cand_state != CandState::Elected {
            return fail("terminated without a leader");
        }
        Ok(())
    }
}

/// The heard-message set ("M-List").
pub trait MessageLog {
    fn contains(&self, msg: &Message) -> bool;
    /// Adds `msg`, returning `true` if it was not already present.
    fn insert(&mut self, msg: Message) -> bool;
}

impl<S: BuildHasher> MessageLog for HashSet<Message, S> {
    fn contains(&self, msg: &Message) -> bool {
        HashSet::contains(self, msg)
    }

    fn insert(&mut self, msg: Message) -> bool {
        HashSet::insert(self, msg)
    }
}

/// Enqueue `msg` on every incident edge except `except`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Broadcast {
    pub msg: Message,
    pub except: Option<Port>,
    /// `false` for relays of a message heard from a neighbor.
    pub generated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Notice {
    Initialized(Coins),
    Elected {
        rank: Rank,
        quorum: Vec<Rank>,
    },
    LearnedLeader(Rank),
    Terminated,
    /// A request arrived carrying a rank equal to the referee's chosen or
    /// contender; the strict comparisons no longer separate candidates.
    RankCollision(Rank),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Emission {
    pub sends: SmallVec<[Broadcast; 4]>,
    /// Remove the triggering message from the send queue of this port.
    pub withdraw: Option<Port>,
    pub notices: SmallVec<[Notice; 2]>,
}

impl Emission {
    pub fn is_empty(&self) -> bool {
        self.sends.is_empty() && self.withdraw.is_none() && self.notices.is_empty()
    }

    /// Messages this node originated, in order.
    pub fn generated(&self) -> impl Iterator<Item = &Message> {
        self.sends.iter().filter(|b| b.generated).map(|b| &b.msg)
    }

    pub fn clear(&mut self) {
        self.sends.clear();
        self.withdraw = None;
        self.notices.clear();
    }

    /// Originates `msg`: it enters the log at once and goes out on every edge,
    /// unless the node has already heard it, in which case it is already
    /// flooding and nothing more is sent.
    fn originate(&mut self, log: &mut impl MessageLog, msg: Message) {
        if log.insert(msg) {
            self.sends.push(Broadcast {
                msg,
                except: None,
                generated: true,
            });
        }
    }
}

fn own_rank(state: &NodeState) -> Result<Rank> {
    state
        .rank
        .ok_or_else(|| Error::Invariant("node has no rank before waking".into()))
}

/// Wakes the node: announces the wake-up, takes the rank, and settles both
/// roles from `coins`.
pub fn initialize(
    state: &mut NodeState,
    log: &mut impl MessageLog,
    coins: &Coins,
) -> Result<Emission> {
    let mut em = Emission::default();
    initialize_into(state, log, coins, &mut em)?;
    Ok(em)
}

/// [`initialize`], appending to an existing emission.
pub fn initialize_into(
    state: &mut NodeState,
    log: &mut impl MessageLog,
    coins: &Coins,
    em: &mut Emission,
) -> Result<()> {
    if state.awake {
        return Err(Error::Invariant(
            "initialize called on an awake node".into(),
        ));
    }
    state.awake = true;
    state.rank = Some(coins.rank);
    em.originate(log, Message::Wakeup);
    em.notices.push(Notice::Initialized(*coins));
    if coins.candidate {
        state.cand_state = CandState::Candidate;
        state.num_replies = 0;
        em.originate(log, Message::Request { rank: coins.rank });
    } else {
        state.cand_state = CandState::NonElected;
    }
    if coins.referee {
        state.ref_state = RefState::Ready;
        state.chosen = None;
        state.contender = None;
    } else {
        state.ref_state = RefState::NonSelected;
    }
    Ok(())
}

/// Handles a message arriving on `port`.
///
/// A message already in the log only cancels its own pending copy on that
/// port. A fresh message is logged, relayed on every other port, and then
/// dispatched. Terminated nodes drop fresh messages. An asleep node is woken
/// by whatever reaches it first.
pub fn on_receive(
    state: &mut NodeState,
    log: &mut impl MessageLog,
    port: Port,
    msg: &Message,
    params: &ProtocolParams,
    coins: &Coins,
) -> Result<Emission> {
    let mut em = Emission::default();
    on_receive_into(state, log, port, msg, params, coins, &mut em)?;
    Ok(em)
}

/// [`on_receive`], appending to an existing emission.
pub fn on_receive_into(
    state: &mut NodeState,
    log: &mut impl MessageLog,
    port: Port,
    msg: &Message,
    params: &ProtocolParams,
    coins: &Coins,
    em: &mut Emission,
) -> Result<()> {
    if log.contains(msg) {
        em.withdraw = Some(port);
        return Ok(());
    }
    if state.terminated {
        return Ok(());
    }
    if !state.awake && *msg != Message::Wakeup {
        initialize_into(state, log, coins, em)?;
    }
    log.insert(*msg);
    em.sends.push(Broadcast {
        msg: *msg,
        except: Some(port),
        generated: false,
    });

    match *msg {
        Message::Wakeup => {
            if !state.awake {
                initialize_into(state, log, coins, em)?;
            }
        }
        Message::Leader { rank } => {
            state.leader_rank = Some(rank);
            state.cand_state = CandState::NonElected;
            state.terminated = true;
            em.notices.push(Notice::LearnedLeader(rank));
            em.notices.push(Notice::Terminated);
        }
        Message::Approved { candidate, .. } | Message::Declined { candidate, .. }
            if Some(candidate) == state.rank =>
        {
            candidate_on_reply_into(state, log, msg, params, em)?;
        }
        Message::Dispute { chosen, .. } if Some(chosen) == state.rank => {
            candidate_dispute_response_into(state, log, em)?;
        }
        _ if state.is_referee() => {
            referee_dispatch_into(state, log, msg, em)?;
        }
        _ => {}
    }
    Ok(())
}

/// A referee's verdict on this node's own candidacy.
pub fn candidate_on_reply(
    state: &mut NodeState,
    log: &mut impl MessageLog,
    msg: &Message,
    params: &ProtocolParams,
) -> Result<Emission> {
    let mut em = Emission::default();
    candidate_on_reply_into(state, log, msg, params, &mut em)?;
    Ok(em)
}

fn candidate_on_reply_into(
    state: &mut NodeState,
    log: &mut impl MessageLog,
    msg: &Message,
    params: &ProtocolParams,
    em: &mut Emission,
) -> Result<()> {
    if state.cand_state != CandState::Candidate {
        return Ok(());
    }
    let rank = own_rank(state)?;
    match *msg {
        Message::Declined { candidate, .. } if candidate == rank => {
            state.cand_state = CandState::NonElected;
            em.originate(log, Message::Loses { rank });
        }
        Message::Approved { candidate, referee } if candidate == rank => {
            state.num_replies += 1;
            state.quorum.push(referee);
            if state.num_replies == params.quorum_low {
                state.cand_state = CandState::Elected;
                state.leader_rank = Some(rank);
                em.originate(log, Message::Leader { rank });
                state.terminated = true;
                em.notices.push(Notice::Elected {
                    rank,
                    quorum: state.quorum.clone(),
                });
                em.notices.push(Notice::Terminated);
            }
        }
        _ => {}
    }
    Ok(())
}

/// Routes a message to the referee role.
pub fn referee_dispatch(
    state: &mut NodeState,
    log: &mut impl MessageLog,
    msg: &Message,
) -> Result<Emission> {
    let mut em = Emission::default();
    referee_dispatch_into(state, log, msg, &mut em)?;
    Ok(em)
}

fn referee_dispatch_into(
    state: &mut NodeState,
    log: &mut impl MessageLog,
    msg: &Message,
    em: &mut Emission,
) -> Result<()> {
    match *msg {
        Message::Request { rank } => referee_request_response_into(state, log, rank, em),
        Message::Loses { rank }
            if state.ref_state == RefState::InDispute && state.chosen == Some(rank) =>
        {
            referee_dispute_reply_response_into(state, log, em)
        }
        _ => Ok(()),
    }
}

/// A referee's answer to a candidacy request from `candidate`.
pub fn referee_request_response(
    state: &mut NodeState,
    log: &mut impl MessageLog,
    candidate: Rank,
) -> Result<Emission> {
    let mut em = Emission::default();
    referee_request_response_into(state, log, candidate, &mut em)?;
    Ok(em)
}

fn referee_request_response_into(
    state: &mut NodeState,
    log: &mut impl MessageLog,
    candidate: Rank,
    em: &mut Emission,
) -> Result<()> {
    let me = own_rank(state)?;
    let u = candidate;
    if state.chosen == Some(u) || state.contender == Some(u) {
        em.notices.push(Notice::RankCollision(u));
    }
    match state.ref_state {
        RefState::NonSelected => {}
        RefState::Ready => {
            state.chosen = Some(u);
            em.originate(
                log,
                Message::Approved {
                    candidate: u,
                    referee: me,
                },
            );
            state.ref_state = RefState::ChosenSelected;
        }
        RefState::ChosenSelected => {
            let v = state
                .chosen
                .ok_or_else(|| Error::Invariant("chosen-selected without chosen".into()))?;
            if u < v {
                em.originate(
                    log,
                    Message::Declined {
                        candidate: u,
                        referee: me,
                    },
                );
            } else if log.contains(&Message::Loses { rank: v }) {
                state.chosen = Some(u);
                em.originate(
                    log,
                    Message::Approved {
                        candidate: u,
                        referee: me,
                    },
                );
            } else if log.contains(&Message::Dispute {
                chosen: v,
                contender: u,
            }) {
                state.contender = Some(u);
                state.ref_state = RefState::InDispute;
            } else {
                state.contender = Some(u);
                em.originate(
                    log,
                    Message::Dispute {
                        chosen: v,
                        contender: u,
                    },
                );
                state.ref_state = RefState::InDispute;
            }
        }
        RefState::InDispute => {
            let (v, w) = state
                .chosen
                .zip(state.contender)
                .ok_or_else(|| Error::Invariant("in-dispute without chosen/contender".into()))?;
            if u < w {
                em.originate(
                    log,
                    Message::Declined {
                        candidate: u,
                        referee: me,
                    },
                );
            } else {
                em.originate(
                    log,
                    Message::Declined {
                        candidate: w,
                        referee: me,
                    },
                );
                state.contender = Some(u);
                em.originate(
                    log,
                    Message::Dispute {
                        chosen: v,
                        contender: u,
                    },
                );
            }
        }
    }
    Ok(())
}

/// This node's chosen-ness is being disputed by a stronger candidate.
/// Only a still-undecided candidate concedes; an elected node has already
/// announced itself and a non-elected one has already conceded.
pub fn candidate_dispute_response(
    state: &mut NodeState,
    log: &mut impl MessageLog,
) -> Result<Emission> {
    let mut em = Emission::default();
    candidate_dispute_response_into(state, log, &mut em)?;
    Ok(em)
}

fn candidate_dispute_response_into(
    state: &mut NodeState,
    log: &mut impl MessageLog,
    em: &mut Emission,
) -> Result<()> {
    if state.cand_state == CandState::Candidate {
        let rank = own_rank(state)?;
        state.cand_state = CandState::NonElected;
        em.originate(log, Message::Loses { rank });
    }
    Ok(())
}

/// The disputed chosen candidate lost: the contender takes its place.
pub fn referee_dispute_reply_response(
    state: &mut NodeState,
    log: &mut impl MessageLog,
) -> Result<Emission> {
    let mut em = Emission::default();
    referee_dispute_reply_response_into(state, log, &mut em)?;
    Ok(em)
}

fn referee_dispute_reply_response_into(
    state: &mut NodeState,
    log: &mut impl MessageLog,
    em: &mut Emission,
) -> Result<()> {
    if state.ref_state != RefState::InDispute {
        return Err(Error::Invariant(
            "dispute reply handled outside in-dispute state".into(),
        ));
    }
    let me = own_rank(state)?;
    let u = state
        .contender
        .take()
        .ok_or_else(|| Error::Invariant("in-dispute without contender".into()))?;
    state.chosen = Some(u);
    state.ref_state = RefState::ChosenSelected;
    em.originate(
        log,
        Message::Approved {
            candidate: u,
            referee: me,
        },
    );
    Ok(())
}
