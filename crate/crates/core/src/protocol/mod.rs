//! The leader-election node state machine.
//!
//! Nodes pick a random rank and, independently, whether to act as a
//! *candidate* and/or a *referee*. Candidates flood a request; referees
//! approve the first candidate they hear from and afterwards decline weaker
//! ones, opening a *dispute* whenever a stronger candidate shows up while the
//! current one may already have won. A candidate with `quorum_low` approvals
//! declares itself leader. All communication is flooding with per-node
//! duplicate suppression.

mod local;
mod machine;
mod message;
mod params;

pub use local::{next_to_send, Fifo, LocalNode, OrderPolicy};
pub use machine::{
    candidate_dispute_response, candidate_on_reply, initialize, initialize_into, on_receive,
    on_receive_into, referee_dispatch, referee_dispute_reply_response, referee_request_response,
    Broadcast, CandState, Emission, MessageLog, NodeState, Notice, RefState,
};
pub use message::{Message, Rank};
pub use params::{Coins, Preset, ProtocolParams};
