//! A self-contained node: protocol state plus a hash-set log and plain
//! per-port send queues. Used for unit tests and small hand-driven scenarios;
//! the simulator keeps its own compact representation of the same data.

use std::collections::VecDeque;

use rustc_hash::FxHashSet;

use super::machine::{self, Emission, NodeState};
use super::message::Message;
use super::params::{Coins, ProtocolParams};
use crate::error::Result;
use crate::graph::Port;

/// Chooses which queued message a freed channel transmits next.
pub trait OrderPolicy {
    /// Index into the `pending` live entries of the queue, oldest first.
    fn pick(&mut self, pending: usize) -> usize;

    /// `true` if `pick` always returns 0.
    fn is_fifo(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Fifo;

impl OrderPolicy for Fifo {
    fn pick(&mut self, _pending: usize) -> usize {
        0
    }

    fn is_fifo(&self) -> bool {
        true
    }
}

impl<F: FnMut(usize) -> usize> OrderPolicy for F {
    fn pick(&mut self, pending: usize) -> usize {
        self(pending)
    }
}

/// Takes one message off `queue` according to `policy`.
pub fn next_to_send(
    queue: &mut VecDeque<Message>,
    policy: &mut dyn OrderPolicy,
) -> Option<Message> {
    if queue.is_empty() {
        return None;
    }
    let i = if policy.is_fifo() {
        0
    } else {
        policy.pick(queue.len()).min(queue.len() - 1)
    };
    queue.remove(i)
}

#[derive(Clone, Debug)]
pub struct LocalNode {
    pub state: NodeState,
    pub m_list: FxHashSet<Message>,
    pub send_list: Vec<VecDeque<Message>>,
    pub coins: Coins,
}

impl LocalNode {
    pub fn new(degree: usize, coins: Coins) -> Self {
        LocalNode {
            state: NodeState::new(),
            m_list: FxHashSet::default(),
            send_list: vec![VecDeque::new(); degree],
            coins,
        }
    }

    pub fn degree(&self) -> usize {
        self.send_list.len()
    }

    pub fn initialize(&mut self) -> Result<Emission> {
        let em = machine::initialize(&mut self.state, &mut self.m_list, &self.coins)?;
        self.apply(&em, None);
        Ok(em)
    }

    pub fn receive(
        &mut self,
        port: Port,
        msg: Message,
        params: &ProtocolParams,
    ) -> Result<Emission> {
        let em = machine::on_receive(
            &mut self.state,
            &mut self.m_list,
            port,
            &msg,
            params,
            &self.coins,
        )?;
        self.apply(&em, Some(&msg));
        Ok(em)
    }

    /// Enqueues the emission's broadcasts and performs its withdrawal.
    pub fn apply(&mut self, em: &Emission, trigger: Option<&Message>) {
        if let (Some(port), Some(msg)) = (em.withdraw, trigger) {
            let q = &mut self.send_list[port];
            if let Some(i) = q.iter().position(|m| m == msg) {
                q.remove(i);
            }
        }
        for b in &em.sends {
            for (port, q) in self.send_list.iter_mut().enumerate() {
                if b.except != Some(port) {
                    q.push_back(b.msg);
                }
            }
        }
    }

    pub fn next_to_send(&mut self, port: Port, policy: &mut dyn OrderPolicy) -> Option<Message> {
        next_to_send(&mut self.send_list[port], policy)
    }
}
