//! Discrete-event core shared by protocol runs and pure flooding.
//!
//! Every directed edge is a channel that carries one message at a time: the
//! next transmission on an arc starts only when the previous one has been
//! delivered. Events are processed in `(time, sequence)` order.
//! Payloads are interned to dense ids so per-node logs and per-arc queue
//! membership are bitsets.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::hash::Hash;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::graph::{ArcId, Graph, NodeId, Port};
use crate::protocol::{Coins, Message, MessageLog, OrderPolicy};

pub type MsgId = u32;

/// One transmission as seen by a delay policy.
#[derive(Clone, Copy, Debug)]
pub struct Transmission<'a, P> {
    pub arc: ArcId,
    pub src: NodeId,
    pub dst: NodeId,
    pub msg: &'a P,
    pub now: f64,
}

/// Decides how long each transmission takes. Must return a value in (0, 1].
///
/// A policy sees every transmission in order, so it can keep whatever
/// history it wants; protocol runs also reveal all coin outcomes up front.
pub trait DelayPolicy<P> {
    fn delay(&mut self, tx: &Transmission<'_, P>) -> f64;

    fn observe_coins(&mut self, _coins: &[Coins]) {}
}

#[derive(Clone, Debug, Default)]
pub(crate) struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    #[inline]
    pub fn get(&self, i: u32) -> bool {
        self.words
            .get((i >> 6) as usize)
            .is_some_and(|w| w >> (i & 63) & 1 == 1)
    }

    /// Sets bit `i`, returning its previous value.
    #[inline]
    pub fn set(&mut self, i: u32) -> bool {
        let w = (i >> 6) as usize;
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        let mask = 1u64 << (i & 63);
        let old = self.words[w] & mask != 0;
        self.words[w] |= mask;
        old
    }

    /// Clears bit `i`, returning its previous value.
    #[inline]
    pub fn take(&mut self, i: u32) -> bool {
        match self.words.get_mut((i >> 6) as usize) {
            Some(w) => {
                let mask = 1u64 << (i & 63);
                let old = *w & mask != 0;
                *w &= !mask;
                old
            }
            None => false,
        }
    }
}

#[derive(Debug)]
pub(crate) struct Interner<P> {
    ids: FxHashMap<P, MsgId>,
    items: Vec<P>,
}

impl<P: Copy + Eq + Hash> Interner<P> {
    fn new() -> Self {
        Interner {
            ids: FxHashMap::default(),
            items: Vec::new(),
        }
    }

    #[inline]
    pub fn lookup(&self, p: &P) -> Option<MsgId> {
        self.ids.get(p).copied()
    }

    #[inline]
    pub fn intern(&mut self, p: P) -> MsgId {
        let next = self.items.len() as MsgId;
        let id = *self.ids.entry(p).or_insert(next);
        if id == next {
            self.items.push(p);
        }
        id
    }

    #[inline]
    pub fn get(&self, id: MsgId) -> P {
        self.items[id as usize]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
}

#[derive(Debug, Default)]
struct Channel {
    queue: VecDeque<MsgId>,
    live: BitSet,
    ever: BitSet,
    busy: bool,
}

const WAKE: ArcId = ArcId::MAX;

/// A pending wake-up (`arc == WAKE`, `id` is the node) or delivery. Event
/// times are never negative, so their bit patterns order like the values
/// and `(time bits, seq)` packs into a single integer key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Event {
    key: u128,
    arc: ArcId,
    id: u32,
}

impl Event {
    fn time(&self) -> f64 {
        f64::from_bits((self.key >> 64) as u64)
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.cmp(&self.key)
    }
}

/// Where a delivery came from and where it lands.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Arrival {
    pub src: NodeId,
    pub dst: NodeId,
    pub port: Port,
    pub id: MsgId,
}

/// Node behavior driven by the engine.
pub(crate) trait Logic<P> {
    fn wake(&mut self, node: NodeId, io: &mut NodeIo<'_, P>) -> Result<()>;
    fn deliver(&mut self, at: Arrival, io: &mut NodeIo<'_, P>) -> Result<()>;
    fn transmitted(&mut self, _now: f64, _arc: ArcId, _msg: &P, _delay: f64, _pick: usize) {}
}

/// A node's window onto the engine while it handles one event.
pub(crate) struct NodeIo<'a, P> {
    pub now: f64,
    first_arc: ArcId,
    degree: usize,
    table: &'a mut Interner<P>,
    heard: &'a mut BitSet,
    channels: &'a mut [Channel],
    dirty: &'a mut Vec<ArcId>,
    double_enqueues: &'a mut u64,
    track: bool,
    hint: Option<(P, MsgId)>,
}

impl<P: Copy + Eq + Hash> NodeIo<'_, P> {
    #[inline]
    fn id_of(&self, msg: &P) -> Option<MsgId> {
        match self.hint {
            Some((h, id)) if h == *msg => Some(id),
            _ => self.table.lookup(msg),
        }
    }

    #[inline]
    fn intern(&mut self, msg: &P) -> MsgId {
        match self.hint {
            Some((h, id)) if h == *msg => id,
            _ => self.table.intern(*msg),
        }
    }

    pub fn payload(&self, id: MsgId) -> P {
        self.table.get(id)
    }

    pub fn heard(&self, msg: &P) -> bool {
        self.id_of(msg).is_some_and(|id| self.heard.get(id))
    }

    pub fn heard_id(&self, id: MsgId) -> bool {
        self.heard.get(id)
    }

    /// Marks `msg` heard; `true` if it was new.
    pub fn hear(&mut self, msg: &P) -> bool {
        let id = self.intern(msg);
        !self.heard.set(id)
    }

    /// Enqueues `msg` on every port except `except`.
    pub fn broadcast(&mut self, msg: &P, except: Option<Port>) {
        let id = self.intern(msg);
        for port in 0..self.degree {
            if Some(port) == except {
                continue;
            }
            let arc = self.first_arc + port as ArcId;
            let ch = &mut self.channels[arc as usize];
            if self.track && ch.ever.set(id) {
                *self.double_enqueues += 1;
            }
            ch.live.set(id);
            ch.queue.push_back(id);
            if !ch.busy {
                self.dirty.push(arc);
            }
        }
    }

    /// Drops `id` from the queue of `port` if it has not been sent yet.
    pub fn withdraw(&mut self, port: Port, id: MsgId) {
        let arc = self.first_arc + port as ArcId;
        self.channels[arc as usize].live.take(id);
    }
}

impl MessageLog for NodeIo<'_, Message> {
    fn contains(&self, msg: &Message) -> bool {
        self.heard(msg)
    }

    fn insert(&mut self, msg: Message) -> bool {
        self.hear(&msg)
    }
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Finish {
    pub quiescent: bool,
    pub first_time: f64,
    pub last_time: f64,
}

pub(crate) struct Engine<'g, P> {
    graph: &'g Graph,
    pub table: Interner<P>,
    heard: Vec<BitSet>,
    channels: Vec<Channel>,
    heap: BinaryHeap<Event>,
    seq: u64,
    dirty: Vec<ArcId>,
    pub transmissions: u64,
    pub per_payload: Vec<u32>,
    pub double_enqueues: u64,
    /// Count payloads queued twice on one arc (costs a bitset per arc).
    pub track_enqueues: bool,
    pub events: u64,
}

impl<'g, P: Copy + Eq + Hash> Engine<'g, P> {
    pub fn new(graph: &'g Graph) -> Self {
        Engine {
            graph,
            table: Interner::new(),
            heard: vec![BitSet::default(); graph.node_count()],
            channels: (0..graph.arc_count()).map(|_| Channel::default()).collect(),
            heap: BinaryHeap::new(),
            seq: 0,
            dirty: Vec::new(),
            transmissions: 0,
            per_payload: Vec::new(),
            double_enqueues: 0,
            track_enqueues: false,
            events: 0,
        }
    }

    fn push(&mut self, time: f64, arc: ArcId, id: u32) {
        debug_assert!(time >= 0.0);
        // Adding +0.0 folds a negative zero into the positive one.
        let bits = (time + 0.0).to_bits();
        self.heap.push(Event {
            key: (bits as u128) << 64 | self.seq as u128,
            arc,
            id,
        });
        self.seq += 1;
    }

    /// Processes events until none remain or `budget` events have run.
    pub fn run<L: Logic<P>>(
        &mut self,
        logic: &mut L,
        delays: &mut dyn DelayPolicy<P>,
        order: &mut dyn OrderPolicy,
        wakeups: &[(NodeId, f64)],
        budget: u64,
    ) -> Result<Finish> {
        for &(node, t) in wakeups {
            self.push(t, WAKE, node);
        }
        let mut first_time = None;
        let mut last_time = 0.0;
        let fifo = order.is_fifo();
        while let Some(ev) = self.heap.pop() {
            if self.events >= budget {
                self.heap.push(ev);
                return Ok(Finish {
                    quiescent: false,
                    first_time: first_time.unwrap_or(0.0),
                    last_time,
                });
            }
            self.events += 1;
            let now = ev.time();
            first_time.get_or_insert(now);
            last_time = now;
            match ev {
                Event {
                    arc: WAKE,
                    id: node,
                    ..
                } => {
                    let mut io = self.io(node, now, None);
                    logic.wake(node, &mut io)?;
                }
                Event { arc, id, .. } => {
                    self.channels[arc as usize].busy = false;
                    self.dirty.push(arc);
                    let at = Arrival {
                        src: self.graph.arc_tail(arc),
                        dst: self.graph.arc_head(arc),
                        port: self.graph.arrival_port(arc),
                        id,
                    };
                    let hint = Some((self.table.get(id), id));
                    let mut io = self.io(at.dst, now, hint);
                    logic.deliver(at, &mut io)?;
                }
            }
            let mut i = 0;
            while i < self.dirty.len() {
                let arc = self.dirty[i];
                self.try_start(arc, now, logic, delays, order, fifo)?;
                i += 1;
            }
            self.dirty.clear();
        }
        Ok(Finish {
            quiescent: true,
            first_time: first_time.unwrap_or(0.0),
            last_time,
        })
    }

    fn io(&mut self, node: NodeId, now: f64, hint: Option<(P, MsgId)>) -> NodeIo<'_, P> {
        NodeIo {
            now,
            first_arc: self.graph.first_arc(node),
            degree: self.graph.degree(node),
            table: &mut self.table,
            heard: &mut self.heard[node as usize],
            channels: &mut self.channels,
            dirty: &mut self.dirty,
            double_enqueues: &mut self.double_enqueues,
            track: self.track_enqueues,
            hint,
        }
    }

    fn try_start<L: Logic<P>>(
        &mut self,
        arc: ArcId,
        now: f64,
        logic: &mut L,
        delays: &mut dyn DelayPolicy<P>,
        order: &mut dyn OrderPolicy,
        fifo: bool,
    ) -> Result<()> {
        let ch = &mut self.channels[arc as usize];
        if ch.busy {
            return Ok(());
        }
        let (id, pick) = if fifo {
            loop {
                match ch.queue.pop_front() {
                    Some(id) if ch.live.take(id) => break (id, 0),
                    Some(_) => continue,
                    None => return Ok(()),
                }
            }
        } else {
            let live = &ch.live;
            ch.queue.retain(|&id| live.get(id));
            if ch.queue.is_empty() {
                return Ok(());
            }
            let i = order.pick(ch.queue.len()).min(ch.queue.len() - 1);
            let id = ch.queue.remove(i).expect("index in range");
            ch.live.take(id);
            (id, i)
        };
        ch.busy = true;
        let msg = self.table.get(id);
        let delay = delays.delay(&Transmission {
            arc,
            src: self.graph.arc_tail(arc),
            dst: self.graph.arc_head(arc),
            msg: &msg,
            now,
        });
        if !(delay > 0.0 && delay <= 1.0) {
            return Err(Error::InvalidDelay { delay });
        }
        if self.per_payload.len() <= id as usize {
            self.per_payload.resize(id as usize + 1, 0);
        }
        self.per_payload[id as usize] += 1;
        self.transmissions += 1;
        logic.transmitted(now, arc, &msg, delay, pick);
        self.push(now + delay, arc, id);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitset_basics() {
        let mut b = BitSet::default();
        assert!(!b.get(1000));
        assert!(!b.set(1000));
        assert!(b.set(1000));
        assert!(b.get(1000));
        assert!(b.take(1000));
        assert!(!b.take(1000));
        assert!(!b.take(5000));
    }

    #[test]
    fn events_pop_in_time_then_sequence_order() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let mut e: Engine<'_, u32> = Engine::new(&g);
        for t in [2.0, 1.0, 1.0, 0.5, 0.0, -0.0, 1e-300] {
            e.push(t, WAKE, 0);
        }
        let order: Vec<_> = std::iter::from_fn(|| e.heap.pop())
            .map(|ev| (ev.time(), (ev.key & u64::MAX as u128) as u64))
            .collect();
        assert_eq!(
            order,
            vec![
                (0.0, 4),
                (0.0, 5),
                (1e-300, 6),
                (0.5, 3),
                (1.0, 1),
                (1.0, 2),
                (2.0, 0)
            ]
        );
    }

    #[test]
    fn interner_is_dense() {
        let mut t = Interner::new();
        assert_eq!(t.intern(10u32), 0);
        assert_eq!(t.intern(20u32), 1);
        assert_eq!(t.intern(10u32), 0);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get(1), 20);
        assert_eq!(t.lookup(&30), None);
    }
}
