//! Scheduling adversaries: who wakes when, how long each transmission takes,
//! and which queued message a freed channel sends next.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine::{DelayPolicy, Transmission};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::protocol::{Coins, Fifo, Message, OrderPolicy, Rank};
use crate::seed::{self, STREAM_ADVERSARY, STREAM_WAKE};

/// Every transmission takes exactly one time unit.
#[derive(Clone, Copy, Debug, Default)]
pub struct UnitDelay;

impl<P> DelayPolicy<P> for UnitDelay {
    fn delay(&mut self, _tx: &Transmission<'_, P>) -> f64 {
        1.0
    }
}

/// Delays drawn uniformly from (0, 1].
#[derive(Clone, Debug)]
pub struct UniformDelay {
    rng: ChaCha8Rng,
}

impl UniformDelay {
    pub fn new(seed: u64) -> Self {
        UniformDelay {
            rng: seed::rng(seed, STREAM_ADVERSARY),
        }
    }
}

impl<P> DelayPolicy<P> for UniformDelay {
    fn delay(&mut self, _tx: &Transmission<'_, P>) -> f64 {
        1.0 - self.rng.gen::<f64>()
    }
}

/// Tries to drive referees through disputes: the strongest candidate's
/// request and every concession crawl at the full time unit while all other
/// traffic races ahead. Without coin information the strongest request seen
/// so far stands in for the strongest candidate.
#[derive(Clone, Debug)]
pub struct DisputeStress {
    rng: ChaCha8Rng,
    strongest: Option<Rank>,
    informed: bool,
}

impl DisputeStress {
    pub const FAST: f64 = 0.1;

    pub fn new(seed: u64) -> Self {
        DisputeStress {
            rng: seed::rng(seed, STREAM_ADVERSARY),
            strongest: None,
            informed: false,
        }
    }

    fn fast(&mut self) -> f64 {
        Self::FAST * (1.0 - self.rng.gen::<f64>())
    }
}

impl DelayPolicy<Message> for DisputeStress {
    fn delay(&mut self, tx: &Transmission<'_, Message>) -> f64 {
        match *tx.msg {
            Message::Request { rank } => {
                if !self.informed && self.strongest.is_none_or(|s| rank >= s) {
                    self.strongest = Some(rank);
                }
                if Some(rank) == self.strongest {
                    1.0
                } else {
                    self.fast()
                }
            }
            Message::Loses { .. } => 1.0,
            _ => self.fast(),
        }
    }

    fn observe_coins(&mut self, coins: &[Coins]) {
        self.strongest = coins.iter().filter(|c| c.candidate).map(|c| c.rank).max();
        self.informed = true;
    }
}

/// Picks a uniformly random pending message instead of the oldest.
#[derive(Clone, Debug)]
pub struct RandomOrder {
    rng: ChaCha8Rng,
}

impl RandomOrder {
    pub fn new(seed: u64) -> Self {
        RandomOrder {
            rng: seed::rng(seed ^ 0x6f72_6465, STREAM_ADVERSARY),
        }
    }
}

impl OrderPolicy for RandomOrder {
    fn pick(&mut self, pending: usize) -> usize {
        self.rng.gen_range(0..pending)
    }
}

/// Replays delays from a recorded run. Running past the end yields NaN,
/// which the engine rejects.
#[derive(Clone, Debug)]
pub struct RecordedDelays {
    delays: Vec<f64>,
    next: usize,
}

impl RecordedDelays {
    pub fn new(delays: Vec<f64>) -> Self {
        RecordedDelays { delays, next: 0 }
    }
}

impl<P> DelayPolicy<P> for RecordedDelays {
    fn delay(&mut self, _tx: &Transmission<'_, P>) -> f64 {
        let d = self.delays.get(self.next).copied().unwrap_or(f64::NAN);
        self.next += 1;
        d
    }
}

/// Replays queue picks from a recorded run.
#[derive(Clone, Debug)]
pub struct RecordedOrder {
    picks: Vec<usize>,
    next: usize,
}

impl RecordedOrder {
    pub fn new(picks: Vec<usize>) -> Self {
        RecordedOrder { picks, next: 0 }
    }
}

impl OrderPolicy for RecordedOrder {
    fn pick(&mut self, _pending: usize) -> usize {
        let p = self.picks.get(self.next).copied().unwrap_or(0);
        self.next += 1;
        p
    }
}

/// A fully built adversary for one run.
pub struct Adversary {
    pub name: String,
    /// External wake-ups as `(node, time)`. Nodes not listed wake only when
    /// a message reaches them.
    pub wakeup: Vec<(NodeId, f64)>,
    pub delay: Box<dyn DelayPolicy<Message> + Send>,
    pub order: Box<dyn OrderPolicy + Send>,
}

impl Adversary {
    pub fn new(
        name: impl Into<String>,
        wakeup: Vec<(NodeId, f64)>,
        delay: impl DelayPolicy<Message> + Send + 'static,
        order: impl OrderPolicy + Send + 'static,
    ) -> Self {
        Adversary {
            name: name.into(),
            wakeup,
            delay: Box::new(delay),
            order: Box::new(order),
        }
    }

    /// Unit delays, FIFO queues, `initiator` woken at time 0.
    pub fn synchronous(initiator: NodeId) -> Self {
        Adversary::new("unit", vec![(initiator, 0.0)], UnitDelay, Fifo)
    }

    pub fn with_wakeup(mut self, wakeup: Vec<(NodeId, f64)>) -> Self {
        self.wakeup = wakeup;
        self
    }
}

impl fmt::Debug for Adversary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Adversary")
            .field("name", &self.name)
            .field("wakeup", &self.wakeup)
            .finish_non_exhaustive()
    }
}

/// The built-in adversary catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    /// One random initiator, unit delays, FIFO.
    Unit,
    /// One random initiator, uniform delays, FIFO.
    Uniform,
    /// Every node woken at time 0, uniform delays.
    AllAtOnce,
    /// A random half of the nodes woken at random times in [0, D].
    RandomSubset,
    /// One random initiator, delays tuned to provoke disputes.
    DisputeStress,
    /// One random initiator, uniform delays, random queue order.
    ArbitraryOrder,
}

const ALL: [AdversaryKind; 6] = [
    AdversaryKind::Unit,
    AdversaryKind::Uniform,
    AdversaryKind::AllAtOnce,
    AdversaryKind::RandomSubset,
    AdversaryKind::DisputeStress,
    AdversaryKind::ArbitraryOrder,
];

pub fn builtin_adversaries() -> &'static [AdversaryKind] {
    &ALL
}

impl AdversaryKind {
    pub fn name(self) -> &'static str {
        match self {
            AdversaryKind::Unit => "unit",
            AdversaryKind::Uniform => "uniform",
            AdversaryKind::AllAtOnce => "all-at-once",
            AdversaryKind::RandomSubset => "random-subset",
            AdversaryKind::DisputeStress => "dispute-stress",
            AdversaryKind::ArbitraryOrder => "arbitrary-order",
        }
    }

    /// Whether every transmission takes exactly one time unit.
    pub fn is_unit_delay(self) -> bool {
        self == AdversaryKind::Unit
    }

    pub fn wake_schedule(self, graph: &Graph, seed: u64) -> Vec<(NodeId, f64)> {
        let n = graph.node_count();
        let mut rng = seed::rng(seed, STREAM_WAKE);
        match self {
            AdversaryKind::AllAtOnce => (0..n as NodeId).map(|v| (v, 0.0)).collect(),
            AdversaryKind::RandomSubset => {
                let d = graph.diameter() as f64;
                let k = (n / 2).max(1);
                let mut nodes = sample(&mut rng, n, k).into_vec();
                nodes.sort_unstable();
                let mut out: Vec<_> = nodes
                    .into_iter()
                    .map(|v| (v as NodeId, rng.gen::<f64>() * d))
                    .collect();
                // Anchor the clock: the earliest wake-up is at 0.
                let t0 = out.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
                for w in &mut out {
                    w.1 -= t0;
                }
                out
            }
            _ => vec![(rng.gen_range(0..n) as NodeId, 0.0)],
        }
    }

    pub fn build(self, graph: &Graph, seed: u64) -> Adversary {
        let wakeup = self.wake_schedule(graph, seed);
        let name = self.name();
        match self {
            AdversaryKind::Unit => Adversary::new(name, wakeup, UnitDelay, Fifo),
            AdversaryKind::Uniform | AdversaryKind::AllAtOnce | AdversaryKind::RandomSubset => {
                Adversary::new(name, wakeup, UniformDelay::new(seed), Fifo)
            }
            AdversaryKind::DisputeStress => {
                Adversary::new(name, wakeup, DisputeStress::new(seed), Fifo)
            }
            AdversaryKind::ArbitraryOrder => Adversary::new(
                name,
                wakeup,
                UniformDelay::new(seed),
                RandomOrder::new(seed),
            ),
        }
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdversaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL.iter().copied().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!(
                "unknown adversary '{s}', expected one of {}",
                names.join(", ")
            ))
        })
    }
}
