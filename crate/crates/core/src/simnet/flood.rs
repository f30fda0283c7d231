use super::engine::{Arrival, DelayPolicy, Engine, Logic, NodeIo};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::protocol::Fifo;

struct Flood {
    source: NodeId,
    k: u32,
    remaining: u64,
    done_at: Option<f64>,
}

impl Flood {
    fn heard(&mut self, now: f64) {
        self.remaining -= 1;
        if self.remaining == 0 {
            self.done_at = Some(now);
        }
    }
}

impl Logic<u32> for Flood {
    fn wake(&mut self, node: NodeId, io: &mut NodeIo<'_, u32>) -> Result<()> {
        debug_assert_eq!(node, self.source);
        for token in 0..self.k {
            io.hear(&token);
            io.broadcast(&token, None);
            self.heard(io.now);
        }
        Ok(())
    }

    fn deliver(&mut self, at: Arrival, io: &mut NodeIo<'_, u32>) -> Result<()> {
        if io.heard_id(at.id) {
            io.withdraw(at.port, at.id);
        } else {
            let token = io.payload(at.id);
            io.hear(&token);
            io.broadcast(&token, Some(at.port));
            self.heard(io.now);
        }
        Ok(())
    }
}

/// Floods `k` distinct tokens from `source` using the same channel model as
/// the election runs, with the protocol switched off, and returns the time
/// at which every node holds every token.
pub fn flood_only(
    graph: &Graph,
    source: NodeId,
    k: u32,
    delays: &mut dyn DelayPolicy<u32>,
) -> Result<f64> {
    if source as usize >= graph.node_count() {
        return Err(Error::Parameter(format!("source {source} out of range")));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let mut logic = Flood {
        source,
        k,
        remaining: graph.node_count() as u64 * k as u64,
        done_at: None,
    };
    let mut engine = Engine::new(graph);
    engine.run(&mut logic, delays, &mut Fifo, &[(source, 0.0)], u64::MAX)?;
    logic
        .done_at
        .ok_or_else(|| Error::Invariant("flood did not reach every node".into()))
}
