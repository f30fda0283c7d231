//! Execution traces: a header describing the run followed by time-ordered
//! records. Stored as JSON lines (optionally gzipped) with a plain text
//! export for eyeballing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::protocol::{Coins, Message, ProtocolParams, Rank};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub n: usize,
    pub edges: Vec<(NodeId, NodeId)>,
    pub params: ProtocolParams,
    pub seed: u64,
    pub adversary: String,
    pub wakeup: Vec<(NodeId, f64)>,
    pub event_budget: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Wake {
        t: f64,
        node: NodeId,
    },
    Init {
        t: f64,
        node: NodeId,
        coins: Coins,
    },
    Send {
        t: f64,
        src: NodeId,
        dst: NodeId,
        msg: Message,
        delay: f64,
        /// Queue position picked by the order policy, 0 for the oldest.
        pick: usize,
    },
    Deliver {
        t: f64,
        src: NodeId,
        dst: NodeId,
        msg: Message,
    },
    Generate {
        t: f64,
        node: NodeId,
        msg: Message,
    },
    Elected {
        t: f64,
        node: NodeId,
        rank: Rank,
        quorum: Vec<Rank>,
    },
    Learned {
        t: f64,
        node: NodeId,
        leader: Rank,
    },
    Collision {
        t: f64,
        node: NodeId,
        rank: Rank,
    },
}

impl Record {
    pub fn time(&self) -> f64 {
        match *self {
            Record::Wake { t, .. }
            | Record::Init { t, .. }
            | Record::Send { t, .. }
            | Record::Deliver { t, .. }
            | Record::Generate { t, .. }
            | Record::Elected { t, .. }
            | Record::Learned { t, .. }
            | Record::Collision { t, .. } => t,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Record::Wake { .. } => "wake",
            Record::Init { .. } => "init",
            Record::Send { .. } => "send",
            Record::Deliver { .. } => "deliver",
            Record::Generate { .. } => "generate",
            Record::Elected { .. } => "elected",
            Record::Learned { .. } => "learned",
            Record::Collision { .. } => "collision",
        }
    }

    /// One line: `time kind src dst payload`, with `-` for absent fields.
    pub fn to_text(&self) -> String {
        let t = self.time();
        let k = self.kind();
        match self {
            Record::Send { src, dst, msg, .. } | Record::Deliver { src, dst, msg, .. } => {
                format!("{t} {k} {src} {dst} {}", msg.to_hex())
            }
            Record::Generate { node, msg, .. } => format!("{t} {k} {node} - {}", msg.to_hex()),
            Record::Wake { node, .. } => format!("{t} {k} {node} - -"),
            Record::Init { node, coins, .. } => format!(
                "{t} {k} {node} - rank={},candidate={},referee={}",
                coins.rank, coins.candidate, coins.referee
            ),
            Record::Elected { node, rank, .. } => format!("{t} {k} {node} - rank={rank}"),
            Record::Learned { node, leader, .. } => format!("{t} {k} {node} - leader={leader}"),
            Record::Collision { node, rank, .. } => format!("{t} {k} {node} - rank={rank}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<Record>,
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

impl Trace {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, line)) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        break serde_json::from_str(&line)?;
                    }
                }
                None => {
                    return Err(Error::Parse {
                        line: 1,
                        reason: "empty trace".into(),
                    })
                }
            }
        };
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?);
        }
        Ok(Trace { header, records })
    }

    /// Writes JSON lines, gzipped when the path ends in `.gz`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = BufWriter::new(File::create(path)?);
        if is_gz(path) {
            let mut gz = GzEncoder::new(f, Compression::default());
            self.write_jsonl(&mut gz)?;
            gz.finish()?.flush()?;
        } else {
            let mut f = f;
            self.write_jsonl(&mut f)?;
            f.flush()?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path)?;
        let r: Box<dyn Read> = if is_gz(path) {
            Box::new(GzDecoder::new(f))
        } else {
            Box::new(f)
        };
        Self::read_jsonl(BufReader::new(r))
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            writeln!(w, "{}", r.to_text())?;
        }
        Ok(())
    }

    pub fn elected(&self) -> impl Iterator<Item = (NodeId, Rank, &[Rank])> {
        self.records.iter().filter_map(|r| match r {
            Record::Elected {
                node, rank, quorum, ..
            } => Some((*node, *rank, quorum.as_slice())),
            _ => None,
        })
    }

    pub fn transmissions(&self) -> usize {
        self.records
            .iter()
            .filter(|r| matches!(r, Record::Send { .. }))
            .count()
    }
}
