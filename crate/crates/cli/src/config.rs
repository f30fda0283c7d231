//! Experiment configuration: a TOML document that fully determines a sweep.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use election_core::graph::{Graph, GraphFamily};
use election_core::protocol::{Preset, ProtocolParams};
use election_core::simnet::AdversaryKind;
use election_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Ring,
    /// Square torus; n must be a perfect square.
    Torus,
    Complete,
    RandomP,
    RandomM,
    EdgeList,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Retention {
    #[default]
    None,
    FailuresOnly,
    All,
}

/// How the `n_estimate` every node is told relates to the real size.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NEstimate {
    #[default]
    Exact,
    /// `n_estimate = ⌈factor·n⌉`, factor in (0, 1].
    Lower(f64),
    /// `n_estimate = ⌊factor·n⌋`, factor ≥ 1.
    Upper(f64),
}

impl NEstimate {
    pub fn apply(self, n: usize) -> u64 {
        match self {
            NEstimate::Exact => n as u64,
            NEstimate::Lower(f) => (f * n as f64 - 1e-9).ceil() as u64,
            NEstimate::Upper(f) => (f * n as f64 + 1e-9).floor() as u64,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            NEstimate::Lower(f) if !(f > 0.0 && f <= 1.0) => Err(Error::Config(format!(
                "lower-bound factor {f} not in (0, 1]"
            ))),
            NEstimate::Upper(f) if !(f >= 1.0 && f.is_finite()) => Err(Error::Config(format!(
                "upper-bound factor {f} must be >= 1"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for NEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NEstimate::Exact => f.write_str("exact"),
            NEstimate::Lower(x) => write!(f, "lower:{x}"),
            NEstimate::Upper(x) => write!(f, "upper:{x}"),
        }
    }
}

impl FromStr for NEstimate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "n-estimate policy '{s}': expected exact, lower:<f> or upper:<f>"
            ))
        };
        if s == "exact" {
            return Ok(NEstimate::Exact);
        }
        let (kind, x) = s.split_once(':').ok_or_else(bad)?;
        let x: f64 = x.parse().map_err(|_| bad())?;
        let p = match kind {
            "lower" => NEstimate::Lower(x),
            "upper" => NEstimate::Upper(x),
            _ => return Err(bad()),
        };
        p.validate()?;
        Ok(p)
    }
}

impl TryFrom<String> for NEstimate {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NEstimate> for String {
    fn from(p: NEstimate) -> String {
        p.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub family: Family,
    /// Sizes to sweep. Ignored for edge lists.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Edge probability for `random-p`; defaults to `avg_degree / (n − 1)`.
    pub p: Option<f64>,
    #[serde(default = "default_degree")]
    pub avg_degree: f64,
    /// Edge count for `random-m`; defaults to `avg_degree·n/2`.
    pub m: Option<usize>,
    pub edge_list: Option<PathBuf>,
}

fn default_degree() -> f64 {
    6.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    #[serde(default = "default_preset")]
    pub preset: Preset,
    /// Overrides the preset's role coefficient.
    pub c: Option<f64>,
    /// Overrides the preset's quorum fraction.
    pub quorum_fraction: Option<f64>,
    /// Overrides the computed approval threshold.
    pub quorum_low: Option<u64>,
    pub rank_space_max: Option<u64>,
    #[serde(default)]
    pub n_estimate: NEstimate,
    pub forced_candidates: Option<usize>,
    pub forced_referees: Option<usize>,
    #[serde(default)]
    pub distinct_ranks: bool,
}

fn default_preset() -> Preset {
    Preset::Desk
}

impl Default for ProtocolSpec {
    fn default() -> Self {
        ProtocolSpec {
            preset: Preset::Desk,
            c: None,
            quorum_fraction: None,
            quorum_low: None,
            rank_space_max: None,
            n_estimate: NEstimate::Exact,
            forced_candidates: None,
            forced_referees: None,
            distinct_ranks: false,
        }
    }
}

impl ProtocolSpec {
    pub fn params(&self, n: usize) -> Result<ProtocolParams> {
        let (c0, q0) = self.preset.coefficients();
        let est = self.n_estimate.apply(n);
        let mut p = ProtocolParams::new(
            est,
            self.c.unwrap_or(c0),
            self.quorum_fraction.unwrap_or(q0),
        )?;
        if let Some(q) = self.quorum_low {
            p = p.with_quorum_low(q)?;
        }
        if let Some(r) = self.rank_space_max {
            p.rank_space_max = r;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn forced(&self) -> Option<(usize, usize)> {
        match (self.forced_candidates, self.forced_referees) {
            (None, None) => None,
            (c, k) => Some((c.unwrap_or(0), k.unwrap_or(0))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    #[serde(default)]
    pub protocol: ProtocolSpec,
    pub adversaries: Vec<AdversaryKind>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub keep_traces: Retention,
    /// Per-run event budget before a run is cut off as non-quiescent.
    pub event_budget: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Canonical text form; loading it back gives an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The sizes this experiment runs at, after reading any edge list.
    pub fn sizes(&self) -> Result<Vec<usize>> {
        if self.graph.family == Family::EdgeList {
            return Ok(vec![self.edge_list_graph()?.node_count()]);
        }
        Ok(self.graph.sizes.clone())
    }

    fn edge_list_graph(&self) -> Result<Graph> {
        let path = self.graph.edge_list.as_ref().ok_or_else(|| {
            Error::Config("graph.edge_list is required for the edge-list family".into())
        })?;
        Graph::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    /// The generator input for size `n`.
    pub fn family(&self, n: usize) -> Result<GraphFamily> {
        let g = &self.graph;
        Ok(match g.family {
            Family::Ring => GraphFamily::Ring { n },
            Family::Complete => GraphFamily::Complete { n },
            Family::Torus => {
                let side = (n as f64).sqrt().round() as usize;
                if side * side != n {
                    return Err(Error::Config(format!(
                        "torus size {n} is not a perfect square"
                    )));
                }
                GraphFamily::Torus2d {
                    rows: side,
                    cols: side,
                }
            }
            Family::RandomP => GraphFamily::RandomP {
                n,
                p: g.p.unwrap_or((g.avg_degree / (n as f64 - 1.0)).min(1.0)),
            },
            Family::RandomM => GraphFamily::RandomM {
                n,
                m: g.m
                    .unwrap_or((g.avg_degree * n as f64 / 2.0).round() as usize),
            },
            Family::EdgeList => {
                let graph = self.edge_list_graph()?;
                GraphFamily::FromEdgeList {
                    n: graph.node_count(),
                    edges: graph.edges().to_vec(),
                }
            }
        })
    }

    /// Rejects configs that cannot run, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, why: String| Err(Error::Config(format!("{field}: {why}")));
        if self.trials == 0 {
            return fail("trials", "must be positive".into());
        }
        if self.adversaries.is_empty() {
            return fail("adversaries", "at least one is required".into());
        }
        let sizes = self.sizes()?;
        if sizes.is_empty() {
            return fail("graph.sizes", "at least one size is required".into());
        }
        if let Some(&n) = sizes.iter().find(|&&n| n < 2) {
            return fail(
                "graph.sizes",
                format!("n = {n}: a network needs at least two nodes"),
            );
        }
        if let Some(p) = self.graph.p {
            if !(p > 0.0 && p <= 1.0) {
                return fail("graph.p", format!("{p} not in (0, 1]"));
            }
        }
        self.protocol.n_estimate.validate()?;
        for &n in &sizes {
            self.family(n)?;
            self.protocol
                .params(n)
                .map_err(|e| Error::Config(format!("protocol at n = {n}: {e}")))?;
            if let Some((c, k)) = self.protocol.forced() {
                if c > n || k > n {
                    return fail(
                        "protocol.forced_*",
                        format!("{c} candidates / {k} referees exceed n = {n}"),
                    );
                }
            }
        }
        if self.event_budget == Some(0) {
            return fail("event_budget", "must be positive".into());
        }
        Ok(())
    }
}
