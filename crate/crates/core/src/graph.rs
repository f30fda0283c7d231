//! Network topologies: generation, validation, and diameter.
//!
//! A [`Graph`] is undirected, simple, and connected. Besides the canonical
//! edge list it keeps a CSR adjacency in which every undirected edge appears
//! as two directed *arcs*. A node's incident arcs are numbered by local
//! *port*; the protocol only ever sees ports, never node indices.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub type NodeId = u32;
pub type ArcId = u32;
/// Local index of an incident edge at a node.
pub type Port = usize;

/// Topology families the harness knows how to build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GraphFamily {
    Ring {
        n: usize,
    },
    Torus2d {
        rows: usize,
        cols: usize,
    },
    Complete {
        n: usize,
    },
    /// Erdős–Rényi G(n, p), repaired to be connected.
    RandomP {
        n: usize,
        p: f64,
    },
    /// Uniform graph with exactly `m` edges before repair.
    RandomM {
        n: usize,
        m: usize,
    },
    FromEdgeList {
        n: usize,
        edges: Vec<(NodeId, NodeId)>,
    },
}

impl GraphFamily {
    pub fn node_count(&self) -> usize {
        match *self {
            GraphFamily::Ring { n }
            | GraphFamily::Complete { n }
            | GraphFamily::RandomP { n, .. }
            | GraphFamily::RandomM { n, .. }
            | GraphFamily::FromEdgeList { n, .. } => n,
            GraphFamily::Torus2d { rows, cols } => rows * cols,
        }
    }

    /// Family name without size parameters; summaries group by it.
    pub fn label(&self) -> &'static str {
        match self {
            GraphFamily::Ring { .. } => "ring",
            GraphFamily::Torus2d { .. } => "torus",
            GraphFamily::Complete { .. } => "complete",
            GraphFamily::RandomP { .. } => "random-p",
            GraphFamily::RandomM { .. } => "random-m",
            GraphFamily::FromEdgeList { .. } => "edge-list",
        }
    }

    /// Whether different seeds can produce different graphs.
    pub fn is_random(&self) -> bool {
        matches!(
            self,
            GraphFamily::RandomP { .. } | GraphFamily::RandomM { .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(NodeId, NodeId)>,
    offsets: Vec<u32>,
    targets: Vec<NodeId>,
    reverse: Vec<ArcId>,
    diameter: usize,
    augmented_edges: usize,
}

impl Graph {
    /// Builds a graph from an explicit edge list, rejecting self-loops,
    /// duplicates, out-of-range endpoints, and disconnected inputs.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!("need at least 2 nodes, got {n}")));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut canon = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) out of range for n={n}"
                )));
            }
            if u == v {
                return Err(Error::Validation(format!("self-loop at node {u}")));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(Error::Validation(format!(
                    "duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
            canon.push(e);
        }
        canon.sort_unstable();
        let g = Self::assemble(n, canon, 0);
        if !g.is_connected() {
            return Err(Error::Validation("graph is disconnected".into()));
        }
        Ok(g)
    }

    fn assemble(n: usize, edges: Vec<(NodeId, NodeId)>, augmented_edges: usize) -> Self {
        let mut degree = vec![0u32; n];
        for &(u, v) in &edges {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = vec![0u32; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let arcs = offsets[n] as usize;
        let mut targets = vec![0; arcs];
        let mut reverse = vec![0; arcs];
        let mut fill: Vec<u32> = offsets[..n].to_vec();
        // Edges are sorted, so every adjacency list ends up sorted too.
        for &(u, v) in &edges {
            let a = fill[u as usize];
            let b = fill[v as usize];
            targets[a as usize] = v;
            targets[b as usize] = u;
            reverse[a as usize] = b;
            reverse[b as usize] = a;
            fill[u as usize] += 1;
            fill[v as usize] += 1;
        }
        let mut g = Graph {
            n,
            edges,
            offsets,
            targets,
            reverse,
            diameter: 0,
            augmented_edges,
        };
        if g.is_connected() {
            g.diameter = diameter(&g);
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn arc_count(&self) -> usize {
        self.targets.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// Cached all-sources BFS diameter.
    pub fn diameter(&self) -> usize {
        self.diameter
    }

    /// Number of edges added to make a random instance connected.
    pub fn augmented_edges(&self) -> usize {
        self.augmented_edges
    }

    pub fn degree(&self, v: NodeId) -> usize {
        (self.offsets[v as usize + 1] - self.offsets[v as usize]) as usize
    }

    /// Neighbors of `v` in port order.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[v as usize] as usize..self.offsets[v as usize + 1] as usize]
    }

    pub fn arc(&self, v: NodeId, port: Port) -> ArcId {
        self.offsets[v as usize] + port as u32
    }

    pub fn first_arc(&self, v: NodeId) -> ArcId {
        self.offsets[v as usize]
    }

    pub fn arc_head(&self, arc: ArcId) -> NodeId {
        self.targets[arc as usize]
    }

    pub fn arc_tail(&self, arc: ArcId) -> NodeId {
        self.targets[self.reverse[arc as usize] as usize]
    }

    pub fn reverse_arc(&self, arc: ArcId) -> ArcId {
        self.reverse[arc as usize]
    }

    /// Port at the head node through which `arc` arrives.
    pub fn arrival_port(&self, arc: ArcId) -> Port {
        let back = self.reverse[arc as usize];
        let head = self.targets[arc as usize];
        (back - self.offsets[head as usize]) as usize
    }

    /// Arc from `u` to its neighbor `v`, if adjacent.
    pub fn find_arc(&self, u: NodeId, v: NodeId) -> Option<ArcId> {
        let base = self.offsets[u as usize];
        self.neighbors(u)
            .binary_search(&v)
            .ok()
            .map(|p| base + p as u32)
    }

    /// Hop distances from `src`; `usize::MAX` marks unreachable nodes.
    pub fn bfs(&self, src: NodeId) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        let mut queue = VecDeque::new();
        dist[src as usize] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let d = dist[u as usize];
            for &w in self.neighbors(u) {
                if dist[w as usize] == usize::MAX {
                    dist[w as usize] = d + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.bfs(0).iter().all(|&d| d != usize::MAX)
    }

    /// Edge-list text: `n m` then one `u v` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.edges.len() * 8 + 16);
        let _ = writeln!(out, "{} {}", self.n, self.edges.len());
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "empty edge list".into(),
        })?;
        let (n, m) = parse_pair(hl + 1, header)?;
        let mut edges = Vec::with_capacity(m as usize);
        for (i, line) in lines {
            edges.push(parse_pair(i + 1, line)?);
        }
        if edges.len() != m as usize {
            return Err(Error::Parse {
                line: hl + 1,
                reason: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        Graph::from_edges(n as usize, &edges)
    }
}

fn parse_pair(line: usize, text: &str) -> Result<(u32, u32)> {
    let mut it = text.split_whitespace();
    let mut next = || -> Result<u32> {
        it.next()
            .ok_or_else(|| Error::Parse {
                line,
                reason: "expected two integers".into(),
            })?
            .parse()
            .map_err(|e| Error::Parse {
                line,
                reason: format!("{e}"),
            })
    };
    let a = next()?;
    let b = next()?;
    if it.next().is_some() {
        return Err(Error::Parse {
            line,
            reason: "trailing tokens".into(),
        });
    }
    Ok((a, b))
}

/// Exact diameter by BFS from every node.
pub fn diameter(g: &Graph) -> usize {
    (0..g.node_count() as NodeId)
        .map(|s| g.bfs(s).into_iter().max().unwrap_or(0))
        .max()
        .unwrap_or(0)
}

/// Builds an instance of `family`. Identical `(family, seed)` pairs give
/// identical graphs.
pub fn generate(family: &GraphFamily, seed: u64) -> Result<Graph> {
    let n = family.node_count();
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 nodes, got {n}")));
    }
    match family {
        GraphFamily::Ring { n } => {
            let n = *n;
            if n < 3 {
                return Err(Error::Parameter("ring needs n >= 3".into()));
            }
            let edges: Vec<_> = (0..n as u32).map(|i| (i, (i + 1) % n as u32)).collect();
            Graph::from_edges(n, &edges)
        }
        GraphFamily::Torus2d { rows, cols } => {
            let (rows, cols) = (*rows as u32, *cols as u32);
            if rows < 3 || cols < 3 {
                return Err(Error::Parameter("torus sides must be >= 3".into()));
            }
            let id = |r: u32, c: u32| r * cols + c;
            let mut edges = Vec::with_capacity(2 * n);
            for r in 0..rows {
                for c in 0..cols {
                    edges.push((id(r, c), id(r, (c + 1) % cols)));
                    edges.push((id(r, c), id((r + 1) % rows, c)));
                }
            }
            Graph::from_edges(n, &edges)
        }
        GraphFamily::Complete { n } => {
            let n = *n as u32;
            let edges: Vec<_> = (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .collect();
            Graph::from_edges(n as usize, &edges)
        }
        GraphFamily::RandomP { n, p } => {
            if !(*p > 0.0 && *p <= 1.0) {
                return Err(Error::Parameter(format!(
                    "edge probability {p} not in (0, 1]"
                )));
            }
            let mut rng = seed::rng(seed, seed::STREAM_GRAPH);
            let n = *n as u32;
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen::<f64>() < *p {
                        edges.push((u, v));
                    }
                }
            }
            Ok(repair(n as usize, edges, &mut rng))
        }
        GraphFamily::RandomM { n, m } => {
            let total = n * (n - 1) / 2;
            if *m > total {
                return Err(Error::Parameter(format!(
                    "{m} edges exceed the {total} possible"
                )));
            }
            let mut rng = seed::rng(seed, seed::STREAM_GRAPH);
            let mut chosen = HashSet::with_capacity(*m);
            let mut edges = Vec::with_capacity(*m);
            while edges.len() < *m {
                let u = rng.gen_range(0..*n as u32);
                let v = rng.gen_range(0..*n as u32);
                if u != v && chosen.insert((u.min(v), u.max(v))) {
                    edges.push((u.min(v), u.max(v)));
                }
            }
            Ok(repair(*n, edges, &mut rng))
        }
        GraphFamily::FromEdgeList { n, edges } => Graph::from_edges(*n, edges),
    }
}

/// Joins components by adding uniformly random inter-component edges.
fn repair(n: usize, mut edges: Vec<(NodeId, NodeId)>, rng: &mut impl Rng) -> Graph {
    let mut uf = UnionFind::new(n);
    for &(u, v) in &edges {
        uf.union(u as usize, v as usize);
    }
    let mut added = 0;
    while uf.components > 1 {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if uf.find(u) != uf.find(v) {
            uf.union(u, v);
            edges.push((u.min(v) as u32, u.max(v) as u32));
            added += 1;
        }
    }
    edges.sort_unstable();
    Graph::assemble(n, edges, added)
}

struct UnionFind {
    parent: Vec<usize>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
            self.components -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Floyd–Warshall, independent of the BFS path under test.
    fn apsp_diameter(g: &Graph) -> usize {
        let n = g.node_count();
        let inf = usize::MAX / 4;
        let mut d = vec![vec![inf; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for &(u, v) in g.edges() {
            d[u as usize][v as usize] = 1;
            d[v as usize][u as usize] = 1;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d.iter().flatten().copied().max().unwrap()
    }

    #[test]
    fn ring_and_complete_sizes() {
        let ring = generate(&GraphFamily::Ring { n: 6 }, 0).unwrap();
        assert_eq!((ring.node_count(), ring.edge_count()), (6, 6));
        assert_eq!(ring.diameter(), 3);
        let k4 = generate(&GraphFamily::Complete { n: 4 }, 0).unwrap();
        assert_eq!((k4.node_count(), k4.edge_count()), (4, 6));
        assert_eq!(k4.diameter(), 1);
    }

    #[test]
    fn torus_diameter_matches_floyd_warshall() {
        let t = generate(&GraphFamily::Torus2d { rows: 8, cols: 8 }, 0).unwrap();
        assert_eq!(t.edge_count(), 128);
        assert_eq!(apsp_diameter(&t), 8);
        assert_eq!(t.diameter(), 8);
    }

    #[test]
    fn random_graph_is_connected_and_reproducible() {
        let fam = GraphFamily::RandomP { n: 64, p: 0.1 };
        let g = generate(&fam, 7).unwrap();
        let dist = g.bfs(0);
        assert!(dist.iter().all(|&d| d != usize::MAX));
        assert_eq!(g.diameter(), apsp_diameter(&g));
        assert_eq!(g, generate(&fam, 7).unwrap());
        assert!(g.edge_count() > 63);
    }

    #[test]
    fn sparse_random_graph_records_repairs() {
        let g = generate(&GraphFamily::RandomP { n: 50, p: 0.01 }, 3).unwrap();
        assert!(g.is_connected());
        assert!(g.augmented_edges() > 0);
        let h = generate(&GraphFamily::RandomM { n: 40, m: 10 }, 3).unwrap();
        assert!(h.is_connected());
        assert_eq!(h.edge_count(), 10 + h.augmented_edges());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            generate(&GraphFamily::RandomP { n: 10, p: 0.0 }, 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            generate(&GraphFamily::Complete { n: 1 }, 0),
            Err(Error::Parameter(_))
        ));
        let disconnected = GraphFamily::FromEdgeList {
            n: 4,
            edges: vec![(0, 1), (2, 3)],
        };
        assert!(matches!(
            generate(&disconnected, 0),
            Err(Error::Validation(_))
        ));
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0), (1, 2)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 0), (1, 2)]).is_err());
    }

    #[test]
    fn arcs_are_symmetric() {
        let g = generate(&GraphFamily::RandomP { n: 30, p: 0.2 }, 11).unwrap();
        for a in 0..g.arc_count() as ArcId {
            let back = g.reverse_arc(a);
            assert_eq!(g.reverse_arc(back), a);
            assert_eq!(g.arc_head(back), g.arc_tail(a));
            let head = g.arc_head(a);
            assert_eq!(g.arc(head, g.arrival_port(a)), back);
        }
    }

    #[test]
    fn edge_list_text_round_trips() {
        let g = generate(&GraphFamily::Torus2d { rows: 3, cols: 4 }, 0).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("12 24\n"));
        assert_eq!(Graph::parse_edge_list(&text).unwrap(), g);
        assert!(matches!(
            Graph::parse_edge_list("3 2\n0 1\n"),
            Err(Error::Parse { .. })
        ));
    }
}
