//! Network graph model, induced digraph, and s–t min-cut.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc::{EdgeDoc, NetworkDoc};
use crate::maxflow::undirected_max_flow;
use crate::rational::{to_milli, Prob};
use crate::yields::Yield;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("node label must be non-empty")]
    EmptyLabel,
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("edge endpoint {0} is not a node")]
    UnknownEndpoint(NodeId),
    #[error("self-loop on {0}")]
    SelfLoop(NodeId),
    #[error("parallel edges {0}-{1} disagree on {2}")]
    ParallelMismatch(NodeId, NodeId, &'static str),
    #[error("source and sink are both {0}")]
    SourceIsSink(NodeId),
    #[error("edge {0}-{1}: {2}")]
    BadEdge(NodeId, NodeId, String),
}

impl GraphError {
    pub fn is_parse(&self) -> bool {
        matches!(self, GraphError::Parse(_))
    }
}

/// Opaque, non-empty node label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(label: impl Into<String>) -> Result<Self, GraphError> {
        let label = label.into();
        if label.is_empty() {
            return Err(GraphError::EmptyLabel);
        }
        Ok(NodeId(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    /// Panics on an empty label; use [`NodeId::new`] for untrusted input.
    fn from(s: &str) -> Self {
        NodeId::new(s).expect("non-empty node label")
    }
}

/// Undirected physical edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    /// c_e, in ebits.
    pub capacity: u64,
    /// $_e, in milli-cost units per ebit.
    pub unit_cost: u64,
    /// δ_e, trace-distance error of the generated pairs.
    pub gen_error: Prob,
    /// m_e^max; `None` is unbounded.
    pub max_uses: Option<u64>,
    /// Generation yield f_e(m); identity when absent.
    pub yield_fn: Option<Yield>,
}

impl Edge {
    pub fn new(a: impl Into<NodeId>, b: impl Into<NodeId>, capacity: u64) -> Self {
        Edge {
            a: a.into(),
            b: b.into(),
            capacity,
            unit_cost: 0,
            gen_error: Prob::zero(),
            max_uses: None,
            yield_fn: None,
        }
    }

    /// Cost in whole units (scaled to milli-units).
    pub fn cost(mut self, units: u64) -> Self {
        self.unit_cost = units * 1000;
        self
    }

    pub fn milli_cost(mut self, milli: u64) -> Self {
        self.unit_cost = milli;
        self
    }

    pub fn delta(mut self, delta: Prob) -> Self {
        self.gen_error = delta;
        self
    }

    pub fn max_uses(mut self, m: u64) -> Self {
        self.max_uses = Some(m);
        self
    }

    pub fn yield_fn(mut self, y: Yield) -> Self {
        self.yield_fn = Some(y);
        self
    }

    pub fn generator(&self) -> Yield {
        self.yield_fn.clone().unwrap_or(Yield::Identity)
    }
}

/// Largest accepted unit cost in milli-units, so that path costs and
/// potentials stay well inside `i64`.
pub const MAX_UNIT_COST: u64 = 1_000_000_000_000_000;

/// Undirected graph with designated clients `s` and `t`. Immutable once
/// built.
#[derive(Clone, Debug)]
pub struct NetworkGraph {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    /// Rank of each node in label order, for deterministic tie-breaking.
    rank: Vec<u32>,
    edges: Vec<Edge>,
    ends: Vec<(usize, usize)>,
    source: usize,
    sink: usize,
}

impl NetworkGraph {
    /// Validates and builds a graph. Parallel edges with equal cost are
    /// merged by summing capacities, errors and use limits.
    pub fn new(nodes: Vec<NodeId>, edges: Vec<Edge>, source: NodeId, sink: NodeId) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if n.0.is_empty() {
                return Err(GraphError::EmptyLabel);
            }
            if index.insert(n.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(n.clone()));
            }
        }
        let lookup = |id: &NodeId| index.get(id).copied().ok_or_else(|| GraphError::UnknownEndpoint(id.clone()));
        let s = lookup(&source)?;
        let t = lookup(&sink)?;
        if s == t {
            return Err(GraphError::SourceIsSink(source));
        }

        let mut merged: Vec<Edge> = Vec::with_capacity(edges.len());
        let mut ends: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        let mut by_pair: HashMap<(usize, usize), usize> = HashMap::new();
        for mut e in edges {
            let (i, j) = (lookup(&e.a)?, lookup(&e.b)?);
            if i == j {
                return Err(GraphError::SelfLoop(e.a));
            }
            if !e.gen_error.is_probability() {
                return Err(GraphError::BadEdge(e.a, e.b, "delta must lie in [0, 1]".into()));
            }
            if let Some(y) = &e.yield_fn {
                y.validate().map_err(|err| GraphError::BadEdge(e.a.clone(), e.b.clone(), err.to_string()))?;
            }
            if e.unit_cost > MAX_UNIT_COST {
                return Err(GraphError::BadEdge(e.a, e.b, format!("cost exceeds {} milli-units", MAX_UNIT_COST)));
            }
            if e.max_uses == Some(0) {
                return Err(GraphError::BadEdge(e.a, e.b, "max_uses must be positive".into()));
            }
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            if i > j {
                std::mem::swap(&mut e.a, &mut e.b);
            }
            match by_pair.get(&(lo, hi)) {
                Some(&k) => {
                    let prev = &mut merged[k];
                    if prev.unit_cost != e.unit_cost {
                        return Err(GraphError::ParallelMismatch(e.a, e.b, "cost"));
                    }
                    if prev.yield_fn.is_some() || e.yield_fn.is_some() {
                        return Err(GraphError::ParallelMismatch(e.a, e.b, "yield"));
                    }
                    prev.capacity += e.capacity;
                    prev.gen_error = &prev.gen_error + &e.gen_error;
                    if !prev.gen_error.is_probability() {
                        prev.gen_error = Prob::one();
                    }
                    prev.max_uses = match (prev.max_uses, e.max_uses) {
                        (Some(x), Some(y)) => Some(x + y),
                        _ => None,
                    };
                }
                None => {
                    by_pair.insert((lo, hi), merged.len());
                    merged.push(e);
                    ends.push((lo, hi));
                }
            }
        }

        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by(|&x, &y| nodes[x].cmp(&nodes[y]));
        let mut rank = vec![0u32; nodes.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r as u32;
        }

        Ok(NetworkGraph { nodes, index, rank, edges: merged, ends, source: s, sink: t })
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let doc = NetworkDoc::from_json(text).map_err(|e| GraphError::Parse(e.to_string()))?;
        build_graph(&doc)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn source_id(&self) -> &NodeId {
        &self.nodes[self.source]
    }

    pub fn sink_id(&self) -> &NodeId {
        &self.nodes[self.sink]
    }

    pub fn node_index(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn label(&self, node: usize) -> &NodeId {
        &self.nodes[node]
    }

    /// Position of a node in sorted label order.
    pub fn rank(&self, node: usize) -> u32 {
        self.rank[node]
    }

    /// Node indices `(lo, hi)` of edge `e`, with `lo < hi`.
    pub fn ends(&self, e: usize) -> (usize, usize) {
        self.ends[e]
    }

    pub fn edge_between(&self, x: usize, y: usize) -> Option<usize> {
        let key = if x < y { (x, y) } else { (y, x) };
        self.ends.iter().position(|&p| p == key)
    }

    /// Same topology with new per-edge capacities.
    pub fn with_capacities(&self, caps: &[u64]) -> NetworkGraph {
        assert_eq!(caps.len(), self.edges.len());
        let mut g = self.clone();
        for (e, &c) in g.edges.iter_mut().zip(caps) {
            e.capacity = c;
        }
        g
    }

    /// Same graph with every δ_e set to `delta`.
    pub fn with_deltas(&self, delta: &Prob) -> NetworkGraph {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.gen_error = delta.clone();
        }
        g
    }
}

/// Builds a graph from a document; omitted `delta` is zero.
pub fn build_graph(doc: &NetworkDoc) -> Result<NetworkGraph, GraphError> {
    build_graph_with_default_delta(doc, &Prob::zero())
}

pub fn build_graph_with_default_delta(doc: &NetworkDoc, default_delta: &Prob) -> Result<NetworkGraph, GraphError> {
    let nodes = doc.nodes.iter().map(|n| NodeId::new(n.clone())).collect::<Result<Vec<_>, _>>()?;
    let edges = doc.edges.iter().map(|e| edge_from_doc(e, default_delta)).collect::<Result<Vec<_>, _>>()?;
    NetworkGraph::new(nodes, edges, NodeId::new(doc.source.clone())?, NodeId::new(doc.sink.clone())?)
}

fn edge_from_doc(e: &EdgeDoc, default_delta: &Prob) -> Result<Edge, GraphError> {
    let a = NodeId::new(e.a.clone())?;
    let b = NodeId::new(e.b.clone())?;
    let bad = |msg: &str| GraphError::BadEdge(a.clone(), b.clone(), msg.to_string());
    if e.lower.is_some() {
        return Err(bad("edge has a lower network; load it as a hierarchical network"));
    }
    let capacity = e.capacity.ok_or_else(|| bad("missing capacity"))?;
    let cost = e.cost.as_ref().ok_or_else(|| bad("missing cost"))?;
    let unit_cost = to_milli(&cost.0).ok_or_else(|| bad("cost must be exact at 0.001 precision"))?;
    Ok(Edge {
        a: a.clone(),
        b: b.clone(),
        capacity,
        unit_cost,
        gen_error: e.delta.clone().unwrap_or_else(|| default_delta.clone()),
        max_uses: e.max_uses,
        yield_fn: e.yield_fn.clone(),
    })
}

/// Directed arc of the induced digraph. Arc `2k` runs `lo → hi` of edge
/// `k`, arc `2k + 1` runs `hi → lo`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arc {
    pub tail: usize,
    pub head: usize,
    pub edge: usize,
}

#[derive(Clone, Debug)]
pub struct DiGraph {
    pub nodes: Vec<NodeId>,
    pub arcs: Vec<Arc>,
}

impl DiGraph {
    /// Forgets orientation: the set of unordered node pairs.
    pub fn undirected_pairs(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.arcs
            .iter()
            .map(|a| {
                let (x, y) = (self.nodes[a.tail].clone(), self.nodes[a.head].clone());
                if x <= y {
                    (x, y)
                } else {
                    (y, x)
                }
            })
            .collect()
    }
}

pub fn induce_digraph(g: &NetworkGraph) -> DiGraph {
    let arcs = (0..g.edge_count())
        .flat_map(|k| {
            let (lo, hi) = g.ends(k);
            [Arc { tail: lo, head: hi, edge: k }, Arc { tail: hi, head: lo, edge: k }]
        })
        .collect();
    DiGraph { nodes: g.nodes.clone(), arcs }
}

/// C_st. Zero when s and t are disconnected.
pub fn min_cut(g: &NetworkGraph) -> u64 {
    min_cut_partition(g).0
}

/// C_st together with the source side of one minimum cut.
pub fn min_cut_partition(g: &NetworkGraph) -> (u64, Vec<NodeId>) {
    let edges: Vec<(usize, usize, u64)> = (0..g.edge_count())
        .map(|k| {
            let (lo, hi) = g.ends(k);
            (lo, hi, g.edges[k].capacity)
        })
        .collect();
    let mf = undirected_max_flow(g.node_count(), &edges, g.source, g.sink);
    let side =
        mf.source_side.iter().enumerate().filter(|(_, &inside)| inside).map(|(i, _)| g.nodes[i].clone()).collect();
    (mf.value, side)
}

/// Whether t is reachable from s through edges with positive capacity.
pub fn connected(g: &NetworkGraph) -> bool {
    let mut seen = vec![false; g.node_count()];
    let mut stack = vec![g.source];
    seen[g.source] = true;
    while let Some(u) = stack.pop() {
        for (k, &(lo, hi)) in g.ends.iter().enumerate() {
            if g.edges[k].capacity.is_zero() {
                continue;
            }
            let v = if lo == u {
                hi
            } else if hi == u {
                lo
            } else {
                continue;
            };
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen[g.sink]
}
