//! Asymptotic ebit rates from per-edge channel capacities.
//!
//! Edge `e` carries weight `r_e · Q(N_e)`; the achievable rate is the s–t
//! min-cut of those weights.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc::NetworkDoc;
use crate::maxflow::undirected_max_flow;
use crate::netgraph::{Edge, GraphError, NetworkGraph, NodeId};

/// Relative tolerance for comparing real-valued cuts.
pub const RATE_TOL: f64 = 1e-9;

/// Largest node count for which the max-flow result is re-derived by
/// enumerating every cut.
pub const ENUMERATION_LIMIT: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelModel {
    Explicit {
        #[serde(rename = "Q", alias = "q")]
        q: f64,
        rate: f64,
    },
    #[serde(alias = "pure-loss")]
    PureLoss { eta: f64, rate: f64 },
}

impl ChannelModel {
    pub fn explicit(q: f64, rate: f64) -> Self {
        ChannelModel::Explicit { q, rate }
    }

    pub fn pure_loss(eta: f64, rate: f64) -> Self {
        ChannelModel::PureLoss { eta, rate }
    }

    pub fn rate(&self) -> f64 {
        match *self {
            ChannelModel::Explicit { rate, .. } | ChannelModel::PureLoss { rate, .. } => rate,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let rate = self.rate();
        if !(rate.is_finite() && rate > 0.0) {
            return Err(format!("use rate must be positive, got {rate}"));
        }
        match *self {
            ChannelModel::Explicit { q, .. } if !(q.is_finite() && q >= 0.0) => {
                Err(format!("capacity Q must be non-negative, got {q}"))
            }
            ChannelModel::PureLoss { eta, .. } if !(eta > 0.0 && eta < 1.0) => {
                Err(format!("transmissivity must lie in (0, 1), got {eta}"))
            }
            _ => Ok(()),
        }
    }

    /// `r_e · Q(N_e)`.
    pub fn weight(&self) -> f64 {
        self.rate() * channel_capacity(self)
    }
}

/// Two-way assisted quantum capacity, in ebits per use.
pub fn channel_capacity(m: &ChannelModel) -> f64 {
    match *m {
        ChannelModel::Explicit { q, .. } => q,
        ChannelModel::PureLoss { eta, .. } => -(1.0 - eta).log2(),
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum RateError {
    #[error("edge {0}-{1} has no channel model")]
    MissingModel(NodeId, NodeId),
    #[error("edge {0}-{1}: {2}")]
    InvalidModel(NodeId, NodeId, String),
    #[error("expected {expected} channel models, got {got}")]
    ModelCount { expected: usize, got: usize },
    #[error("max-flow rate {flow} disagrees with cut enumeration {enumerated}")]
    CrossCheck { flow: f64, enumerated: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Builds the graph and per-edge models from a document whose edges all
/// carry a `channel`. `capacity` and `cost` are optional here.
pub fn from_doc(doc: &NetworkDoc) -> Result<(NetworkGraph, Vec<ChannelModel>), RateError> {
    let nodes = doc.nodes.iter().map(|n| NodeId::new(n.clone())).collect::<Result<Vec<_>, _>>()?;
    let mut by_pair: BTreeMap<(NodeId, NodeId), ChannelModel> = BTreeMap::new();
    let mut edges = Vec::with_capacity(doc.edges.len());
    for e in &doc.edges {
        let (a, b) = (NodeId::new(e.a.clone())?, NodeId::new(e.b.clone())?);
        let model = e.channel.clone().ok_or_else(|| RateError::MissingModel(a.clone(), b.clone()))?;
        let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        if by_pair.insert(key, model).is_some() {
            return Err(GraphError::ParallelMismatch(a, b, "channel").into());
        }
        edges.push(Edge::new(a, b, e.capacity.unwrap_or(0)));
    }
    let g = NetworkGraph::new(nodes, edges, NodeId::new(doc.source.clone())?, NodeId::new(doc.sink.clone())?)?;
    let models = g
        .edges()
        .iter()
        .map(|e| {
            let key = if e.a <= e.b { (e.a.clone(), e.b.clone()) } else { (e.b.clone(), e.a.clone()) };
            by_pair.remove(&key).expect("every graph edge came from a document edge")
        })
        .collect();
    Ok((g, models))
}

fn weights(g: &NetworkGraph, models: &[ChannelModel]) -> Result<Vec<(usize, usize, f64)>, RateError> {
    if models.len() != g.edge_count() {
        return Err(RateError::ModelCount { expected: g.edge_count(), got: models.len() });
    }
    (0..g.edge_count())
        .map(|k| {
            let e = &g.edges()[k];
            models[k].validate().map_err(|m| RateError::InvalidModel(e.a.clone(), e.b.clone(), m))?;
            let (lo, hi) = g.ends(k);
            Ok((lo, hi, models[k].weight()))
        })
        .collect()
}

/// Minimum over all `S ∋ s, S ∌ t` of the weight crossing `S`.
pub fn enumerated_cut(n: usize, edges: &[(usize, usize, f64)], s: usize, t: usize) -> f64 {
    let free: Vec<usize> = (0..n).filter(|&v| v != s && v != t).collect();
    let mut best = f64::INFINITY;
    let mut side = vec![false; n];
    for mask in 0u64..(1u64 << free.len()) {
        side.iter_mut().for_each(|x| *x = false);
        side[s] = true;
        for (i, &v) in free.iter().enumerate() {
            side[v] = mask >> i & 1 == 1;
        }
        let cut: f64 = edges.iter().filter(|&&(u, v, _)| side[u] != side[v]).map(|&(_, _, w)| w).sum();
        best = best.min(cut);
    }
    best
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= RATE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// min over s–t cuts of `Σ r_e Q(N_e)`, one model per edge of `g`.
pub fn asymptotic_rate(g: &NetworkGraph, models: &[ChannelModel]) -> Result<f64, RateError> {
    let edges = weights(g, models)?;
    let flow = undirected_max_flow(g.node_count(), &edges, g.source(), g.sink()).value;
    if g.node_count() <= ENUMERATION_LIMIT {
        let enumerated = enumerated_cut(g.node_count(), &edges, g.source(), g.sink());
        if !close(flow, enumerated) {
            return Err(RateError::CrossCheck { flow, enumerated });
        }
    }
    Ok(flow)
}
