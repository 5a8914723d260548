//! Random two-level hierarchical networks and an independent flattening.

use qagg_core::concat::{HierEdge, HierarchicalNetwork, Lower};
use qagg_core::netgraph::{Edge, NetworkGraph, NodeId};
use qagg_core::rational::Prob;
use qagg_core::yields::Yield;
use rand::Rng;

use crate::{brute_flow_costs, brute_min_cut, eval_yield, random_graph, GraphSpec};

pub fn random_yield<R: Rng>(r: &mut R) -> Yield {
    match r.gen_range(0..3) {
        0 => Yield::Identity,
        1 => {
            let d = r.gen_range(1..=4);
            Yield::linear(r.gen_range(1..=d), d)
        }
        _ => {
            let mut mu = 0;
            let mut psi = 0;
            let points = (0..r.gen_range(1..=3))
                .map(|_| {
                    mu += r.gen_range(1..=3);
                    psi += r.gen_range(0..=2);
                    (mu, psi)
                })
                .collect();
            Yield::Table { points }
        }
    }
}

/// A random flat network whose clients are relabelled to `a` and `b`.
pub fn random_lower<R: Rng>(r: &mut R, a: &NodeId, b: &NodeId, spec: GraphSpec) -> HierarchicalNetwork {
    let g = random_graph(r, spec);
    let rename = |v: &NodeId| {
        if v == g.source_id() {
            a.clone()
        } else if v == g.sink_id() {
            b.clone()
        } else {
            NodeId::from(format!("{a}{b}.{v}").as_str())
        }
    };
    HierarchicalNetwork {
        nodes: g.nodes().iter().map(rename).collect(),
        edges: g
            .edges()
            .iter()
            .map(|e| {
                HierEdge::base(
                    Edge::new(rename(&e.a), rename(&e.b), e.capacity)
                        .milli_cost(e.unit_cost)
                        .delta(e.gen_error.clone()),
                )
            })
            .collect(),
        source: rename(g.source_id()),
        sink: rename(g.sink_id()),
    }
}

const LOWER: GraphSpec = GraphSpec { max_nodes: 4, max_edges: 5, max_capacity: 3, max_cost: 3 };

/// Top graph with up to 6 nodes; about three edges in four are backed by a
/// random lower network with a random yield, and half of those carry an
/// explicit £.
pub fn random_two_level<R: Rng>(r: &mut R) -> HierarchicalNetwork {
    let top = random_graph(r, GraphSpec { max_nodes: 6, max_edges: 8, max_capacity: 3, max_cost: 4 });
    let edges = top
        .edges()
        .iter()
        .map(|e| {
            if r.gen_bool(0.25) {
                return HierEdge::base(e.clone());
            }
            let lower = random_lower(r, &e.a, &e.b, LOWER);
            let mut h = HierEdge::over(e.a.clone(), e.b.clone(), lower, random_yield(r), r.gen_range(1..=8))
                .delta_target(Prob::new(r.gen_range(0..=5), 1000));
            if r.gen_bool(0.5) {
                h = h.unit_cost(1000 * r.gen_range(0..=4));
            }
            h
        })
        .collect();
    HierarchicalNetwork {
        nodes: top.nodes().to_vec(),
        edges,
        source: top.source_id().clone(),
        sink: top.sink_id().clone(),
    }
}

fn base_graph(net: &HierarchicalNetwork) -> NetworkGraph {
    let edges = net
        .edges
        .iter()
        .map(|h| match &h.lower {
            Lower::Base(e) => e.clone(),
            Lower::Network(_) => panic!("two-level fixtures only"),
        })
        .collect();
    NetworkGraph::new(net.nodes.clone(), edges, net.source.clone(), net.sink.clone()).expect("valid lower network")
}

/// The flat (θ, £, δ target) graph of a two-level network, built from the
/// yield oracle and exhaustive flows on each lower network. A lower
/// network delivers its own min-cut per use.
pub fn flat_reference(net: &HierarchicalNetwork) -> NetworkGraph {
    let edges = net
        .edges
        .iter()
        .map(|h| {
            let theta = eval_yield(&h.yield_fn, h.max_uses);
            let cost = match (&h.lower, h.unit_cost) {
                (_, Some(c)) => c,
                (Lower::Network(inner), None) => {
                    let g = base_graph(inner);
                    let per_use = brute_flow_costs(&g)[brute_min_cut(&g) as usize].expect("min-cut is feasible");
                    if theta == 0 {
                        0
                    } else {
                        (h.max_uses * per_use).div_ceil(theta)
                    }
                }
                (Lower::Base(e), None) => e.unit_cost,
            };
            Edge::new(h.a.clone(), h.b.clone(), theta).milli_cost(cost).delta(h.delta_target.clone())
        })
        .collect();
    NetworkGraph::new(net.nodes.clone(), edges, net.source.clone(), net.sink.clone()).expect("valid flat graph")
}

/// A chain from `a` to `b` with `nodes` nodes, capacity 3 and cost 1 per hop.
pub fn chain_lower(a: &NodeId, b: &NodeId, nodes: usize) -> HierarchicalNetwork {
    let inner = (0..nodes.saturating_sub(2)).map(|i| NodeId::from(format!("{a}{b}#{i}").as_str()));
    let all: Vec<NodeId> = std::iter::once(a.clone()).chain(inner).chain(std::iter::once(b.clone())).collect();
    let edges = all.windows(2).map(|w| HierEdge::base(Edge::new(w[0].clone(), w[1].clone(), 3).cost(1))).collect();
    HierarchicalNetwork { nodes: all, edges, source: a.clone(), sink: b.clone() }
}

/// Replaces every lower network with a chain ten times its size. θ, £ (when
/// explicit) and the δ targets are untouched.
pub fn enlarge_lowers(net: &HierarchicalNetwork) -> HierarchicalNetwork {
    let mut bigger = net.clone();
    for h in &mut bigger.edges {
        if let Lower::Network(inner) = &h.lower {
            let size = 10 * inner.nodes.len();
            h.lower = Lower::Network(Box::new(chain_lower(&h.a, &h.b, size)));
        }
    }
    bigger
}
