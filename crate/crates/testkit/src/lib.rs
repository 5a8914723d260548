//! Random instances and brute-force oracles shared by the test suites.
//!
//! Nothing here calls the algorithms under test; the oracles only read the
//! validated graph data.

pub mod dense;
pub mod hier;

use std::collections::BTreeMap;

use qagg_core::netgraph::{Edge, NetworkGraph, NodeId};
use qagg_core::rational::Prob;
use qagg_core::yields::Yield;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug)]
pub struct GraphSpec {
    pub max_nodes: usize,
    pub max_edges: usize,
    pub max_capacity: u64,
    pub max_cost: u64,
}

/// Random simple graph with 2..=max_nodes nodes and at least `n − 1`
/// edges (when allowed). Labels are shuffled so that label order and
/// insertion order disagree; the source and sink are random distinct
/// nodes. About one capacity in ten is zero.
pub fn random_graph<R: Rng>(rng: &mut R, spec: GraphSpec) -> NetworkGraph {
    let n = rng.gen_range(2..=spec.max_nodes);
    let mut labels: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    labels.shuffle(rng);
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    pairs.shuffle(rng);
    let hi = spec.max_edges.min(pairs.len());
    let m = rng.gen_range((n - 1).min(hi)..=hi);
    let edges = pairs[..m]
        .iter()
        .map(|&(i, j)| {
            let (a, b) = if rng.gen() { (i, j) } else { (j, i) };
            let capacity = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..=spec.max_capacity) };
            Edge::new(labels[a].as_str(), labels[b].as_str(), capacity)
                .milli_cost(1000 * rng.gen_range(0..=spec.max_cost))
                .delta(Prob::new(rng.gen_range(0..=3), 100))
        })
        .collect();
    let s = rng.gen_range(0..n);
    let t = (s + rng.gen_range(1..n)) % n;
    let nodes = labels.iter().map(|l| NodeId::from(l.as_str())).collect();
    NetworkGraph::new(nodes, edges, labels[s].as_str().into(), labels[t].as_str().into()).expect("valid random graph")
}

fn endpoints(g: &NetworkGraph) -> Vec<(usize, usize)> {
    g.edges().iter().map(|e| (g.node_index(&e.a).expect("endpoint"), g.node_index(&e.b).expect("endpoint"))).collect()
}

/// Minimum over every node set containing s but not t of the capacity
/// crossing it.
pub fn brute_min_cut(g: &NetworkGraph) -> u64 {
    let weights: Vec<f64> = g.edges().iter().map(|e| e.capacity as f64).collect();
    brute_cut(g, &weights) as u64
}

/// Real-weighted version of [`brute_min_cut`].
pub fn brute_cut(g: &NetworkGraph, weights: &[f64]) -> f64 {
    let ends = endpoints(g);
    let (s, t) = (g.source(), g.sink());
    let free: Vec<usize> = (0..g.node_count()).filter(|&v| v != s && v != t).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << free.len()) {
        let mut inside = vec![false; g.node_count()];
        inside[s] = true;
        for (i, &v) in free.iter().enumerate() {
            inside[v] = mask >> i & 1 == 1;
        }
        let cut: f64 = ends.iter().zip(weights).filter(|(&(a, b), _)| inside[a] != inside[b]).map(|(_, w)| w).sum();
        best = best.min(cut);
    }
    best
}

/// Minimum total cost (milli-units) of an integral flow with each net s→t
/// value, by exhaustive search over all feasible flows. Entry `F` is `None`
/// when no flow of value `F` exists.
///
/// Only the net flow `d_e ∈ [−c_e, c_e]` on each edge is enumerated: any
/// flow with `f_xy − f_yx = d_e` costs at least `$_e |d_e|`, and that is
/// attained with one direction unused.
pub fn brute_flow_costs(g: &NetworkGraph) -> Vec<Option<u64>> {
    let ends = endpoints(g);
    let n = g.node_count();
    let (s, t) = (g.source(), g.sink());
    let total_cap: u64 = g.edges().iter().map(|e| e.capacity).sum();
    // remaining[k][v]: capacity at v among edges k.. still unassigned
    let mut remaining = vec![vec![0i64; n]; ends.len() + 1];
    for k in (0..ends.len()).rev() {
        remaining[k] = remaining[k + 1].clone();
        let c = g.edges()[k].capacity as i64;
        remaining[k][ends[k].0] += c;
        remaining[k][ends[k].1] += c;
    }
    let mut best = vec![None; total_cap as usize + 1];
    let mut balance = vec![0i64; n];

    struct Search<'a> {
        g: &'a NetworkGraph,
        ends: &'a [(usize, usize)],
        remaining: &'a [Vec<i64>],
        s: usize,
        t: usize,
        best: &'a mut Vec<Option<u64>>,
    }

    fn go(x: &mut Search, k: usize, balance: &mut Vec<i64>, cost: u64) {
        for (v, b) in balance.iter().enumerate() {
            if v != x.s && v != x.t && b.abs() > x.remaining[k][v] {
                return;
            }
        }
        if k == x.ends.len() {
            // balance[v] is outflow minus inflow
            if balance[x.s] >= 0 {
                let f = balance[x.s] as usize;
                if x.best[f].is_none_or(|b| cost < b) {
                    x.best[f] = Some(cost);
                }
            }
            return;
        }
        let e = &x.g.edges()[k];
        let (a, b) = x.ends[k];
        let c = e.capacity as i64;
        for d in -c..=c {
            balance[a] += d;
            balance[b] -= d;
            go(x, k + 1, balance, cost + d.unsigned_abs() * e.unit_cost);
            balance[a] -= d;
            balance[b] += d;
        }
    }

    let mut search = Search { g, ends: &ends, remaining: &remaining, s, t, best: &mut best };
    go(&mut search, 0, &mut balance, 0);
    best
}

/// Independent evaluation of a yield function.
pub fn eval_yield(y: &Yield, m: u64) -> u64 {
    match y {
        Yield::Identity => m,
        Yield::Linear { rate } => {
            let v = &rate.0 * num_rational::BigRational::from_integer(m.into());
            let floor = v.floor().to_integer();
            u64::try_from(floor).expect("non-negative yield")
        }
        Yield::Table { points } => {
            let mut best = 0;
            for &(mu, psi) in points {
                if mu <= m {
                    best = psi;
                }
            }
            best
        }
    }
}

/// Smallest `m` in `0..=max` with `f(m) >= needed`, by linear scan.
pub fn scan_min_uses(y: &Yield, needed: u64, max: u64) -> Option<u64> {
    (0..=max).find(|&m| eval_yield(y, m) >= needed)
}

/// Sums bundle multiplicities per unordered edge.
pub fn bundle_edge_sums(bundles: &[qagg_core::pathplan::PathBundle]) -> BTreeMap<(NodeId, NodeId), u64> {
    let mut out = BTreeMap::new();
    for b in bundles {
        for w in b.path.windows(2) {
            let key = if w[0] <= w[1] { (w[0].clone(), w[1].clone()) } else { (w[1].clone(), w[0].clone()) };
            *out.entry(key).or_insert(0) += b.multiplicity;
        }
    }
    out
}
