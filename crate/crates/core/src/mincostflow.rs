//! Integral minimum-cost flow on the induced digraph.
//!
//! Successive shortest augmenting paths with node potentials. Every
//! undirected edge `{x, y}` contributes arcs `x → y` and `y → x`, each with
//! the edge's capacity and cost; after solving, opposing flow on the same
//! edge is cancelled and any leftover (zero-cost) circulation removed, so
//! the result satisfies `f_xy + f_yx <= c_{xy}` with at most one direction
//! in use.
//!
//! Among equal-cost augmenting paths the one with the lexicographically
//! smallest node-label sequence is taken, which makes every output
//! reproducible.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use num_rational::Ratio;
use thiserror::Error;

use crate::netgraph::NetworkGraph;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FlowError {
    #[error("target {target} exceeds the min-cut capacity {capacity}")]
    InfeasibleTarget { target: u64, capacity: u64 },
    #[error("target must be non-negative, got {0}")]
    NegativeTarget(i64),
}

/// Integral flow on the induced digraph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowSolution {
    /// Flow on arc `2k` (`lo → hi` of edge `k`) and `2k + 1` (`hi → lo`).
    pub arc_flow: Vec<u64>,
    /// f*_e = f_xy + f_yx.
    pub edge_flow: Vec<u64>,
    pub net_flow: u64,
    /// $^f in milli-cost units.
    pub total_cost: u64,
}

impl FlowSolution {
    pub fn zero(g: &NetworkGraph) -> Self {
        FlowSolution {
            arc_flow: vec![0; 2 * g.edge_count()],
            edge_flow: vec![0; g.edge_count()],
            net_flow: 0,
            total_cost: 0,
        }
    }

    /// E*: edges carrying positive flow.
    pub fn active_edges(&self) -> Vec<usize> {
        self.edge_flow.iter().enumerate().filter(|(_, &f)| f > 0).map(|(k, _)| k).collect()
    }

    /// Recomputes edge flows, net flow and cost from `arc_flow`.
    pub fn from_arc_flow(g: &NetworkGraph, arc_flow: Vec<u64>) -> Self {
        let edge_flow: Vec<u64> = (0..g.edge_count()).map(|k| arc_flow[2 * k] + arc_flow[2 * k + 1]).collect();
        let total_cost = edge_flow.iter().zip(g.edges()).map(|(f, e)| f * e.unit_cost).sum();
        let s = g.source();
        let mut out: i128 = 0;
        for k in 0..g.edge_count() {
            let (lo, hi) = g.ends(k);
            let (fwd, back) = (arc_flow[2 * k] as i128, arc_flow[2 * k + 1] as i128);
            if lo == s {
                out += fwd - back;
            } else if hi == s {
                out += back - fwd;
            }
        }
        FlowSolution { arc_flow, edge_flow, net_flow: out.max(0) as u64, total_cost }
    }

    /// Checks capacity and conservation constraints, returning a
    /// description of the first violation.
    pub fn check(&self, g: &NetworkGraph) -> Result<(), String> {
        if self.arc_flow.len() != 2 * g.edge_count() || self.edge_flow.len() != g.edge_count() {
            return Err("flow vector length does not match the graph".into());
        }
        let mut balance = vec![0i128; g.node_count()];
        let mut cost = 0u64;
        for (k, e) in g.edges().iter().enumerate() {
            let (fwd, back) = (self.arc_flow[2 * k], self.arc_flow[2 * k + 1]);
            if fwd + back != self.edge_flow[k] {
                return Err(format!("edge {}-{} undirected flow mismatch", e.a, e.b));
            }
            if fwd + back > e.capacity {
                return Err(format!("edge {}-{} exceeds capacity", e.a, e.b));
            }
            let (lo, hi) = g.ends(k);
            balance[lo] += fwd as i128 - back as i128;
            balance[hi] -= fwd as i128 - back as i128;
            cost += (fwd + back) * e.unit_cost;
        }
        for (v, &b) in balance.iter().enumerate() {
            if v != g.source() && v != g.sink() && b != 0 {
                return Err(format!("conservation violated at {}", g.label(v)));
            }
        }
        if balance[g.source()] != self.net_flow as i128 {
            return Err("net flow mismatch".into());
        }
        if cost != self.total_cost {
            return Err("total cost mismatch".into());
        }
        Ok(())
    }

    pub fn has_opposing_flow(&self) -> bool {
        self.arc_flow.chunks(2).any(|p| p[0] > 0 && p[1] > 0)
    }
}

/// $^{f*}/F* in milli-cost units per ebit; `None` when no ebits flow.
pub fn unit_price(sol: &FlowSolution) -> Option<Ratio<u64>> {
    (sol.net_flow > 0).then(|| Ratio::new(sol.total_cost, sol.net_flow))
}

/// One augmentation of the successive-shortest-path run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Augmentation {
    pub amount: u64,
    /// Cost per unit along the path, in milli-units.
    pub unit_cost: i64,
}

struct Residual {
    head: Vec<usize>,
    cap: Vec<u64>,
    cost: Vec<i64>,
    adj: Vec<Vec<usize>>,
}

impl Residual {
    /// Residual arc `4k + 2d` carries flow for digraph arc `2k + d`;
    /// `4k + 2d + 1` is its reverse.
    fn new(g: &NetworkGraph) -> Self {
        let n = g.node_count();
        let mut r = Residual { head: Vec::new(), cap: Vec::new(), cost: Vec::new(), adj: vec![Vec::new(); n] };
        for k in 0..g.edge_count() {
            let (lo, hi) = g.ends(k);
            let e = &g.edges()[k];
            let w = e.unit_cost as i64;
            for (x, y) in [(lo, hi), (hi, lo)] {
                r.adj[x].push(r.head.len());
                r.head.push(y);
                r.cap.push(e.capacity);
                r.cost.push(w);
                r.adj[y].push(r.head.len());
                r.head.push(x);
                r.cap.push(0);
                r.cost.push(-w);
            }
        }
        for list in &mut r.adj {
            list.sort_by_key(|&a| g.rank(r.head[a]));
        }
        r
    }
}

#[derive(Clone, PartialEq, Eq)]
struct Label {
    dist: i64,
    ranks: Vec<u32>,
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.cmp(&other.dist).then_with(|| self.ranks.cmp(&other.ranks))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn augment_until(g: &NetworkGraph, limit: Option<u64>) -> (Vec<u64>, Vec<Augmentation>) {
    let n = g.node_count();
    let (s, t) = (g.source(), g.sink());
    let mut r = Residual::new(g);
    let mut potential = vec![0i64; n];
    let mut flow = 0u64;
    let mut steps = Vec::new();

    while limit.is_none_or(|l| flow < l) {
        let mut best: Vec<Option<Label>> = vec![None; n];
        let mut parent = vec![usize::MAX; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        let start = Label { dist: 0, ranks: vec![g.rank(s)] };
        best[s] = Some(start.clone());
        heap.push(Reverse((start, s)));
        while let Some(Reverse((label, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            for &a in &r.adj[u] {
                if r.cap[a] == 0 {
                    continue;
                }
                let v = r.head[a];
                if done[v] {
                    continue;
                }
                let reduced = r.cost[a] + potential[u] - potential[v];
                debug_assert!(reduced >= 0, "negative reduced cost");
                let mut ranks = label.ranks.clone();
                ranks.push(g.rank(v));
                let cand = Label { dist: label.dist + reduced, ranks };
                if best[v].as_ref().is_none_or(|b| cand < *b) {
                    best[v] = Some(cand.clone());
                    parent[v] = a;
                    heap.push(Reverse((cand, v)));
                }
            }
        }
        if !done[t] {
            break;
        }
        for v in 0..n {
            if let Some(b) = &best[v] {
                potential[v] += b.dist;
            }
        }
        let mut amount = limit.map_or(u64::MAX, |l| l - flow);
        let mut path_cost = 0i64;
        let mut v = t;
        while v != s {
            let a = parent[v];
            amount = amount.min(r.cap[a]);
            path_cost += r.cost[a];
            v = r.head[a ^ 1];
        }
        let mut v = t;
        while v != s {
            let a = parent[v];
            r.cap[a] -= amount;
            r.cap[a ^ 1] += amount;
            v = r.head[a ^ 1];
        }
        flow += amount;
        steps.push(Augmentation { amount, unit_cost: path_cost });
    }

    // Flow on digraph arc j is the residual capacity of the reverse arc.
    let arc_flow = (0..2 * g.edge_count()).map(|j| r.cap[2 * j + 1]).collect();
    (arc_flow, steps)
}

/// Removes opposing flow on each edge, then cancels directed cycles in the
/// remaining flow. Net flow is preserved and cost never increases.
pub fn canonicalize(g: &NetworkGraph, arc_flow: &mut [u64]) {
    for pair in arc_flow.chunks_mut(2) {
        let m = pair[0].min(pair[1]);
        pair[0] -= m;
        pair[1] -= m;
    }
    while let Some(cycle) = find_flow_cycle(g, arc_flow) {
        let m = cycle.iter().map(|&j| arc_flow[j]).min().unwrap_or(0);
        for &j in &cycle {
            arc_flow[j] -= m;
        }
    }
}

fn arc_ends(g: &NetworkGraph, j: usize) -> (usize, usize) {
    let (lo, hi) = g.ends(j / 2);
    if j.is_multiple_of(2) {
        (lo, hi)
    } else {
        (hi, lo)
    }
}

/// Some directed cycle of arcs with positive flow, if any.
fn find_flow_cycle(g: &NetworkGraph, arc_flow: &[u64]) -> Option<Vec<usize>> {
    let n = g.node_count();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, &f) in arc_flow.iter().enumerate() {
        if f > 0 {
            out[arc_ends(g, j).0].push(j);
        }
    }
    // 0 = unvisited, 1 = on stack, 2 = finished
    let mut state = vec![0u8; n];
    let mut via = vec![usize::MAX; n];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        state[root] = 1;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next < out[u].len() {
                let j = out[u][*next];
                *next += 1;
                let v = arc_ends(g, j).1;
                match state[v] {
                    0 => {
                        state[v] = 1;
                        via[v] = j;
                        stack.push((v, 0));
                    }
                    1 => {
                        let mut cycle = vec![j];
                        let mut w = u;
                        while w != v {
                            let a = via[w];
                            cycle.push(a);
                            w = arc_ends(g, a).0;
                        }
                        return Some(cycle);
                    }
                    _ => {}
                }
            } else {
                state[u] = 2;
                stack.pop();
            }
        }
    }
    None
}

/// Minimum-cost flow with net s→t flow exactly `target`.
pub fn min_cost_flow(g: &NetworkGraph, target: i64) -> Result<FlowSolution, FlowError> {
    if target < 0 {
        return Err(FlowError::NegativeTarget(target));
    }
    let target = target as u64;
    let (mut arc_flow, steps) = augment_until(g, Some(target));
    let reached: u64 = steps.iter().map(|s| s.amount).sum();
    if reached < target {
        return Err(FlowError::InfeasibleTarget { target, capacity: reached });
    }
    canonicalize(g, &mut arc_flow);
    let sol = FlowSolution::from_arc_flow(g, arc_flow);
    debug_assert_eq!(sol.net_flow, target);
    Ok(sol)
}

/// Minimum-cost flow at the min-cut value C_st.
pub fn min_cost_max_flow(g: &NetworkGraph) -> FlowSolution {
    let (mut arc_flow, _) = augment_until(g, None);
    canonicalize(g, &mut arc_flow);
    FlowSolution::from_arc_flow(g, arc_flow)
}

/// Minimum total cost for every F* in `0..=C_st`, from a single run.
/// Entry `i` is the cost at F* = i.
pub fn cost_curve(g: &NetworkGraph) -> Vec<u64> {
    let (_, steps) = augment_until(g, None);
    let mut curve = vec![0u64];
    let mut cost = 0u64;
    for step in steps {
        for _ in 0..step.amount {
            cost += step.unit_cost as u64;
            curve.push(cost);
        }
    }
    curve
}

/// Scans F* in 1..=C_st for the smallest unit price, preferring the
/// smallest F* on ties.
pub fn best_unit_price_target(g: &NetworkGraph) -> Result<(u64, FlowSolution), FlowError> {
    let curve = cost_curve(g);
    let capacity = (curve.len() - 1) as u64;
    if capacity == 0 {
        return Err(FlowError::InfeasibleTarget { target: 1, capacity: 0 });
    }
    let mut best = 1u64;
    for f in 2..=capacity {
        // curve[f]/f < curve[best]/best
        if (curve[f as usize] as u128) * (best as u128) < (curve[best as usize] as u128) * (f as u128) {
            best = f;
        }
    }
    let sol = min_cost_flow(g, best as i64)?;
    Ok((best, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{min_cut, Edge, NodeId};

    fn graph(nodes: &[&str], edges: Vec<Edge>) -> NetworkGraph {
        NetworkGraph::new(nodes.iter().map(|&n| NodeId::from(n)).collect(), edges, "s".into(), "t".into()).unwrap()
    }

    fn two_routes() -> NetworkGraph {
        graph(
            &["s", "a", "b", "t"],
            vec![
                Edge::new("s", "a", 1).cost(1),
                Edge::new("a", "t", 1).cost(1),
                Edge::new("s", "b", 1).cost(5),
                Edge::new("b", "t", 1).cost(5),
            ],
        )
    }

    fn diamond() -> NetworkGraph {
        graph(
            &["s", "a", "b", "t"],
            vec![
                Edge::new("s", "a", 1).cost(1),
                Edge::new("s", "b", 1).cost(1),
                Edge::new("a", "t", 1).cost(1),
                Edge::new("b", "t", 1).cost(1),
            ],
        )
    }

    #[test]
    fn zero_target_is_free() {
        let sol = min_cost_flow(&two_routes(), 0).unwrap();
        assert_eq!(sol.total_cost, 0);
        assert!(sol.arc_flow.iter().all(|&f| f == 0));
    }

    #[test]
    fn cheaper_route_first() {
        let g = two_routes();
        let sol = min_cost_flow(&g, 1).unwrap();
        assert_eq!(sol.total_cost, 2000);
        assert_eq!(sol.edge_flow, vec![1, 1, 0, 0]);
        sol.check(&g).unwrap();
    }

    #[test]
    fn chain_target_two() {
        let g = graph(&["s", "r", "t"], vec![Edge::new("s", "r", 3).cost(1), Edge::new("r", "t", 2).cost(1)]);
        let sol = min_cost_flow(&g, 2).unwrap();
        assert_eq!(sol.edge_flow, vec![2, 2]);
        assert_eq!(sol.total_cost, 4000);
        assert_eq!(min_cost_flow(&g, 3), Err(FlowError::InfeasibleTarget { target: 3, capacity: 2 }));
        assert_eq!(min_cost_flow(&g, -1), Err(FlowError::NegativeTarget(-1)));
    }

    #[test]
    fn max_flow_examples() {
        let single = graph(&["s", "t"], vec![Edge::new("s", "t", 5).cost(3)]);
        let sol = min_cost_max_flow(&single);
        assert_eq!((sol.net_flow, sol.total_cost), (5, 15000));
        assert_eq!(unit_price(&sol), Some(Ratio::new(3000, 1)));

        let sol = min_cost_max_flow(&diamond());
        assert_eq!((sol.net_flow, sol.total_cost), (2, 4000));
        assert_eq!(unit_price(&sol), Some(Ratio::new(2000, 1)));

        let split = graph(&["s", "a", "t"], vec![Edge::new("s", "a", 2).cost(1)]);
        let sol = min_cost_max_flow(&split);
        assert_eq!((sol.net_flow, sol.total_cost), (0, 0));
        assert_eq!(unit_price(&sol), None);
    }

    #[test]
    fn price_scan() {
        let single = graph(&["s", "t"], vec![Edge::new("s", "t", 5).cost(3)]);
        let (f, sol) = best_unit_price_target(&single).unwrap();
        assert_eq!(f, 1);
        assert_eq!(unit_price(&sol), Some(Ratio::new(3000, 1)));

        assert_eq!(best_unit_price_target(&two_routes()).unwrap().0, 1);
        assert_eq!(cost_curve(&two_routes()), vec![0, 2000, 12000]);

        let (f, sol) = best_unit_price_target(&diamond()).unwrap();
        assert_eq!(f, 1);
        assert_eq!(unit_price(&sol), Some(Ratio::new(2000, 1)));

        let split = graph(&["s", "a", "t"], vec![Edge::new("s", "a", 2)]);
        assert!(matches!(best_unit_price_target(&split), Err(FlowError::InfeasibleTarget { .. })));
    }

    #[test]
    fn ties_break_on_label_order() {
        // Two equal-cost routes; "a" sorts before "b" regardless of input order.
        let g = graph(
            &["t", "b", "s", "a"],
            vec![
                Edge::new("s", "b", 1).cost(1),
                Edge::new("b", "t", 1).cost(1),
                Edge::new("s", "a", 1).cost(1),
                Edge::new("a", "t", 1).cost(1),
            ],
        );
        let sol = min_cost_flow(&g, 1).unwrap();
        assert_eq!(sol.edge_flow, vec![0, 0, 1, 1]);
    }

    #[test]
    fn zero_cost_cycles_removed() {
        // Zero-cost triangle next to the path; canonical output carries no circulation.
        let g = graph(
            &["s", "x", "y", "t"],
            vec![Edge::new("s", "x", 2), Edge::new("x", "y", 2), Edge::new("y", "s", 2), Edge::new("s", "t", 1)],
        );
        let sol = min_cost_max_flow(&g);
        assert_eq!(sol.net_flow, 1);
        assert_eq!(sol.edge_flow, vec![0, 0, 0, 1]);
        assert!(!sol.has_opposing_flow());
    }

    #[test]
    fn canonicalize_cancels_cycle() {
        let g = graph(
            &["s", "x", "y", "z", "t"],
            vec![Edge::new("s", "t", 1), Edge::new("x", "y", 2), Edge::new("y", "z", 2), Edge::new("x", "z", 2)],
        );
        // x→y→z→x circulation plus the direct unit.
        let mut arcs = vec![0u64; 8];
        arcs[0] = 1; // s→t
        arcs[2] = 2; // x→y
        arcs[4] = 2; // y→z
        arcs[7] = 2; // z→x
        canonicalize(&g, &mut arcs);
        let sol = FlowSolution::from_arc_flow(&g, arcs);
        sol.check(&g).unwrap();
        assert_eq!(sol.edge_flow, vec![1, 0, 0, 0]);
    }

    #[test]
    fn canonicalize_cancels_opposing_pairs() {
        let g = graph(
            &["s", "x", "y", "t"],
            vec![Edge::new("s", "x", 2), Edge::new("x", "y", 2), Edge::new("s", "y", 2), Edge::new("y", "t", 2)],
        );
        let mut arcs = vec![0u64; 8];
        arcs[0] = 1; // s→x
        arcs[2] = 1; // x→y
        arcs[5] = 1; // y→s
        arcs[4] = 1; // s→y
        arcs[6] = 1; // y→t
        canonicalize(&g, &mut arcs);
        let sol = FlowSolution::from_arc_flow(&g, arcs);
        sol.check(&g).unwrap();
        assert!(!sol.has_opposing_flow());
        assert_eq!(sol.edge_flow, vec![1, 1, 0, 1]);
        assert_eq!(sol.net_flow, 1);
    }

    #[test]
    fn max_flow_matches_min_cut() {
        let g = diamond();
        assert_eq!(min_cost_flow(&g, min_cut(&g) as i64).unwrap().net_flow, 2);
    }
}
