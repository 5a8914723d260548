//! Edmonds–Karp maximum flow on undirected capacities.
//!
//! Each undirected edge `{u, v}` with capacity `c` becomes a pair of residual
//! arcs that start at `c` in both directions, so that `f_uv + f_vu <= c`
//! after cancellation. Generic over the capacity type so the same routine
//! serves integral ebit counts and real-valued asymptotic rates.

use std::collections::VecDeque;
use std::ops::{Add, Sub};

pub trait Capacity: Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> {
    const ZERO: Self;
    /// Residual amounts at or below this are treated as saturated.
    fn is_positive(self) -> bool;
    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Capacity for u64 {
    const ZERO: Self = 0;
    fn is_positive(self) -> bool {
        self > 0
    }
}

/// Saturation threshold for real-valued residuals.
pub const REAL_EPS: f64 = 1e-12;

impl Capacity for f64 {
    const ZERO: Self = 0.0;
    fn is_positive(self) -> bool {
        self > REAL_EPS
    }
}

#[derive(Clone, Debug)]
pub struct MaxFlow<C> {
    pub value: C,
    /// `true` for nodes on the source side of a minimum cut.
    pub source_side: Vec<bool>,
}

/// Max s–t flow over undirected edges `(u, v, capacity)` on `n` nodes.
pub fn undirected_max_flow<C: Capacity>(n: usize, edges: &[(usize, usize, C)], s: usize, t: usize) -> MaxFlow<C> {
    let mut head = Vec::with_capacity(edges.len() * 2);
    let mut residual = Vec::with_capacity(edges.len() * 2);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v, c) in edges {
        adj[u].push(head.len());
        head.push(v);
        residual.push(c);
        adj[v].push(head.len());
        head.push(u);
        residual.push(c);
    }

    let mut value = C::ZERO;
    let mut parent_arc = vec![usize::MAX; n];
    loop {
        parent_arc.fill(usize::MAX);
        let mut seen = vec![false; n];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for &a in &adj[u] {
                let v = head[a];
                if !seen[v] && residual[a].is_positive() {
                    seen[v] = true;
                    parent_arc[v] = a;
                    queue.push_back(v);
                }
            }
        }
        if !seen[t] || s == t {
            return MaxFlow { value, source_side: seen };
        }
        let mut bottleneck: Option<C> = None;
        let mut v = t;
        while v != s {
            let a = parent_arc[v];
            bottleneck = Some(match bottleneck {
                None => residual[a],
                Some(b) => b.min(residual[a]),
            });
            v = head[a ^ 1];
        }
        let push = bottleneck.expect("path has at least one arc");
        let mut v = t;
        while v != s {
            let a = parent_arc[v];
            residual[a] = residual[a] - push;
            residual[a ^ 1] = residual[a ^ 1] + push;
            v = head[a ^ 1];
        }
        value = value + push;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_diamond() {
        let edges = [(0, 1, 1u64), (0, 2, 1), (1, 3, 1), (2, 3, 1)];
        let mf = undirected_max_flow(4, &edges, 0, 3);
        assert_eq!(mf.value, 2);
        assert!(mf.source_side[0] && !mf.source_side[3]);
    }

    #[test]
    fn uses_edges_in_either_direction() {
        // s-a, a-b, b-t plus s-b, a-t: flow must cross a-b from b to a.
        let edges = [(0, 1, 1u64), (1, 2, 1), (2, 3, 1), (0, 2, 1), (1, 3, 1)];
        assert_eq!(undirected_max_flow(4, &edges, 0, 3).value, 2);
    }

    #[test]
    fn real_chain() {
        let edges = [(0, 1, 3.0f64), (1, 2, 1.0)];
        let mf = undirected_max_flow(3, &edges, 0, 2);
        assert!((mf.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_is_zero() {
        let edges = [(0, 1, 4u64)];
        assert_eq!(undirected_max_flow(3, &edges, 0, 2).value, 0);
    }
}
