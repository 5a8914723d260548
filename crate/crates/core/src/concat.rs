//! Network concatenation: a whole lower network plus a distillation yield
//! acts as the entanglement generator for one edge of a higher network.
//!
//! A hier-edge with `μ_max` allowed uses of its lower network offers
//! `θ = ψ(μ_max)` distilled ebits at unit cost `£` and error target `δ`.
//! Substituting every hier-edge by a plain edge `(θ, £, δ)` gives a flat
//! [`NetworkGraph`], on which the level-0 machinery runs unchanged.
//!
//! Nesting depth is unbounded. Lower networks are solved bottom-up with an
//! explicit stack.

use serde::Serialize;
use thiserror::Error;

use crate::doc::{EdgeDoc, NetworkDoc};
use crate::mincostflow::{min_cost_flow, FlowError, FlowSolution};
use crate::netgraph::{min_cut, Edge, GraphError, NetworkGraph, NodeId};
use crate::pathplan::{build_swap_schedule, decompose_flow, PlanError};
use crate::rational::{to_milli, Prob};
use crate::stabsim::{delta_budget, epsilon_or_bound, ErrorBudget, SimError};
use crate::yields::{Yield, YieldError};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ConcatError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("hier-edge {a}-{b}: {source}")]
    Yield { a: NodeId, b: NodeId, source: YieldError },
    #[error("hier-edge {a}-{b}: lower network clients must be {a} and {b}")]
    ClientMismatch { a: NodeId, b: NodeId },
    #[error("hier-edges {0}-{1} are parallel; merge them into one lower network")]
    ParallelHierEdge(NodeId, NodeId),
    #[error("hier-edge {a}-{b}: {message}")]
    BadHierEdge { a: NodeId, b: NodeId, message: String },
    #[error("{at}: {source}")]
    Flow { at: String, source: FlowError },
    #[error("hier-edge {a}-{b}: lower error {error} exceeds threshold {threshold}")]
    ThresholdViolation { a: NodeId, b: NodeId, error: Box<Prob>, threshold: Box<Prob> },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Lower {
    /// A physical edge: identity yield, θ = capacity, £ = cost.
    Base(Edge),
    Network(Box<HierarchicalNetwork>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub lower: Lower,
    pub yield_fn: Yield,
    /// μ_max.
    pub max_uses: u64,
    /// £ in milli-units; `None` picks the constant-efficiency default.
    pub unit_cost: Option<u64>,
    /// δ_ε, the error of one distilled ebit.
    pub delta_target: Prob,
    /// Ebits requested from the lower network per use; defaults to its
    /// min-cut.
    pub target: Option<u64>,
    /// Largest tolerated lower-level `δ + ε` per use.
    pub threshold: Option<Prob>,
}

impl HierEdge {
    pub fn base(e: Edge) -> Self {
        HierEdge {
            a: e.a.clone(),
            b: e.b.clone(),
            yield_fn: Yield::Identity,
            max_uses: e.capacity,
            unit_cost: Some(e.unit_cost),
            delta_target: e.gen_error.clone(),
            target: None,
            threshold: None,
            lower: Lower::Base(e),
        }
    }

    pub fn over(
        a: impl Into<NodeId>,
        b: impl Into<NodeId>,
        lower: HierarchicalNetwork,
        yield_fn: Yield,
        max_uses: u64,
    ) -> Self {
        HierEdge {
            a: a.into(),
            b: b.into(),
            lower: Lower::Network(Box::new(lower)),
            yield_fn,
            max_uses,
            unit_cost: None,
            delta_target: Prob::zero(),
            target: None,
            threshold: None,
        }
    }

    pub fn unit_cost(mut self, milli: u64) -> Self {
        self.unit_cost = Some(milli);
        self
    }

    pub fn delta_target(mut self, delta: Prob) -> Self {
        self.delta_target = delta;
        self
    }

    pub fn target(mut self, f: u64) -> Self {
        self.target = Some(f);
        self
    }

    pub fn threshold(mut self, t: Prob) -> Self {
        self.threshold = Some(t);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalNetwork {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<HierEdge>,
    pub source: NodeId,
    pub sink: NodeId,
}

impl HierarchicalNetwork {
    /// 0 when every edge is physical, else one more than the deepest lower
    /// network.
    pub fn level(&self) -> u32 {
        let mut deepest = 0;
        let mut stack = vec![(self, 0u32)];
        while let Some((net, depth)) = stack.pop() {
            deepest = deepest.max(depth);
            for e in &net.edges {
                if let Lower::Network(inner) = &e.lower {
                    stack.push((inner, depth + 1));
                }
            }
        }
        deepest
    }

    /// Total node count including all nested networks.
    pub fn total_nodes(&self) -> usize {
        let mut count = 0;
        let mut stack = vec![self];
        while let Some(net) = stack.pop() {
            count += net.nodes.len();
            for e in &net.edges {
                if let Lower::Network(inner) = &e.lower {
                    stack.push(inner);
                }
            }
        }
        count
    }
}

fn bad(e: &EdgeDoc, message: impl Into<String>) -> Result<ConcatError, GraphError> {
    Ok(ConcatError::BadHierEdge { a: NodeId::new(e.a.clone())?, b: NodeId::new(e.b.clone())?, message: message.into() })
}

/// Converts a (possibly nested) document. Edges without `lower` become
/// base edges.
pub fn from_doc(doc: &NetworkDoc) -> Result<HierarchicalNetwork, ConcatError> {
    let nodes = doc.nodes.iter().map(|n| NodeId::new(n.clone())).collect::<Result<Vec<_>, _>>()?;
    let mut edges = Vec::with_capacity(doc.edges.len());
    for e in &doc.edges {
        let Some(low) = &e.lower else {
            let flat = NetworkDoc {
                nodes: doc.nodes.clone(),
                edges: vec![e.clone()],
                source: doc.source.clone(),
                sink: doc.sink.clone(),
            };
            let g = crate::netgraph::build_graph(&flat)?;
            edges.push(HierEdge::base(g.edges()[0].clone()));
            continue;
        };
        if e.capacity.is_some() || e.cost.is_some() || e.delta.is_some() || e.max_uses.is_some() || e.yield_fn.is_some()
        {
            return Err(bad(e, "an edge with a lower network takes its parameters from `lower`")?);
        }
        let unit_cost = match &low.cost {
            None => None,
            Some(c) => Some(to_milli(&c.0).ok_or(bad(e, "cost must be exact at 0.001 precision")?)?),
        };
        edges.push(HierEdge {
            a: NodeId::new(e.a.clone())?,
            b: NodeId::new(e.b.clone())?,
            lower: Lower::Network(Box::new(from_doc(&low.network)?)),
            yield_fn: low.yield_fn.clone(),
            max_uses: low.max_uses,
            unit_cost,
            delta_target: low.delta_target.clone(),
            target: low.target,
            threshold: low.threshold.clone(),
        });
    }
    Ok(HierarchicalNetwork {
        nodes,
        edges,
        source: NodeId::new(doc.source.clone())?,
        sink: NodeId::new(doc.sink.clone())?,
    })
}

/// θ_ε = ψ(μ_max).
pub fn effective_capacity(h: &HierEdge) -> u64 {
    h.yield_fn.eval(h.max_uses)
}

fn validate_edge(h: &HierEdge) -> Result<(), ConcatError> {
    let yerr = |source| ConcatError::Yield { a: h.a.clone(), b: h.b.clone(), source };
    h.yield_fn.validate().map_err(yerr)?;
    if !h.delta_target.is_probability() {
        return Err(ConcatError::BadHierEdge {
            a: h.a.clone(),
            b: h.b.clone(),
            message: "delta_target must lie in [0, 1]".into(),
        });
    }
    if let Lower::Network(inner) = &h.lower {
        let clients = [&inner.source, &inner.sink];
        if !(clients.contains(&&h.a) && clients.contains(&&h.b)) {
            return Err(ConcatError::ClientMismatch { a: h.a.clone(), b: h.b.clone() });
        }
        if h.max_uses == 0 {
            return Err(ConcatError::BadHierEdge {
                a: h.a.clone(),
                b: h.b.clone(),
                message: "max_uses must be positive".into(),
            });
        }
    }
    Ok(())
}

fn flat_graph(net: &HierarchicalNetwork, costs: &[u64]) -> Result<NetworkGraph, ConcatError> {
    let mut seen = std::collections::BTreeSet::new();
    for h in &net.edges {
        let key = if h.a <= h.b { (h.a.clone(), h.b.clone()) } else { (h.b.clone(), h.a.clone()) };
        if !seen.insert(key) && matches!(h.lower, Lower::Network(_)) {
            return Err(ConcatError::ParallelHierEdge(h.a.clone(), h.b.clone()));
        }
    }
    let edges = net
        .edges
        .iter()
        .zip(costs)
        .map(|(h, &cost)| {
            Edge::new(h.a.clone(), h.b.clone(), effective_capacity(h)).milli_cost(cost).delta(h.delta_target.clone())
        })
        .collect();
    Ok(NetworkGraph::new(net.nodes.clone(), edges, net.source.clone(), net.sink.clone())?)
}

/// Θ_στ: min-cut of the θ_ε capacities.
pub fn theta_min_cut(net: &HierarchicalNetwork) -> Result<u64, ConcatError> {
    for h in &net.edges {
        validate_edge(h)?;
    }
    Ok(min_cut(&flat_graph(net, &vec![0; net.edges.len()])?))
}

/// `ε` of the swap schedule realizing `sol` under per-swap depolarizing
/// noise `p`. Exact within the exact-analysis regime; beyond it, the
/// sub-additive bound `#swaps · 15p/16`. Returns `(ε, exact)`.
pub fn schedule_epsilon(g: &NetworkGraph, sol: &FlowSolution, p: &Prob) -> Result<(Prob, bool), ConcatError> {
    let bundles = decompose_flow(g, sol)?;
    let sched = build_swap_schedule(g.source_id(), g.sink_id(), &bundles);
    Ok(epsilon_or_bound(&sched, p)?)
}

/// Outcome of solving one lower network for a single use.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LowerSolve {
    pub level: u32,
    /// Ebits delivered per use.
    pub per_use_target: u64,
    /// $^{f*} per use, milli-units.
    pub per_use_cost: u64,
    /// Θ of the lower network.
    pub capacity: u64,
    pub delta: Prob,
    pub epsilon: Prob,
    pub epsilon_exact: bool,
}

/// Flat view of one level.
#[derive(Clone, Debug)]
pub struct Flattened {
    pub graph: NetworkGraph,
    /// Per hier-edge: θ_ε.
    pub theta: Vec<u64>,
    /// Per hier-edge: £_ε.
    pub unit_cost: Vec<u64>,
    /// Per hier-edge: solved lower network, `None` for base edges.
    pub lower: Vec<Option<LowerSolve>>,
    /// Graph edge index of each hier-edge.
    pub edge_index: Vec<usize>,
}

/// £_ε = ⌈μ_max · $^{f*} / θ⌉, or 0 when θ = 0. `None` on overflow.
pub fn default_unit_cost(max_uses: u64, theta: u64, per_use_cost: u64) -> Option<u64> {
    if theta == 0 {
        return Some(0);
    }
    u64::try_from((max_uses as u128 * per_use_cost as u128).div_ceil(theta as u128)).ok()
}

fn finish_level(net: &HierarchicalNetwork, lower: Vec<Option<LowerSolve>>) -> Result<Flattened, ConcatError> {
    let theta: Vec<u64> = net.edges.iter().map(effective_capacity).collect();
    let unit_cost: Vec<u64> = net
        .edges
        .iter()
        .zip(&lower)
        .zip(&theta)
        .map(|((h, low), &th)| match (h.unit_cost, low) {
            (Some(c), _) => Ok(c),
            (None, Some(l)) => {
                default_unit_cost(h.max_uses, th, l.per_use_cost).ok_or_else(|| ConcatError::BadHierEdge {
                    a: h.a.clone(),
                    b: h.b.clone(),
                    message: "default unit cost overflows".into(),
                })
            }
            (None, None) => Ok(0),
        })
        .collect::<Result<_, _>>()?;
    let graph = flat_graph(net, &unit_cost)?;
    let edge_index = net
        .edges
        .iter()
        .map(|h| {
            let (x, y) = (graph.node_index(&h.a).expect("validated"), graph.node_index(&h.b).expect("validated"));
            graph.edge_between(x, y).expect("every hier-edge is in the flat graph")
        })
        .collect();
    Ok(Flattened { graph, theta, unit_cost, lower, edge_index })
}

fn solve_lower(
    h: &HierEdge,
    inner: &HierarchicalNetwork,
    flat: &Flattened,
    p: &Prob,
) -> Result<LowerSolve, ConcatError> {
    let at = format!("lower network of {}-{}", h.a, h.b);
    let capacity = min_cut(&flat.graph);
    let target = h.target.unwrap_or(capacity);
    let sol = min_cost_flow(&flat.graph, target as i64).map_err(|source| ConcatError::Flow { at, source })?;
    let delta = delta_budget(&flat.graph, &sol.active_edges());
    let (epsilon, epsilon_exact) = schedule_epsilon(&flat.graph, &sol, p)?;
    if let Some(threshold) = &h.threshold {
        let error = &delta + &epsilon;
        if error > *threshold {
            return Err(ConcatError::ThresholdViolation {
                a: h.a.clone(),
                b: h.b.clone(),
                error: Box::new(error),
                threshold: Box::new(threshold.clone()),
            });
        }
    }
    Ok(LowerSolve {
        level: inner.level(),
        per_use_target: target,
        per_use_cost: sol.total_cost,
        capacity,
        delta,
        epsilon,
        epsilon_exact,
    })
}

/// Substitutes every hier-edge by its `(θ, £, δ)` edge, solving nested
/// networks bottom-up. `p` is the swap noise used for lower-level `ε`.
pub fn flatten(net: &HierarchicalNetwork, p: &Prob) -> Result<Flattened, ConcatError> {
    struct Frame<'a> {
        net: &'a HierarchicalNetwork,
        next: usize,
        lower: Vec<Option<LowerSolve>>,
    }
    let mut stack = vec![Frame { net, next: 0, lower: Vec::with_capacity(net.edges.len()) }];
    let mut finished: Option<Flattened> = None;
    loop {
        let frame = stack.last_mut().expect("non-empty until root finishes");
        if let Some(done) = finished.take() {
            // A child just finished: it belongs to edge `next - 1`.
            let h = &frame.net.edges[frame.next - 1];
            let Lower::Network(inner) = &h.lower else { unreachable!("only networks are pushed") };
            frame.lower.push(Some(solve_lower(h, inner, &done, p)?));
        }
        if frame.next == frame.net.edges.len() {
            let frame = stack.pop().expect("checked above");
            let flat = finish_level(frame.net, frame.lower)?;
            if stack.is_empty() {
                return Ok(flat);
            }
            finished = Some(flat);
            continue;
        }
        let h = &frame.net.edges[frame.next];
        frame.next += 1;
        validate_edge(h)?;
        match &h.lower {
            Lower::Base(_) => frame.lower.push(None),
            Lower::Network(inner) => {
                let inner: &HierarchicalNetwork = inner;
                stack.push(Frame { net: inner, next: 0, lower: Vec::with_capacity(inner.edges.len()) });
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Aggregate {
    pub flat: Flattened,
    pub solution: FlowSolution,
    /// ψ*_ε per hier-edge.
    pub psi: Vec<u64>,
    /// £^{ψ*} = Σ £_ε ψ*_ε, milli-units.
    pub cost: u64,
    pub budget: ErrorBudget,
    pub epsilon_exact: bool,
}

/// Minimum-cost aggregation of `target` distilled ebits at this level.
pub fn aggregate_level(net: &HierarchicalNetwork, target: i64, p: &Prob) -> Result<Aggregate, ConcatError> {
    let flat = flatten(net, p)?;
    let solution =
        min_cost_flow(&flat.graph, target).map_err(|source| ConcatError::Flow { at: "top level".into(), source })?;
    let psi: Vec<u64> = flat.edge_index.iter().map(|&k| solution.edge_flow[k]).collect();
    let delta = delta_budget(&flat.graph, &solution.active_edges());
    let (epsilon, epsilon_exact) = schedule_epsilon(&flat.graph, &solution, p)?;
    Ok(Aggregate {
        cost: solution.total_cost,
        psi,
        solution,
        budget: ErrorBudget { delta, epsilon },
        epsilon_exact,
        flat,
    })
}

/// Uses of one hier-edge's generator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LowerUse {
    pub a: NodeId,
    pub b: NodeId,
    /// ψ*_ε.
    pub psi: u64,
    /// μ*_ε.
    pub uses: u64,
    /// $^{f*} per use of the generator.
    pub per_use_cost: u64,
    /// Ebits each lower-network use must deliver; `None` for base edges.
    pub lower_target: Option<u64>,
}

/// μ*_ε = smallest μ with ψ(μ) ≥ ψ*_ε, for every hier-edge carrying flow.
pub fn plan_lower_uses(net: &HierarchicalNetwork, agg: &Aggregate) -> Result<Vec<LowerUse>, ConcatError> {
    let mut out = Vec::new();
    for (i, h) in net.edges.iter().enumerate() {
        let psi = agg.psi[i];
        if psi == 0 {
            continue;
        }
        let uses = h.yield_fn.min_uses_for(psi, Some(h.max_uses)).map_err(|source| ConcatError::Yield {
            a: h.a.clone(),
            b: h.b.clone(),
            source,
        })?;
        let (per_use_cost, lower_target) = match (&h.lower, &agg.flat.lower[i]) {
            (Lower::Base(e), _) => (e.unit_cost, None),
            (Lower::Network(_), Some(l)) => (l.per_use_cost, Some(l.per_use_target)),
            (Lower::Network(_), None) => unreachable!("flatten solves every lower network"),
        };
        out.push(LowerUse { a: h.a.clone(), b: h.b.clone(), psi, uses, per_use_cost, lower_target });
    }
    Ok(out)
}

/// Σ μ*_ε · $^{f*}_ε in milli-units.
pub fn total_lower_cost(uses: &[LowerUse]) -> u64 {
    uses.iter().map(|u| u.uses * u.per_use_cost).sum()
}
