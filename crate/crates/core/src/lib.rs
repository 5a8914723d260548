//! Minimum-cost entanglement aggregation over quantum networks.
//!
//! The pipeline is:
//!
//! 1. [`netgraph`]: parse a network description into a validated
//!    [`NetworkGraph`] and compute its s–t min-cut.
//! 2. [`mincostflow`]: find an integral minimum-cost flow on the induced
//!    digraph for a requested number of ebits.
//! 3. [`pathplan`]: decompose the flow into s–t path bundles, invert the
//!    per-edge yield functions into channel-use counts, and emit a swap
//!    schedule.
//! 4. [`stabsim`]: run that schedule on a stabilizer tableau, with optional
//!    Pauli noise, to check delivered Bell pairs and error budgets.
//!
//! [`concat`] applies the same machinery one level up, treating a whole
//! lower network plus a distillation yield as the generator for one edge.
//! [`rates`] computes the asymptotic rate bound from per-edge channel
//! capacities.

pub mod concat;
pub mod doc;
pub mod maxflow;
pub mod mincostflow;
pub mod netgraph;
pub mod pathplan;
pub mod rates;
pub mod rational;
pub mod stabsim;
pub mod yields;

pub use mincostflow::{FlowError, FlowSolution};
pub use netgraph::{Edge, GraphError, NetworkGraph, NodeId};
pub use rational::Prob;
