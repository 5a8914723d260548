//! On-disk network description documents (JSON).
//!
//! ```json
//! {
//!   "nodes": ["s", "r", "t"],
//!   "edges": [
//!     {"a": "s", "b": "r", "capacity": 3, "cost": 1, "delta": 0.001},
//!     {"a": "r", "b": "t", "capacity": 2, "cost": 1.5, "max_uses": 4,
//!      "yield": {"kind": "linear", "rate": "1/2"},
//!      "channel": {"kind": "pure_loss", "eta": 0.5, "rate": 10}}
//!   ],
//!   "source": "s",
//!   "sink": "t"
//! }
//! ```
//!
//! A hierarchical document uses the same schema, except an edge may carry a
//! `lower` block in place of `capacity`/`cost`/`delta`:
//!
//! ```json
//! {"a": "A", "b": "B",
//!  "lower": {"network": { ... }, "yield": {"kind": "identity"},
//!            "max_uses": 4, "delta_target": 0.01,
//!            "cost": 2, "target": 1, "threshold": 0.1}}
//! ```
//!
//! Unknown fields are rejected everywhere.

use serde::{Deserialize, Serialize};

use crate::rates::ChannelModel;
use crate::rational::Prob;
use crate::yields::Yield;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeDoc>,
    pub source: String,
    pub sink: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub a: String,
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u64>,
    /// Unit cost; decimal values are scaled to milli-units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<Prob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Prob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_uses: Option<u64>,
    #[serde(default, rename = "yield", skip_serializing_if = "Option::is_none")]
    pub yield_fn: Option<Yield>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Box<LowerDoc>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerDoc {
    pub network: NetworkDoc,
    #[serde(rename = "yield")]
    pub yield_fn: Yield,
    pub max_uses: u64,
    pub delta_target: Prob,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<Prob>,
    /// Ebits requested from the lower network per use. Defaults to its
    /// maximum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<u64>,
    /// Largest tolerated lower-level error `δ + ε` per use.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Prob>,
}

impl NetworkDoc {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn is_hierarchical(&self) -> bool {
        self.edges.iter().any(|e| e.lower.is_some())
    }
}

impl EdgeDoc {
    pub fn new(a: &str, b: &str, capacity: u64, cost: u64) -> Self {
        EdgeDoc {
            a: a.to_string(),
            b: b.to_string(),
            capacity: Some(capacity),
            cost: Some(Prob::new(cost as i64, 1)),
            delta: None,
            max_uses: None,
            yield_fn: None,
            channel: None,
            lower: None,
        }
    }
}
