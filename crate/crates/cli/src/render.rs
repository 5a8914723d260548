//! Text and DOT helpers.

use std::fmt::Write;

use qagg_core::mincostflow::FlowSolution;
use qagg_core::NetworkGraph;

/// Milli-units as units with three decimals.
pub fn units(milli: u64) -> String {
    format!("{}.{:03}", milli / 1000, milli % 1000)
}

/// Exact ratio of milli-units per ebit, shown in units.
pub fn price(milli: u64, ebits: u64) -> String {
    if ebits == 0 {
        return "-".into();
    }
    let per = milli as f64 / ebits as f64 / 1000.0;
    format!("{per:.3}")
}

pub fn quote(label: &str) -> String {
    let mut s = String::with_capacity(label.len() + 2);
    s.push('"');
    for c in label.chars() {
        if c == '"' || c == '\\' {
            s.push('\\');
        }
        s.push(c);
    }
    s.push('"');
    s
}

/// Per-edge drawing instructions.
pub struct EdgeStyle {
    pub label: String,
    /// Draw from `b` to `a` instead of `a` to `b`.
    pub reversed: bool,
    pub active: bool,
    pub highlight: bool,
}

pub fn dot(g: &NetworkGraph, style: impl Fn(usize) -> EdgeStyle) -> String {
    let mut s = String::from("graph qagg {\n  rankdir=LR;\n  node [shape=circle];\n");
    for (v, id) in g.nodes().iter().enumerate() {
        let shape = if v == g.source() || v == g.sink() { " [shape=doublecircle]" } else { "" };
        let _ = writeln!(s, "  {}{shape};", quote(id.as_str()));
    }
    for (k, e) in g.edges().iter().enumerate() {
        let st = style(k);
        let (x, y) = if st.reversed { (&e.b, &e.a) } else { (&e.a, &e.b) };
        let mut attrs = vec![format!("label={}", quote(&st.label))];
        if st.active {
            attrs.push("penwidth=2".into());
            attrs.push("dir=forward".into());
        } else {
            attrs.push("style=dashed".into());
        }
        if st.highlight {
            attrs.push("color=red".into());
        }
        let _ = writeln!(s, "  {} -- {} [{}];", quote(x.as_str()), quote(y.as_str()), attrs.join(", "));
    }
    s.push_str("}\n");
    s
}

/// Net flow from `e.a` to `e.b` on edge `k` (negative when it runs b→a).
pub fn net_ab(g: &NetworkGraph, sol: &FlowSolution, k: usize) -> i64 {
    let (lo, _) = g.ends(k);
    let fwd = sol.arc_flow[2 * k] as i64 - sol.arc_flow[2 * k + 1] as i64;
    if g.label(lo) == &g.edges()[k].a {
        fwd
    } else {
        -fwd
    }
}

/// `f*/c @ cost` labels with arrows along the net flow.
pub fn flow_dot(g: &NetworkGraph, sol: &FlowSolution) -> String {
    dot(g, |k| {
        let e = &g.edges()[k];
        EdgeStyle {
            label: format!("{}/{} @ {}", sol.edge_flow[k], e.capacity, units(e.unit_cost)),
            reversed: net_ab(g, sol, k) < 0,
            active: sol.edge_flow[k] > 0,
            highlight: false,
        }
    })
}
