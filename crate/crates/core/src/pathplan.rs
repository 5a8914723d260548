//! From an optimal flow to an executable plan: path bundles, per-edge
//! channel-use counts, and an entanglement-swapping schedule.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::mincostflow::FlowSolution;
use crate::netgraph::{NetworkGraph, NodeId};
use crate::yields::{Yield, YieldError};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("malformed flow: {0}")]
    MalformedFlow(String),
    #[error("edge {a}-{b}: {source}")]
    YieldShortfall { a: NodeId, b: NodeId, source: YieldError },
    #[error("edge {a}-{b}: yield at max_uses is {got}, capacity is {capacity}")]
    YieldMismatch { a: NodeId, b: NodeId, got: u64, capacity: u64 },
    #[error("schedule line {line}: {message}")]
    ScheduleSyntax { line: usize, message: String },
}

/// A simple s–t path carrying `multiplicity` Bell pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathBundle {
    pub path: Vec<NodeId>,
    pub multiplicity: u64,
}

/// Splits a canonical flow into s–t paths. Each round takes the path with
/// fewest hops (then smallest label sequence) through arcs with positive
/// flow and subtracts its bottleneck.
pub fn decompose_flow(g: &NetworkGraph, sol: &FlowSolution) -> Result<Vec<PathBundle>, PlanError> {
    sol.check(g).map_err(PlanError::MalformedFlow)?;
    if sol.has_opposing_flow() {
        return Err(PlanError::MalformedFlow("opposing flow on an edge".into()));
    }
    let n = g.node_count();
    let (s, t) = (g.source(), g.sink());
    let mut flow = sol.arc_flow.clone();
    // Outgoing arcs per node, ordered by head label.
    let mut out: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for j in 0..flow.len() {
        let (lo, hi) = g.ends(j / 2);
        let (x, y) = if j % 2 == 0 { (lo, hi) } else { (hi, lo) };
        out[x].push((j, y));
    }
    for list in &mut out {
        list.sort_by_key(|&(_, y)| g.rank(y));
    }

    let mut bundles = Vec::new();
    let mut remaining = sol.net_flow;
    while remaining > 0 {
        let mut via = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for &(j, y) in &out[u] {
                if flow[j] > 0 && !seen[y] {
                    seen[y] = true;
                    via[y] = j;
                    queue.push_back(y);
                }
            }
        }
        if !seen[t] {
            return Err(PlanError::MalformedFlow("net flow not realizable by s–t paths".into()));
        }
        let mut arcs = Vec::new();
        let mut nodes = vec![t];
        let mut v = t;
        while v != s {
            let j = via[v];
            arcs.push(j);
            let (lo, hi) = g.ends(j / 2);
            v = if j % 2 == 0 { lo } else { hi };
            nodes.push(v);
        }
        nodes.reverse();
        let m = arcs.iter().map(|&j| flow[j]).min().expect("non-empty path").min(remaining);
        for &j in &arcs {
            flow[j] -= m;
        }
        remaining -= m;
        bundles.push(PathBundle { path: nodes.into_iter().map(|i| g.label(i).clone()).collect(), multiplicity: m });
    }
    Ok(bundles)
}

/// Channel uses planned for one active edge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EdgeUses {
    pub edge: usize,
    pub a: NodeId,
    pub b: NodeId,
    /// f*_e.
    pub needed: u64,
    /// m*_e.
    pub uses: u64,
    /// f_e(m*_e); any excess over `needed` is discarded.
    pub achieved: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChannelUsePlan {
    pub edges: Vec<EdgeUses>,
}

impl ChannelUsePlan {
    pub fn total_uses(&self) -> u64 {
        self.edges.iter().map(|e| e.uses).sum()
    }
}

/// m*_e = smallest m with f_e(m) >= f*_e for each edge, using each edge's
/// own generator. Edges with no flow get zero uses.
pub fn plan_channel_uses(g: &NetworkGraph, sol: &FlowSolution) -> Result<ChannelUsePlan, PlanError> {
    let yields: Vec<Yield> = g.edges().iter().map(|e| e.generator()).collect();
    plan_channel_uses_with(g, sol, &yields)
}

pub fn plan_channel_uses_with(
    g: &NetworkGraph,
    sol: &FlowSolution,
    yields: &[Yield],
) -> Result<ChannelUsePlan, PlanError> {
    assert_eq!(yields.len(), g.edge_count(), "one yield function per edge");
    let mut edges = Vec::new();
    for (k, e) in g.edges().iter().enumerate() {
        let y = &yields[k];
        if let Some(max) = e.max_uses {
            let got = y.eval(max);
            if got != e.capacity {
                return Err(PlanError::YieldMismatch { a: e.a.clone(), b: e.b.clone(), got, capacity: e.capacity });
            }
        }
        let needed = sol.edge_flow[k];
        let uses = y.min_uses_for(needed, e.max_uses).map_err(|source| PlanError::YieldShortfall {
            a: e.a.clone(),
            b: e.b.clone(),
            source,
        })?;
        edges.push(EdgeUses { edge: k, a: e.a.clone(), b: e.b.clone(), needed, uses, achieved: y.eval(uses) });
    }
    Ok(ChannelUsePlan { edges })
}

pub type QubitId = usize;
pub type MeasId = usize;

/// One LOCC step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instruction {
    /// Prepare |Φ+⟩ on `(qa, qb)`, held at `a` and `b`; `copy` numbers the
    /// pairs on edge `{a, b}`.
    CreateBellPair { a: NodeId, b: NodeId, copy: u64, qa: QubitId, qb: QubitId },
    /// Bell-state measurement at `node`: CNOT(q1→q2), H(q1), then Z
    /// measurements with outcomes recorded as `m1` (from q1) and `m2`.
    BellMeasure { node: NodeId, q1: QubitId, q2: QubitId, m1: MeasId, m2: MeasId },
    /// Apply X^(xor of `x_from`) then Z^(xor of `z_from`) to `qubit`.
    PauliCorrect { node: NodeId, qubit: QubitId, x_from: Vec<MeasId>, z_from: Vec<MeasId> },
}

/// Ordered swap program delivering Bell pairs between `source` and `sink`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwapSchedule {
    pub source: NodeId,
    pub sink: NodeId,
    pub qubits: usize,
    pub measurements: usize,
    pub instructions: Vec<Instruction>,
}

impl SwapSchedule {
    pub fn create_count(&self) -> usize {
        self.instructions.iter().filter(|i| matches!(i, Instruction::CreateBellPair { .. })).count()
    }

    pub fn measure_count(&self) -> usize {
        self.instructions.iter().filter(|i| matches!(i, Instruction::BellMeasure { .. })).count()
    }

    /// Delivered `(source qubit, sink qubit)` pairs, obtained by following
    /// which qubits become entangled as swaps join pairs. Ordered by
    /// source qubit.
    pub fn delivered_pairs(&self) -> Vec<(QubitId, QubitId)> {
        let mut partner = vec![usize::MAX; self.qubits];
        let mut location: Vec<Option<&NodeId>> = vec![None; self.qubits];
        let mut measured = vec![false; self.qubits];
        for ins in &self.instructions {
            match ins {
                Instruction::CreateBellPair { a, b, qa, qb, .. } => {
                    partner[*qa] = *qb;
                    partner[*qb] = *qa;
                    location[*qa] = Some(a);
                    location[*qb] = Some(b);
                }
                Instruction::BellMeasure { q1, q2, .. } => {
                    let (x, y) = (partner[*q1], partner[*q2]);
                    partner[x] = y;
                    partner[y] = x;
                    measured[*q1] = true;
                    measured[*q2] = true;
                }
                Instruction::PauliCorrect { .. } => {}
            }
        }
        let mut pairs: Vec<(QubitId, QubitId)> = (0..self.qubits)
            .filter(|&q| !measured[q] && location[q] == Some(&self.source))
            .filter_map(|q| {
                let p = partner[q];
                (p != usize::MAX && !measured[p] && location[p] == Some(&self.sink)).then_some((q, p))
            })
            .collect();
        pairs.sort();
        pairs
    }

    /// Line-oriented text form; see [`SwapSchedule::parse`].
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    /// Parses the line format:
    ///
    /// ```text
    /// schedule <source> <sink> qubits=<n> measurements=<m>
    /// create <a> <b> copy=<k> q<i> q<j>
    /// measure <node> q<i> q<j> m<k> m<l>
    /// correct <node> q<i> x=<m-list> z=<m-list>
    /// ```
    ///
    /// Node labels are JSON string literals. An `m-list` is `-` or
    /// comma-separated `m<k>` references. Blank lines and lines starting
    /// with `#` are ignored.
    pub fn parse(text: &str) -> Result<SwapSchedule, PlanError> {
        let mut header: Option<(NodeId, NodeId, usize, usize)> = None;
        let mut instructions = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line_no = no + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| PlanError::ScheduleSyntax { line: line_no, message };
            let tokens = tokenize(line).map_err(err)?;
            let word = tokens[0].as_str();
            let want = |n: usize| {
                if tokens.len() == n {
                    Ok(())
                } else {
                    Err(err(format!("{word}: expected {} fields, found {}", n - 1, tokens.len() - 1)))
                }
            };
            match word {
                "schedule" => {
                    want(5)?;
                    if header.is_some() {
                        return Err(err("duplicate header".into()));
                    }
                    header = Some((
                        label(&tokens[1]).map_err(err)?,
                        label(&tokens[2]).map_err(err)?,
                        keyed(&tokens[3], "qubits=").map_err(err)?,
                        keyed(&tokens[4], "measurements=").map_err(err)?,
                    ));
                }
                _ if header.is_none() => return Err(err("missing schedule header".into())),
                "create" => {
                    want(6)?;
                    instructions.push(Instruction::CreateBellPair {
                        a: label(&tokens[1]).map_err(err)?,
                        b: label(&tokens[2]).map_err(err)?,
                        copy: keyed(&tokens[3], "copy=").map_err(err)? as u64,
                        qa: reference(&tokens[4], 'q').map_err(err)?,
                        qb: reference(&tokens[5], 'q').map_err(err)?,
                    });
                }
                "measure" => {
                    want(6)?;
                    instructions.push(Instruction::BellMeasure {
                        node: label(&tokens[1]).map_err(err)?,
                        q1: reference(&tokens[2], 'q').map_err(err)?,
                        q2: reference(&tokens[3], 'q').map_err(err)?,
                        m1: reference(&tokens[4], 'm').map_err(err)?,
                        m2: reference(&tokens[5], 'm').map_err(err)?,
                    });
                }
                "correct" => {
                    want(5)?;
                    instructions.push(Instruction::PauliCorrect {
                        node: label(&tokens[1]).map_err(err)?,
                        qubit: reference(&tokens[2], 'q').map_err(err)?,
                        x_from: meas_list(&tokens[3], "x=").map_err(err)?,
                        z_from: meas_list(&tokens[4], "z=").map_err(err)?,
                    });
                }
                other => return Err(err(format!("unknown instruction {other:?}"))),
            }
        }
        let (source, sink, qubits, measurements) =
            header.ok_or(PlanError::ScheduleSyntax { line: 0, message: "empty schedule".into() })?;
        Ok(SwapSchedule { source, sink, qubits, measurements, instructions })
    }
}

fn quote(id: &NodeId) -> String {
    serde_json::to_string(id.as_str()).expect("string serializes")
}

fn join_meas(list: &[MeasId]) -> String {
    if list.is_empty() {
        "-".into()
    } else {
        list.iter().map(|m| format!("m{m}")).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Display for SwapSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "schedule {} {} qubits={} measurements={}",
            quote(&self.source),
            quote(&self.sink),
            self.qubits,
            self.measurements
        )?;
        for ins in &self.instructions {
            match ins {
                Instruction::CreateBellPair { a, b, copy, qa, qb } => {
                    writeln!(f, "create {} {} copy={copy} q{qa} q{qb}", quote(a), quote(b))?
                }
                Instruction::BellMeasure { node, q1, q2, m1, m2 } => {
                    writeln!(f, "measure {} q{q1} q{q2} m{m1} m{m2}", quote(node))?
                }
                Instruction::PauliCorrect { node, qubit, x_from, z_from } => {
                    writeln!(f, "correct {} q{qubit} x={} z={}", quote(node), join_meas(x_from), join_meas(z_from))?
                }
            }
        }
        Ok(())
    }
}

fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut tokens = Vec::new();
    let mut chars = line.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c == '"' {
            chars.next();
            let mut escaped = false;
            let mut end = None;
            for (i, ch) in chars.by_ref() {
                if escaped {
                    escaped = false;
                } else if ch == '\\' {
                    escaped = true;
                } else if ch == '"' {
                    end = Some(i);
                    break;
                }
            }
            let end = end.ok_or("unterminated string")?;
            tokens.push(line[start..=end].to_string());
        } else {
            let mut end = line.len();
            while let Some(&(i, ch)) = chars.peek() {
                if ch.is_whitespace() {
                    end = i;
                    break;
                }
                chars.next();
            }
            tokens.push(line[start..end].to_string());
        }
    }
    if tokens.is_empty() {
        return Err("empty line".into());
    }
    Ok(tokens)
}

fn label(token: &str) -> Result<NodeId, String> {
    let s: String = serde_json::from_str(token).map_err(|_| format!("expected quoted node label, found {token}"))?;
    NodeId::new(s).map_err(|e| e.to_string())
}

fn keyed(token: &str, key: &str) -> Result<usize, String> {
    token
        .strip_prefix(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format!("expected {key}<integer>, found {token}"))
}

fn reference(token: &str, prefix: char) -> Result<usize, String> {
    token
        .strip_prefix(prefix)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format!("expected {prefix}<index>, found {token}"))
}

fn meas_list(token: &str, key: &str) -> Result<Vec<MeasId>, String> {
    let body = token.strip_prefix(key).ok_or_else(|| format!("expected {key}..., found {token}"))?;
    if body == "-" {
        return Ok(Vec::new());
    }
    body.split(',').map(|m| reference(m, 'm')).collect()
}

/// Sequential left-to-right swap program. For every copy of every path:
/// one pair per hop, Bell measurements at interior nodes in path order,
/// then one correction on the sink's qubit.
pub fn build_swap_schedule(source: &NodeId, sink: &NodeId, bundles: &[PathBundle]) -> SwapSchedule {
    let mut instructions = Vec::new();
    let mut next_qubit = 0usize;
    let mut next_meas = 0usize;
    let mut copies: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
    for bundle in bundles {
        for _ in 0..bundle.multiplicity {
            // (left qubit, right qubit) for each hop
            let mut hops = Vec::with_capacity(bundle.path.len().saturating_sub(1));
            for w in bundle.path.windows(2) {
                let key = if w[0] <= w[1] { (w[0].clone(), w[1].clone()) } else { (w[1].clone(), w[0].clone()) };
                let copy = copies.entry(key).or_insert(0);
                let (qa, qb) = (next_qubit, next_qubit + 1);
                next_qubit += 2;
                instructions.push(Instruction::CreateBellPair {
                    a: w[0].clone(),
                    b: w[1].clone(),
                    copy: *copy,
                    qa,
                    qb,
                });
                *copy += 1;
                hops.push((qa, qb));
            }
            let mut x_from = Vec::new();
            let mut z_from = Vec::new();
            for (i, pair) in hops.windows(2).enumerate() {
                let (m1, m2) = (next_meas, next_meas + 1);
                next_meas += 2;
                instructions.push(Instruction::BellMeasure {
                    node: bundle.path[i + 1].clone(),
                    q1: pair[0].1,
                    q2: pair[1].0,
                    m1,
                    m2,
                });
                z_from.push(m1);
                x_from.push(m2);
            }
            if hops.len() > 1 {
                instructions.push(Instruction::PauliCorrect {
                    node: bundle.path.last().expect("non-empty path").clone(),
                    qubit: hops.last().expect("at least one hop").1,
                    x_from,
                    z_from,
                });
            }
        }
    }
    SwapSchedule {
        source: source.clone(),
        sink: sink.clone(),
        qubits: next_qubit,
        measurements: next_meas,
        instructions,
    }
}
