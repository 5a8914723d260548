//! Stabilizer-level execution of swap schedules.
//!
//! All schedule operations are Clifford (pair preparation, Bell
//! measurement, Pauli correction) and the noise is Pauli, so the tableau
//! simulation is exact. Two noise sources are modelled:
//!
//! * `swap_depolarize_p`: before each Bell measurement, with probability
//!   `p` a uniformly random two-qubit Pauli (one of 16, identity included)
//!   hits the two measured qubits.
//! * `pair_error`: the `f` pairs created on an edge form one block. With
//!   probability `δ_e` the block is replaced by a uniformly random product
//!   of Bell states, which puts it at trace distance `δ_e (1 − 4^{−f})`
//!   from `Φ^{⊗f}`, within the `δ_e` budget.
//!
//! Trace distances use the `½‖·‖₁` normalization.

mod exact;
mod tableau;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use exact::{
    delivered_distance_exact, epsilon_exact, epsilon_or_bound, frame_distribution, pair_fidelity_exact,
    EXACT_QUBIT_LIMIT,
};
pub use tableau::{Pauli, Tableau};

use crate::netgraph::{NetworkGraph, NodeId};
use crate::pathplan::{Instruction, QubitId, SwapSchedule};
use crate::rational::Prob;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("schedule violation at instruction {index}: {message}")]
    ScheduleViolation { index: usize, message: String },
    #[error("{qubits} qubits exceed the exact-analysis limit of {limit}")]
    TooLarge { qubits: usize, limit: usize },
    #[error("noise probability {0} is outside [0, 1]")]
    BadProbability(Prob),
    #[error("noiseless run did not deliver ideal pairs")]
    NotIdeal,
}

pub(crate) fn edge_key(a: &NodeId, b: &NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct NoiseModel {
    pub swap_depolarize_p: Prob,
    /// δ_e per unordered edge; missing edges are noiseless.
    pub pair_error: BTreeMap<(NodeId, NodeId), Prob>,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel::default()
    }

    pub fn swap_only(p: Prob) -> Self {
        NoiseModel { swap_depolarize_p: p, pair_error: BTreeMap::new() }
    }

    /// Swap noise `p` plus each edge's own δ_e.
    pub fn from_graph(g: &NetworkGraph, p: Prob) -> Self {
        let pair_error = g
            .edges()
            .iter()
            .filter(|e| !e.gen_error.is_zero())
            .map(|e| (edge_key(&e.a, &e.b), e.gen_error.clone()))
            .collect();
        NoiseModel { swap_depolarize_p: p, pair_error }
    }

    pub fn with_pair_error(mut self, a: &NodeId, b: &NodeId, delta: Prob) -> Self {
        self.pair_error.insert(edge_key(a, b), delta);
        self
    }

    pub fn pair_error_for(&self, a: &NodeId, b: &NodeId) -> Prob {
        self.pair_error.get(&edge_key(a, b)).cloned().unwrap_or_else(Prob::zero)
    }

    pub fn without_pair_errors(&self) -> Self {
        NoiseModel::swap_only(self.swap_depolarize_p.clone())
    }

    pub fn is_noiseless(&self) -> bool {
        self.swap_depolarize_p.is_zero() && self.pair_error.values().all(Prob::is_zero)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        std::iter::once(&self.swap_depolarize_p)
            .chain(self.pair_error.values())
            .find(|p| !p.is_probability())
            .map_or(Ok(()), |p| Err(SimError::BadProbability(p.clone())))
    }
}

/// δ_{E*} paired with ε_{E*}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorBudget {
    pub delta: Prob,
    pub epsilon: Prob,
}

impl ErrorBudget {
    pub fn bound(&self) -> Prob {
        &self.delta + &self.epsilon
    }
}

/// δ_{E*}: exact sum of δ_e over the given edges.
pub fn delta_budget(g: &NetworkGraph, active: &[usize]) -> Prob {
    active.iter().map(|&k| &g.edges()[k].gen_error).sum()
}

/// Correction actually applied by a `PauliCorrect` step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Correction {
    I,
    X,
    Z,
    XZ,
}

impl Correction {
    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Correction::I,
            (true, false) => Correction::X,
            (false, true) => Correction::Z,
            (true, true) => Correction::XZ,
        }
    }
}

/// State of one delivered pair after the run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PairCheck {
    pub source_qubit: QubitId,
    pub sink_qubit: QubitId,
    /// Sign of XX (`Some(true)` is +1); `None` if not deterministic.
    pub xx: Option<bool>,
    pub zz: Option<bool>,
}

impl PairCheck {
    /// Stabilized by +XX and +ZZ, i.e. exactly |Φ+⟩.
    pub fn is_ideal(&self) -> bool {
        self.xx == Some(true) && self.zz == Some(true)
    }

    /// Bell-frame bits `(x_flip, z_flip)`, if the pair is a Bell state.
    pub fn frame(&self) -> Option<(bool, bool)> {
        Some((!self.zz?, !self.xx?))
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: Tableau,
    pub record: Vec<bool>,
    pub corrections: Vec<(QubitId, Correction)>,
    pub pairs: Vec<PairCheck>,
}

impl RunOutcome {
    pub fn all_ideal(&self) -> bool {
        self.pairs.iter().all(PairCheck::is_ideal)
    }
}

/// Pauli faults injected into one execution: `on_create[i]` hits the
/// first qubit of the `i`-th created pair right after preparation,
/// `on_measure[j]` hits the two qubits of the `j`-th Bell measurement
/// just before it.
#[derive(Clone, Debug, Default)]
pub(crate) struct Faults {
    pub on_create: Vec<Pauli>,
    pub on_measure: Vec<(Pauli, Pauli)>,
}

impl Faults {
    pub(crate) fn none(sched: &SwapSchedule) -> Self {
        Faults {
            on_create: vec![Pauli::I; sched.create_count()],
            on_measure: vec![(Pauli::I, Pauli::I); sched.measure_count()],
        }
    }
}

/// Structural checks: qubits created once, used only while live and at
/// the node holding them, measurements referenced only after they exist.
pub fn validate_schedule(sched: &SwapSchedule) -> Result<(), SimError> {
    #[derive(Clone, PartialEq)]
    enum Q {
        Unborn,
        Live(NodeId),
        Measured,
    }
    let mut qubits = vec![Q::Unborn; sched.qubits];
    let mut taken: BTreeSet<usize> = BTreeSet::new();
    let mut copies: BTreeSet<((NodeId, NodeId), u64)> = BTreeSet::new();
    for (index, ins) in sched.instructions.iter().enumerate() {
        let fail = |message: String| Err(SimError::ScheduleViolation { index, message });
        let live_at = |qubits: &[Q], q: QubitId, node: &NodeId| -> Result<(), String> {
            match qubits.get(q) {
                None => Err(format!("qubit q{q} out of range")),
                Some(Q::Unborn) => Err(format!("qubit q{q} used before creation")),
                Some(Q::Measured) => Err(format!("qubit q{q} reused after measurement")),
                Some(Q::Live(at)) if at != node => Err(format!("qubit q{q} is held by {at}, not {node}")),
                Some(Q::Live(_)) => Ok(()),
            }
        };
        match ins {
            Instruction::CreateBellPair { a, b, copy, qa, qb } => {
                if a == b {
                    return fail(format!("pair on self-loop {a}"));
                }
                if !copies.insert((edge_key(a, b), *copy)) {
                    return fail(format!("copy {copy} on {a}-{b} created twice"));
                }
                for q in [*qa, *qb] {
                    match qubits.get(q) {
                        None => return fail(format!("qubit q{q} out of range")),
                        Some(Q::Unborn) => {}
                        Some(_) => return fail(format!("qubit q{q} created twice")),
                    }
                }
                if qa == qb {
                    return fail(format!("pair uses q{qa} twice"));
                }
                qubits[*qa] = Q::Live(a.clone());
                qubits[*qb] = Q::Live(b.clone());
            }
            Instruction::BellMeasure { node, q1, q2, m1, m2 } => {
                if q1 == q2 {
                    return fail(format!("Bell measurement on q{q1} twice"));
                }
                for q in [*q1, *q2] {
                    if let Err(m) = live_at(&qubits, q, node) {
                        return fail(m);
                    }
                }
                for m in [*m1, *m2] {
                    if m >= sched.measurements || !taken.insert(m) {
                        return fail(format!("measurement slot m{m} invalid or reused"));
                    }
                }
                qubits[*q1] = Q::Measured;
                qubits[*q2] = Q::Measured;
            }
            Instruction::PauliCorrect { node, qubit, x_from, z_from } => {
                if let Err(m) = live_at(&qubits, *qubit, node) {
                    return fail(m);
                }
                if let Some(m) = x_from.iter().chain(z_from).find(|m| !taken.contains(m)) {
                    return fail(format!("correction depends on m{m} before it is measured"));
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn execute<R: Rng>(sched: &SwapSchedule, faults: &Faults, rng: &mut R) -> RunOutcome {
    let mut state = Tableau::new(sched.qubits);
    let mut record = vec![false; sched.measurements];
    let mut corrections = Vec::new();
    let (mut ci, mut mi) = (0usize, 0usize);
    for ins in &sched.instructions {
        match ins {
            Instruction::CreateBellPair { qa, qb, .. } => {
                state.h(*qa);
                state.cx(*qa, *qb);
                state.pauli(*qa, faults.on_create[ci]);
                ci += 1;
            }
            Instruction::BellMeasure { q1, q2, m1, m2, .. } => {
                let (p1, p2) = faults.on_measure[mi];
                mi += 1;
                state.pauli(*q1, p1);
                state.pauli(*q2, p2);
                state.cx(*q1, *q2);
                state.h(*q1);
                record[*m1] = state.measure(*q1, rng).0;
                record[*m2] = state.measure(*q2, rng).0;
            }
            Instruction::PauliCorrect { qubit, x_from, z_from, .. } => {
                let x = x_from.iter().fold(false, |acc, &m| acc ^ record[m]);
                let z = z_from.iter().fold(false, |acc, &m| acc ^ record[m]);
                if x {
                    state.pauli(*qubit, Pauli::X);
                }
                if z {
                    state.pauli(*qubit, Pauli::Z);
                }
                corrections.push((*qubit, Correction::from_bits(x, z)));
            }
        }
    }
    let pairs = sched
        .delivered_pairs()
        .into_iter()
        .map(|(sq, tq)| PairCheck {
            source_qubit: sq,
            sink_qubit: tq,
            xx: state.expectation(&[(sq, Pauli::X), (tq, Pauli::X)]),
            zz: state.expectation(&[(sq, Pauli::Z), (tq, Pauli::Z)]),
        })
        .collect();
    RunOutcome { state, record, corrections, pairs }
}

const TWO_QUBIT_PAULIS: usize = 16;

/// Block replacement probability per edge that the schedule uses.
pub(crate) fn block_replace_prob(sched: &SwapSchedule, noise: &NoiseModel) -> BTreeMap<(NodeId, NodeId), Prob> {
    sched
        .instructions
        .iter()
        .filter_map(|ins| match ins {
            Instruction::CreateBellPair { a, b, .. } => Some(edge_key(a, b)),
            _ => None,
        })
        .map(|key| {
            let delta = noise.pair_error_for(&key.0, &key.1);
            (key, delta)
        })
        .filter(|(_, delta)| !delta.is_zero())
        .collect()
}

fn sample_faults<R: Rng>(
    sched: &SwapSchedule,
    noise: &NoiseModel,
    replace: &BTreeMap<(NodeId, NodeId), f64>,
    rng: &mut R,
) -> Faults {
    let mut faults = Faults::none(sched);
    let p = noise.swap_depolarize_p.to_f64();
    let mut edge_hit: BTreeMap<(NodeId, NodeId), bool> = BTreeMap::new();
    let (mut ci, mut mi) = (0usize, 0usize);
    for ins in &sched.instructions {
        match ins {
            Instruction::CreateBellPair { a, b, .. } => {
                let key = edge_key(a, b);
                let q = replace.get(&key).copied().unwrap_or(0.0);
                let hit = *edge_hit.entry(key).or_insert_with(|| q > 0.0 && rng.gen::<f64>() < q);
                if hit {
                    faults.on_create[ci] = Pauli::ALL[rng.gen_range(0..4)];
                }
                ci += 1;
            }
            Instruction::BellMeasure { .. } => {
                if p > 0.0 && rng.gen::<f64>() < p {
                    let k = rng.gen_range(0..TWO_QUBIT_PAULIS);
                    faults.on_measure[mi] = (Pauli::ALL[k / 4], Pauli::ALL[k % 4]);
                }
                mi += 1;
            }
            Instruction::PauliCorrect { .. } => {}
        }
    }
    faults
}

fn replace_f64(sched: &SwapSchedule, noise: &NoiseModel) -> BTreeMap<(NodeId, NodeId), f64> {
    block_replace_prob(sched, noise).into_iter().map(|(k, q)| (k, q.to_f64())).collect()
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Executes the schedule once with noise sampled from `seed`.
pub fn run_schedule(sched: &SwapSchedule, noise: &NoiseModel, seed: u64) -> Result<RunOutcome, SimError> {
    validate_schedule(sched)?;
    noise.validate()?;
    let replace = replace_f64(sched, noise);
    let mut rng = trial_rng(seed, 0);
    let faults = sample_faults(sched, noise, &replace, &mut rng);
    Ok(execute(sched, &faults, &mut rng))
}

/// Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

pub const WILSON_Z: f64 = 1.96;

pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval { low: 0.0, high: 1.0 };
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    Interval { low, high }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairEstimate {
    pub source_qubit: QubitId,
    pub sink_qubit: QubitId,
    pub passes: u64,
    pub fidelity: f64,
    pub interval: Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelityEstimate {
    pub trials: u64,
    pub seed: u64,
    pub pairs: Vec<PairEstimate>,
    /// Trials in which every delivered pair passed.
    pub all_pass: u64,
    pub all_pass_fraction: f64,
    pub all_pass_interval: Interval,
}

/// Monte-Carlo estimate of Pr[pair passes the +XX, +ZZ check] per pair.
/// Trial `i` uses an independent stream derived from `(seed, i)`, so
/// results do not depend on thread scheduling.
pub fn fidelity_estimate(
    sched: &SwapSchedule,
    noise: &NoiseModel,
    trials: u64,
    seed: u64,
) -> Result<FidelityEstimate, SimError> {
    validate_schedule(sched)?;
    noise.validate()?;
    let trials = trials.max(1);
    let replace = replace_f64(sched, noise);
    let pairs = sched.delivered_pairs();
    let counts = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let faults = sample_faults(sched, noise, &replace, &mut rng);
            let out = execute(sched, &faults, &mut rng);
            let passes: Vec<u64> = out.pairs.iter().map(|p| p.is_ideal() as u64).collect();
            let all = out.all_ideal() as u64;
            (passes, all)
        })
        .reduce(
            || (vec![0u64; pairs.len()], 0u64),
            |(mut a, x), (b, y)| {
                for (l, r) in a.iter_mut().zip(b) {
                    *l += r;
                }
                (a, x + y)
            },
        );
    let (passes, all_pass) = counts;
    let pairs = pairs
        .iter()
        .zip(passes)
        .map(|(&(sq, tq), k)| PairEstimate {
            source_qubit: sq,
            sink_qubit: tq,
            passes: k,
            fidelity: k as f64 / trials as f64,
            interval: wilson_interval(k, trials, WILSON_Z),
        })
        .collect();
    Ok(FidelityEstimate {
        trials,
        seed,
        pairs,
        all_pass,
        all_pass_fraction: all_pass as f64 / trials as f64,
        all_pass_interval: wilson_interval(all_pass, trials, WILSON_Z),
    })
}
