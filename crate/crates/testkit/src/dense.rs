//! Dense density-matrix reference for swap schedules.
//!
//! Gates are applied as explicit matrices, noise as explicit Kraus
//! mixtures, and every measurement outcome is kept as a separate
//! unnormalized branch. Meant for a handful of qubits.

use std::collections::BTreeMap;

use num_complex::Complex64;
use qagg_core::netgraph::NodeId;
use qagg_core::pathplan::{Instruction, SwapSchedule};

pub type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Qubit 0 is the most significant bit of the basis index.
#[derive(Clone, Debug)]
pub struct Density {
    pub n: usize,
    pub dim: usize,
    pub m: Vec<C>,
}

pub type Mat2 = [[C; 2]; 2];

pub fn pauli(k: u8) -> Mat2 {
    match k {
        0 => [[ONE, ZERO], [ZERO, ONE]],
        1 => [[ZERO, ONE], [ONE, ZERO]],
        2 => [[ZERO, -I], [I, ZERO]],
        3 => [[ONE, ZERO], [ZERO, -ONE]],
        _ => unreachable!(),
    }
}

pub fn hadamard() -> Mat2 {
    let h = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

impl Density {
    pub fn zero_state(n: usize) -> Self {
        let dim = 1 << n;
        let mut m = vec![ZERO; dim * dim];
        m[0] = ONE;
        Density { n, dim, m }
    }

    fn bit(&self, q: usize) -> usize {
        1 << (self.n - 1 - q)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[i * self.dim + i].re).sum()
    }

    /// ρ ← U ρ U† for a one-qubit `u` on `q`.
    pub fn apply1(&mut self, q: usize, u: &Mat2) {
        let b = self.bit(q);
        let d = self.dim;
        // rows
        for col in 0..d {
            for r0 in (0..d).filter(|r| r & b == 0) {
                let r1 = r0 | b;
                let (x0, x1) = (self.m[r0 * d + col], self.m[r1 * d + col]);
                self.m[r0 * d + col] = u[0][0] * x0 + u[0][1] * x1;
                self.m[r1 * d + col] = u[1][0] * x0 + u[1][1] * x1;
            }
        }
        // columns, with U†
        for row in 0..d {
            for c0 in (0..d).filter(|c| c & b == 0) {
                let c1 = c0 | b;
                let (x0, x1) = (self.m[row * d + c0], self.m[row * d + c1]);
                self.m[row * d + c0] = x0 * u[0][0].conj() + x1 * u[0][1].conj();
                self.m[row * d + c1] = x0 * u[1][0].conj() + x1 * u[1][1].conj();
            }
        }
    }

    pub fn cx(&mut self, control: usize, target: usize) {
        let (bc, bt) = (self.bit(control), self.bit(target));
        let perm = |i: usize| if i & bc != 0 { i ^ bt } else { i };
        let d = self.dim;
        let mut out = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                out[perm(r) * d + perm(c)] = self.m[r * d + c];
            }
        }
        self.m = out;
    }

    fn add_scaled(&mut self, other: &Density, w: f64) {
        for (a, b) in self.m.iter_mut().zip(&other.m) {
            *a += b * w;
        }
    }

    fn scale(&mut self, w: f64) {
        for a in &mut self.m {
            *a *= w;
        }
    }

    /// ρ ← (1 − p) ρ + p · mean over Paulis `P` of P ρ P, with the Paulis
    /// ranging over all products on `qubits`.
    pub fn pauli_mix(&mut self, qubits: &[usize], p: f64) {
        if p == 0.0 {
            return;
        }
        let count = 4usize.pow(qubits.len() as u32);
        let mut acc = self.clone();
        acc.scale(1.0 - p);
        for code in 0..count {
            let mut branch = self.clone();
            for (i, &q) in qubits.iter().enumerate() {
                let k = (code >> (2 * i)) & 3;
                if k != 0 {
                    branch.apply1(q, &pauli(k as u8));
                }
            }
            acc.add_scaled(&branch, p / count as f64);
        }
        *self = acc;
    }

    /// Unnormalized post-measurement state for Z outcome `outcome` on `q`.
    pub fn project(&self, q: usize, outcome: bool) -> Density {
        let b = self.bit(q);
        let keep = |i: usize| (i & b != 0) == outcome;
        let d = self.dim;
        let mut m = self.m.clone();
        for r in 0..d {
            for c in 0..d {
                if !(keep(r) && keep(c)) {
                    m[r * d + c] = ZERO;
                }
            }
        }
        Density { n: self.n, dim: d, m }
    }

    /// Reduced state on `keep` (in that order), tracing out all others.
    pub fn reduce(&self, keep: &[usize]) -> Vec<C> {
        let k = keep.len();
        let dk = 1 << k;
        let mut out = vec![ZERO; dk * dk];
        let sub = |i: usize| keep.iter().fold(0, |acc, &q| acc << 1 | (i & self.bit(q) != 0) as usize);
        let rest_mask: usize = (0..self.n).filter(|q| !keep.contains(q)).map(|q| self.bit(q)).sum();
        for r in 0..self.dim {
            for c in 0..self.dim {
                if r & rest_mask == c & rest_mask {
                    out[sub(r) * dk + sub(c)] += self.m[r * self.dim + c];
                }
            }
        }
        out
    }
}

/// Noise applied by the reference execution; same semantics as the
/// simulator's model.
#[derive(Clone, Debug, Default)]
pub struct DenseNoise {
    pub swap_p: f64,
    pub pair_delta: BTreeMap<(NodeId, NodeId), f64>,
}

fn key(a: &NodeId, b: &NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

/// Runs the schedule on the full density matrix, branching on every
/// measurement, and returns the averaged reduced state of the qubits in
/// `keep` after all corrections.
///
/// The edge-block channel is expanded explicitly: each subset of noisy
/// edges is "hit" with its product probability, and every pair on a hit
/// edge is fully depolarized on its first qubit when created.
pub fn run_dense(sched: &SwapSchedule, noise: &DenseNoise, keep: &[usize]) -> Vec<C> {
    let used: Vec<(NodeId, NodeId)> = {
        let mut v: Vec<_> = sched
            .instructions
            .iter()
            .filter_map(|ins| match ins {
                Instruction::CreateBellPair { a, b, .. } => Some(key(a, b)),
                _ => None,
            })
            .collect();
        v.sort();
        v.dedup();
        v.retain(|k| noise.pair_delta.get(k).copied().unwrap_or(0.0) > 0.0);
        v
    };
    let dk = 1 << keep.len();
    let mut out = vec![ZERO; dk * dk];
    for subset in 0u32..(1 << used.len()) {
        let mut weight = 1.0;
        let mut hit = Vec::new();
        for (i, k) in used.iter().enumerate() {
            let d = noise.pair_delta[k];
            if subset >> i & 1 == 1 {
                weight *= d;
                hit.push(k.clone());
            } else {
                weight *= 1.0 - d;
            }
        }
        if weight == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(run_branch(sched, noise.swap_p, &hit, keep)) {
            *o += v * weight;
        }
    }
    out
}

fn run_branch(sched: &SwapSchedule, swap_p: f64, hit: &[(NodeId, NodeId)], keep: &[usize]) -> Vec<C> {
    let mut branches: Vec<(Vec<bool>, Density)> =
        vec![(vec![false; sched.measurements], Density::zero_state(sched.qubits))];
    for ins in &sched.instructions {
        let mut next = Vec::with_capacity(branches.len());
        for (record, mut rho) in branches {
            match ins {
                Instruction::CreateBellPair { a, b, qa, qb, .. } => {
                    rho.apply1(*qa, &hadamard());
                    rho.cx(*qa, *qb);
                    if hit.contains(&key(a, b)) {
                        rho.pauli_mix(&[*qa], 1.0);
                    }
                    next.push((record, rho));
                }
                Instruction::BellMeasure { q1, q2, m1, m2, .. } => {
                    rho.pauli_mix(&[*q1, *q2], swap_p);
                    rho.cx(*q1, *q2);
                    rho.apply1(*q1, &hadamard());
                    for o1 in [false, true] {
                        let r1 = rho.project(*q1, o1);
                        for o2 in [false, true] {
                            let r2 = r1.project(*q2, o2);
                            if r2.trace() < 1e-15 {
                                continue;
                            }
                            let mut rec = record.clone();
                            rec[*m1] = o1;
                            rec[*m2] = o2;
                            next.push((rec, r2));
                        }
                    }
                }
                Instruction::PauliCorrect { qubit, x_from, z_from, .. } => {
                    let x = x_from.iter().fold(false, |acc, &m| acc ^ record[m]);
                    let z = z_from.iter().fold(false, |acc, &m| acc ^ record[m]);
                    if x {
                        rho.apply1(*qubit, &pauli(1));
                    }
                    if z {
                        rho.apply1(*qubit, &pauli(3));
                    }
                    next.push((record, rho));
                }
            }
        }
        branches = next;
    }

    let dk = 1 << keep.len();
    let mut out = vec![ZERO; dk * dk];
    for (_, rho) in &branches {
        for (o, v) in out.iter_mut().zip(rho.reduce(keep)) {
            *o += v;
        }
    }
    out
}

/// Matrix of `rho` (on `2F` qubits ordered s₁ t₁ s₂ t₂ …) in the product
/// Bell basis. Index `k` of each pair encodes `(x_flip, z_flip)` as
/// `x + 2z`, with 0 being |Φ+⟩.
pub fn bell_basis(rho: &[C], pairs: usize) -> Vec<C> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // columns: Φ+, Ψ+ (X flip), Φ− (Z flip), Ψ− (both); components |00>,|01>,|10>,|11>
    let one: [[C; 4]; 4] = [
        [C::new(s, 0.0), ZERO, ZERO, C::new(s, 0.0)],
        [ZERO, C::new(s, 0.0), C::new(s, 0.0), ZERO],
        [C::new(s, 0.0), ZERO, ZERO, C::new(-s, 0.0)],
        [ZERO, C::new(s, 0.0), C::new(-s, 0.0), ZERO],
    ];
    let d = 1usize << (2 * pairs);
    // basis vector for multi-index
    let vec_of = |label: usize| -> Vec<C> {
        let mut v = vec![ONE];
        for k in 0..pairs {
            let b = (label >> (2 * (pairs - 1 - k))) & 3;
            let mut w = Vec::with_capacity(v.len() * 4);
            for &x in &v {
                for &y in &one[b] {
                    w.push(x * y);
                }
            }
            v = w;
        }
        v
    };
    let basis: Vec<Vec<C>> = (0..d).map(vec_of).collect();
    let mut out = vec![ZERO; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = ZERO;
            for r in 0..d {
                if basis[i][r] == ZERO {
                    continue;
                }
                for c in 0..d {
                    acc += basis[i][r].conj() * rho[r * d + c] * basis[j][c];
                }
            }
            out[i * d + j] = acc;
        }
    }
    out
}

/// Result of the dense reference run.
#[derive(Clone, Debug)]
pub struct DenseReport {
    /// ⟨Φ+^{⊗F}|ρ|Φ+^{⊗F}⟩.
    pub fidelity: f64,
    /// Largest off-diagonal magnitude in the Bell basis.
    pub off_diagonal: f64,
    /// Per-pair marginal fidelities.
    pub pair_fidelity: Vec<f64>,
}

impl DenseReport {
    /// Trace distance from `Φ+^{⊗F}`, valid when the state is
    /// Bell-diagonal (`off_diagonal ≈ 0`).
    pub fn distance(&self) -> f64 {
        1.0 - self.fidelity
    }
}

/// Dense reference for the delivered pairs `pairs` (source qubit, sink
/// qubit).
pub fn delivered_report(sched: &SwapSchedule, noise: &DenseNoise, pairs: &[(usize, usize)]) -> DenseReport {
    let keep: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let rho = run_dense(sched, noise, &keep);
    let bell = bell_basis(&rho, pairs.len());
    let d = 1usize << (2 * pairs.len());
    let mut off = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                off = off.max(bell[i * d + j].norm());
            }
        }
    }
    let pair_fidelity = (0..pairs.len())
        .map(|k| {
            let shift = 2 * (pairs.len() - 1 - k);
            (0..d).filter(|i| (i >> shift) & 3 == 0).map(|i| bell[i * d + i].re).sum()
        })
        .collect();
    DenseReport { fidelity: bell[0].re, off_diagonal: off, pair_fidelity }
}
