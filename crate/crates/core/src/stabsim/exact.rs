//! Exact output statistics by Pauli-frame propagation.
//!
//! Every fault is Pauli and every step Clifford with Pauli feed-forward, so
//! each delivered pair ends in a Bell state whose frame (bit `2k` for an X
//! flip, bit `2k+1` for a Z flip of pair `k`) is the XOR of the frames
//! caused by the individual faults. The output is therefore Bell-diagonal
//! and its distribution is an exact convolution of per-fault
//! distributions over frame masks. The trace distance to `Φ^{⊗F}` is
//! `1 − Pr[mask = 0]`.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tableau::Pauli;
use super::{block_replace_prob, edge_key, execute, validate_schedule, Faults, NoiseModel, SimError};
use crate::pathplan::{Instruction, SwapSchedule};
use crate::rational::Prob;

pub const EXACT_QUBIT_LIMIT: usize = 12;

type Dist = BTreeMap<u64, BigRational>;

fn frame_mask(sched: &SwapSchedule, faults: &Faults) -> u64 {
    // Frames do not depend on measurement outcomes, so any rng will do.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = execute(sched, faults, &mut rng);
    out.pairs.iter().enumerate().fold(0, |mask, (k, pair)| {
        let (x, z) = pair.frame().expect("delivered pairs are Bell states");
        mask | (x as u64) << (2 * k) | (z as u64) << (2 * k + 1)
    })
}

/// Frame masks for X and Z faults at every fault location.
struct Contributions {
    create: Vec<(u64, u64)>,
    measure: Vec<[(u64, u64); 2]>,
}

impl Contributions {
    fn of(sched: &SwapSchedule) -> Self {
        let base = Faults::none(sched);
        let with = |f: &dyn Fn(&mut Faults)| {
            let mut faults = base.clone();
            f(&mut faults);
            frame_mask(sched, &faults)
        };
        let create = (0..sched.create_count())
            .map(|i| (with(&|f| f.on_create[i] = Pauli::X), with(&|f| f.on_create[i] = Pauli::Z)))
            .collect();
        let measure = (0..sched.measure_count())
            .map(|j| {
                [
                    (with(&|f| f.on_measure[j].0 = Pauli::X), with(&|f| f.on_measure[j].0 = Pauli::Z)),
                    (with(&|f| f.on_measure[j].1 = Pauli::X), with(&|f| f.on_measure[j].1 = Pauli::Z)),
                ]
            })
            .collect();
        Contributions { create, measure }
    }
}

fn pauli_mask(p: Pauli, (x, z): (u64, u64)) -> u64 {
    let (px, pz) = p.bits();
    (if px { x } else { 0 }) ^ (if pz { z } else { 0 })
}

fn convolve(a: &Dist, b: &Dist) -> Dist {
    let mut out = Dist::new();
    for (ma, wa) in a {
        for (mb, wb) in b {
            *out.entry(ma ^ mb).or_insert_with(BigRational::zero) += wa * wb;
        }
    }
    out.retain(|_, w| !w.is_zero());
    out
}

fn point(mask: u64) -> Dist {
    Dist::from([(mask, BigRational::one())])
}

/// With probability `q`, draw from `hit`; otherwise no frame change.
fn mixture(q: &BigRational, hit: Dist) -> Dist {
    let mut out = Dist::from([(0, BigRational::one() - q)]);
    for (m, w) in hit {
        *out.entry(m).or_insert_with(BigRational::zero) += q * w;
    }
    out.retain(|_, w| !w.is_zero());
    out
}

fn uniform(masks: impl IntoIterator<Item = u64>) -> Dist {
    let masks: Vec<u64> = masks.into_iter().collect();
    let w = BigRational::new(1.into(), (masks.len() as i64).into());
    let mut out = Dist::new();
    for m in masks {
        *out.entry(m).or_insert_with(BigRational::zero) += &w;
    }
    out
}

/// Exact distribution of the delivered pairs' joint Bell frame.
pub fn frame_distribution(sched: &SwapSchedule, noise: &NoiseModel) -> Result<BTreeMap<u64, Prob>, SimError> {
    validate_schedule(sched)?;
    noise.validate()?;
    if sched.qubits > EXACT_QUBIT_LIMIT {
        return Err(SimError::TooLarge { qubits: sched.qubits, limit: EXACT_QUBIT_LIMIT });
    }
    let contrib = Contributions::of(sched);
    let mut dist = point(0);

    let p = &noise.swap_depolarize_p.0;
    if !p.is_zero() {
        for [c1, c2] in &contrib.measure {
            let hit = uniform(
                Pauli::ALL
                    .iter()
                    .flat_map(|&a| Pauli::ALL.iter().map(move |&b| pauli_mask(a, *c1) ^ pauli_mask(b, *c2))),
            );
            dist = convolve(&dist, &mixture(p, hit));
        }
    }

    let mut blocks: BTreeMap<_, Vec<usize>> = BTreeMap::new();
    let creates = sched.instructions.iter().filter_map(|ins| match ins {
        Instruction::CreateBellPair { a, b, .. } => Some(edge_key(a, b)),
        _ => None,
    });
    for (i, key) in creates.enumerate() {
        blocks.entry(key).or_default().push(i);
    }
    for (key, q) in block_replace_prob(sched, noise) {
        let block = blocks[&key]
            .iter()
            .map(|&i| uniform(Pauli::ALL.iter().map(|&a| pauli_mask(a, contrib.create[i]))))
            .fold(point(0), |acc, d| convolve(&acc, &d));
        dist = convolve(&dist, &mixture(&q.0, block));
    }

    Ok(dist.into_iter().map(|(m, w)| (m, Prob(w))).collect())
}

/// `½‖ρ_out − Φ^{⊗F}‖₁` under the full noise model.
pub fn delivered_distance_exact(sched: &SwapSchedule, noise: &NoiseModel) -> Result<Prob, SimError> {
    let dist = frame_distribution(sched, noise)?;
    let ideal = dist.get(&0).map(|p| p.0.clone()).unwrap_or_else(BigRational::zero);
    Ok(Prob(BigRational::one() - ideal))
}

/// `ε`: distance between the noisy and the ideal swap protocol applied to
/// perfect input pairs. Pair-generation errors are excluded.
pub fn epsilon_exact(sched: &SwapSchedule, noise: &NoiseModel) -> Result<Prob, SimError> {
    delivered_distance_exact(sched, &noise.without_pair_errors())
}

/// `ε` for per-swap depolarizing noise `p`: exact when the schedule fits
/// the exact regime, otherwise the sub-additive bound `#swaps · 15p/16`
/// capped at 1. Returns `(ε, exact)`.
pub fn epsilon_or_bound(sched: &SwapSchedule, p: &Prob) -> Result<(Prob, bool), SimError> {
    if sched.qubits <= EXACT_QUBIT_LIMIT {
        return Ok((epsilon_exact(sched, &NoiseModel::swap_only(p.clone()))?, true));
    }
    validate_schedule(sched)?;
    NoiseModel::swap_only(p.clone()).validate()?;
    let swaps = BigRational::from_integer((sched.measure_count() as i64).into());
    let bound = swaps * BigRational::new(15.into(), 16.into()) * &p.0;
    Ok((Prob(bound.min(BigRational::one())), false))
}

/// Exact probability that each delivered pair, on its own, is |Φ+⟩.
pub fn pair_fidelity_exact(sched: &SwapSchedule, noise: &NoiseModel) -> Result<Vec<Prob>, SimError> {
    let dist = frame_distribution(sched, noise)?;
    Ok((0..sched.delivered_pairs().len())
        .map(|k| {
            let bits = 0b11u64 << (2 * k);
            dist.iter().filter(|(m, _)| *m & bits == 0).map(|(_, w)| w).sum()
        })
        .collect())
}
