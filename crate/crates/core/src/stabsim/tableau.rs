//! Aaronson–Gottesman stabilizer tableau with destabilizers.
//!
//! Rows `0..n` are destabilizers, `n..2n` stabilizers and row `2n` is
//! scratch space. Bits are packed 64 qubits per word; the phase of each row
//! is a single sign bit. A row with both `x` and `z` set on a qubit denotes
//! `Y` there.

use std::fmt;

use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tableau {
    n: usize,
    words: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    sign: Vec<bool>,
}

#[inline]
fn bit(q: usize) -> (usize, u64) {
    (q / 64, 1u64 << (q % 64))
}

/// Phase exponent (mod 4, as i64) contributed by multiplying Pauli
/// `(x1, z1)` onto `(x2, z2)` on one qubit.
#[inline]
fn g(x1: bool, z1: bool, x2: bool, z2: bool) -> i64 {
    match (x1, z1) {
        (false, false) => 0,
        (true, true) => z2 as i64 - x2 as i64,
        (true, false) => z2 as i64 * (2 * x2 as i64 - 1),
        (false, true) => x2 as i64 * (1 - 2 * z2 as i64),
    }
}

impl Tableau {
    /// |0…0⟩ on `n` qubits.
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        let rows = 2 * n + 1;
        let mut t = Tableau { n, words, x: vec![0; rows * words], z: vec![0; rows * words], sign: vec![false; rows] };
        for q in 0..n {
            let (w, m) = bit(q);
            t.x[q * words + w] |= m;
            t.z[(q + n) * words + w] |= m;
        }
        t
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    #[inline]
    fn get_x(&self, row: usize, q: usize) -> bool {
        let (w, m) = bit(q);
        self.x[row * self.words + w] & m != 0
    }

    #[inline]
    fn get_z(&self, row: usize, q: usize) -> bool {
        let (w, m) = bit(q);
        self.z[row * self.words + w] & m != 0
    }

    pub fn h(&mut self, q: usize) {
        let (w, m) = bit(q);
        for row in 0..2 * self.n {
            let i = row * self.words + w;
            let (xb, zb) = (self.x[i] & m != 0, self.z[i] & m != 0);
            self.sign[row] ^= xb && zb;
            if xb != zb {
                self.x[i] ^= m;
                self.z[i] ^= m;
            }
        }
    }

    pub fn s(&mut self, q: usize) {
        let (w, m) = bit(q);
        for row in 0..2 * self.n {
            let i = row * self.words + w;
            let (xb, zb) = (self.x[i] & m != 0, self.z[i] & m != 0);
            self.sign[row] ^= xb && zb;
            if xb {
                self.z[i] ^= m;
            }
        }
    }

    pub fn cx(&mut self, control: usize, target: usize) {
        assert_ne!(control, target, "CNOT needs distinct qubits");
        let (wc, mc) = bit(control);
        let (wt, mt) = bit(target);
        for row in 0..2 * self.n {
            let base = row * self.words;
            let xc = self.x[base + wc] & mc != 0;
            let zc = self.z[base + wc] & mc != 0;
            let xt = self.x[base + wt] & mt != 0;
            let zt = self.z[base + wt] & mt != 0;
            self.sign[row] ^= xc && zt && (xt == zc);
            if xc {
                self.x[base + wt] ^= mt;
            }
            if zt {
                self.z[base + wc] ^= mc;
            }
        }
    }

    /// Applies a Pauli gate (conjugation only flips signs).
    pub fn pauli(&mut self, q: usize, p: Pauli) {
        let (px, pz) = p.bits();
        for row in 0..2 * self.n {
            // P anticommutes with the row's Pauli on q iff x·pz + z·px is odd.
            let flip = (self.get_x(row, q) && pz) ^ (self.get_z(row, q) && px);
            self.sign[row] ^= flip;
        }
    }

    /// Row `h` ← row `i` · row `h`, with the phase tracked exactly.
    fn rowsum(&mut self, h: usize, i: usize) {
        let words = self.words;
        let mut phase: i64 = 2 * self.sign[h] as i64 + 2 * self.sign[i] as i64;
        for w in 0..words {
            let (xi, zi) = (self.x[i * words + w], self.z[i * words + w]);
            let (xh, zh) = (self.x[h * words + w], self.z[h * words + w]);
            let mut active = xi | zi;
            while active != 0 {
                let b = active.trailing_zeros();
                active &= active - 1;
                let m = 1u64 << b;
                phase += g(xi & m != 0, zi & m != 0, xh & m != 0, zh & m != 0);
            }
            self.x[h * words + w] = xh ^ xi;
            self.z[h * words + w] = zh ^ zi;
        }
        let phase = phase.rem_euclid(4);
        debug_assert!(phase == 0 || phase == 2, "rowsum of commuting rows");
        self.sign[h] = phase == 2;
    }

    fn clear_row(&mut self, row: usize) {
        let base = row * self.words;
        self.x[base..base + self.words].fill(0);
        self.z[base..base + self.words].fill(0);
        self.sign[row] = false;
    }

    fn copy_row(&mut self, dst: usize, src: usize) {
        let w = self.words;
        self.x.copy_within(src * w..(src + 1) * w, dst * w);
        self.z.copy_within(src * w..(src + 1) * w, dst * w);
        self.sign[dst] = self.sign[src];
    }

    /// Z-basis measurement. Returns `(outcome, deterministic)`, with
    /// `outcome == true` meaning |1⟩.
    pub fn measure<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> (bool, bool) {
        let n = self.n;
        if let Some(p) = (n..2 * n).find(|&row| self.get_x(row, q)) {
            for row in 0..2 * n {
                if row != p && self.get_x(row, q) {
                    self.rowsum(row, p);
                }
            }
            self.copy_row(p - n, p);
            self.clear_row(p);
            let (w, m) = bit(q);
            self.z[p * self.words + w] |= m;
            let outcome: bool = rng.gen();
            self.sign[p] = outcome;
            (outcome, false)
        } else {
            let scratch = 2 * n;
            self.clear_row(scratch);
            for row in 0..n {
                if self.get_x(row, q) {
                    self.rowsum(scratch, row + n);
                }
            }
            (self.sign[scratch], true)
        }
    }

    /// Expectation of a Pauli product given as `(qubit, pauli)` factors:
    /// `Some(true)` for +1, `Some(false)` for −1, `None` when the outcome
    /// would be random.
    pub fn expectation(&mut self, factors: &[(usize, Pauli)]) -> Option<bool> {
        let n = self.n;
        let anticommutes = |t: &Tableau, row: usize| {
            factors.iter().fold(false, |acc, &(q, p)| {
                let (px, pz) = p.bits();
                acc ^ ((t.get_x(row, q) && pz) ^ (t.get_z(row, q) && px))
            })
        };
        if (n..2 * n).any(|row| anticommutes(self, row)) {
            return None;
        }
        let scratch = 2 * n;
        self.clear_row(scratch);
        for row in 0..n {
            if anticommutes(self, row) {
                self.rowsum(scratch, row + n);
            }
        }
        debug_assert!(factors.iter().all(|&(q, p)| {
            let (px, pz) = p.bits();
            self.get_x(scratch, q) == px && self.get_z(scratch, q) == pz
        }));
        Some(!self.sign[scratch])
    }

    /// Stabilizer generators as strings like `+XXI`.
    pub fn stabilizers(&self) -> Vec<String> {
        (self.n..2 * self.n).map(|row| self.row_string(row)).collect()
    }

    fn row_string(&self, row: usize) -> String {
        let mut s = String::with_capacity(self.n + 1);
        s.push(if self.sign[row] { '-' } else { '+' });
        for q in 0..self.n {
            s.push(match (self.get_x(row, q), self.get_z(row, q)) {
                (false, false) => 'I',
                (true, false) => 'X',
                (true, true) => 'Y',
                (false, true) => 'Z',
            });
        }
        s
    }
}

impl fmt::Display for Tableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.stabilizers() {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}
