//! Yield functions: ebits obtained from `m` uses of a generator.
//!
//! Used both for point-to-point generation on physical edges (`f_e(m)`) and
//! for distillation over a lower-level network (`ψ_ε(μ)`).

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Prob;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum YieldError {
    #[error("linear yield rate must be positive")]
    NonPositiveRate,
    #[error("linear yield rate {0} does not fit in 64-bit numerator/denominator")]
    RateTooLarge(String),
    #[error("yield table is empty")]
    EmptyTable,
    #[error("yield table uses must be strictly increasing")]
    TableNotIncreasing,
    #[error("yield table values must be non-decreasing")]
    TableNotMonotone,
    #[error("yield table must give psi(0) = 0")]
    TableNonZeroOrigin,
    #[error("no use count up to {max_uses:?} yields {needed} ebits")]
    Shortfall { needed: u64, max_uses: Option<u64> },
}

/// A monotone non-decreasing yield with `f(0) = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "YieldRepr", into = "YieldRepr")]
pub enum Yield {
    Identity,
    /// `⌊rate · m⌋`.
    Linear {
        rate: Prob,
    },
    /// Step function through `(uses, ebits)` points; between points the
    /// value of the last point at or below `m` applies.
    Table {
        points: Vec<(u64, u64)>,
    },
}

// Serde ignores `deny_unknown_fields` on unit variants of internally
// tagged enums, so the wire form uses an empty struct variant instead.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum YieldRepr {
    Identity {},
    Linear { rate: Prob },
    Table { points: Vec<(u64, u64)> },
}

impl From<YieldRepr> for Yield {
    fn from(r: YieldRepr) -> Self {
        match r {
            YieldRepr::Identity {} => Yield::Identity,
            YieldRepr::Linear { rate } => Yield::Linear { rate },
            YieldRepr::Table { points } => Yield::Table { points },
        }
    }
}

impl From<Yield> for YieldRepr {
    fn from(y: Yield) -> Self {
        match y {
            Yield::Identity => YieldRepr::Identity {},
            Yield::Linear { rate } => YieldRepr::Linear { rate },
            Yield::Table { points } => YieldRepr::Table { points },
        }
    }
}

impl Yield {
    pub fn linear(numer: i64, denom: i64) -> Self {
        Yield::Linear { rate: Prob::new(numer, denom) }
    }

    pub fn validate(&self) -> Result<(), YieldError> {
        match self {
            Yield::Identity => Ok(()),
            Yield::Linear { rate } => {
                if rate.0.is_zero() {
                    return Err(YieldError::NonPositiveRate);
                }
                rational_parts(rate)?;
                Ok(())
            }
            Yield::Table { points } => {
                let first = points.first().ok_or(YieldError::EmptyTable)?;
                if first.0 == 0 && first.1 != 0 {
                    return Err(YieldError::TableNonZeroOrigin);
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(YieldError::TableNotIncreasing);
                    }
                    if w[1].1 < w[0].1 {
                        return Err(YieldError::TableNotMonotone);
                    }
                }
                Ok(())
            }
        }
    }

    /// Ebits after `uses` uses.
    pub fn eval(&self, uses: u64) -> u64 {
        match self {
            Yield::Identity => uses,
            Yield::Linear { rate } => {
                let (n, d) = rational_parts(rate).expect("validated rate");
                let v = (uses as u128 * n as u128) / d as u128;
                v.min(u64::MAX as u128) as u64
            }
            Yield::Table { points } => {
                points.iter().take_while(|(m, _)| *m <= uses).last().map(|&(_, v)| v).unwrap_or(0)
            }
        }
    }

    /// Smallest `m <= max_uses` with `eval(m) >= needed`. When some `m`
    /// reaches `needed` exactly, the minimal one does too, by monotonicity.
    pub fn min_uses_for(&self, needed: u64, max_uses: Option<u64>) -> Result<u64, YieldError> {
        if needed == 0 {
            return Ok(0);
        }
        let shortfall = YieldError::Shortfall { needed, max_uses };
        let upper = match max_uses {
            Some(max) => {
                if self.eval(max) < needed {
                    return Err(shortfall);
                }
                max
            }
            None => {
                let mut hi = 1u64;
                while self.eval(hi) < needed {
                    hi = hi.checked_mul(2).ok_or(shortfall.clone())?;
                }
                hi
            }
        };
        // eval(lo) < needed <= eval(hi)
        let (mut lo, mut hi) = (0u64, upper);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.eval(mid) >= needed {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

fn rational_parts(rate: &Prob) -> Result<(u64, u64), YieldError> {
    let n = rate.0.numer().to_u64();
    let d = rate.0.denom().to_u64();
    match (n, d) {
        (Some(n), Some(d)) if n > 0 => Ok((n, d)),
        (Some(0), _) => Err(YieldError::NonPositiveRate),
        _ => Err(YieldError::RateTooLarge(rate.to_string())),
    }
}
