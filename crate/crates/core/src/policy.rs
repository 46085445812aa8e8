//! Applying a solved policy to observed p-values.
//!
//! The policy is defined on sorted triples; raw inputs are sorted with a
//! stable sort, decided, and the verdicts mapped back through the sort
//! permutation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{DensityModel, INTERIOR_OFFSET};
use crate::dual::{indicators, Multipliers};
use crate::error::{Error, Result};

/// Three p-values in original hypothesis order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct PValueTriple {
    p: [f64; 3],
}

impl PValueTriple {
    pub fn new(p: [f64; 3]) -> Result<Self> {
        for (index, &value) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidPValue { index, value });
            }
        }
        Ok(Self { p })
    }

    pub fn values(&self) -> [f64; 3] {
        self.p
    }

    /// Permutation that sorts the p-values ascending (stable).
    pub fn order(&self) -> [usize; 3] {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| self.p[a].total_cmp(&self.p[b]));
        idx
    }
}

impl TryFrom<[f64; 3]> for PValueTriple {
    type Error = Error;

    fn try_from(p: [f64; 3]) -> Result<Self> {
        Self::new(p)
    }
}

impl From<PValueTriple> for [f64; 3] {
    fn from(t: PValueTriple) -> Self {
        t.p
    }
}

/// Reject/accept verdicts for one triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    /// Verdicts in original input order.
    pub reject: [bool; 3],
    pub num_rejected: usize,
    /// p-values sorted ascending.
    pub sorted_p: [f64; 3],
    /// `order[r]` is the original index of the `r`-th smallest p-value.
    pub order: [usize; 3],
    /// Policy bits `(D₁, D₂, D₃)` on the sorted view.
    pub sorted_bits: [bool; 3],
    /// Set when a p-value was clamped into the density's evaluation range.
    pub clamped: bool,
}

impl Decision {
    /// Builds a decision from bits on the sorted view. Bits must be LR-ordered
    /// (`D₃ ≤ D₂ ≤ D₁`).
    pub fn from_sorted_bits(pvals: &PValueTriple, sorted_bits: [bool; 3], clamped: bool) -> Self {
        debug_assert!(sorted_bits[0] >= sorted_bits[1] && sorted_bits[1] >= sorted_bits[2]);
        let order = pvals.order();
        let mut reject = [false; 3];
        for (r, &i) in order.iter().enumerate() {
            reject[i] = sorted_bits[r];
        }
        Self {
            reject,
            num_rejected: sorted_bits.iter().filter(|&&b| b).count(),
            sorted_p: order.map(|i| pvals.p[i]),
            order,
            sorted_bits,
            clamped,
        }
    }

    /// Builds a decision from verdicts in original order. Rejections must
    /// form a prefix of the sorted order (ties may be rejected in any order).
    pub fn from_rejections(pvals: &PValueTriple, reject: [bool; 3]) -> Self {
        let n = reject.iter().filter(|&&b| b).count();
        let bits = std::array::from_fn(|r| r < n);
        let d = Self::from_sorted_bits(pvals, bits, false);
        debug_assert!(
            (0..3).all(|i| !reject[i] || d.sorted_p[n - 1] >= pvals.p[i]),
            "rejections {reject:?} are not LR-ordered for {pvals:?}"
        );
        Self { reject, ..d }
    }
}

/// Applies `D^μ` to one triple.
pub fn decide(model: &DensityModel, mu: &Multipliers, pvals: &PValueTriple) -> Result<Decision> {
    let order = pvals.order();
    let mut u = order.map(|i| pvals.p[i]);
    let mut clamped = false;
    if model.is_unbounded_at_zero() {
        for x in u.iter_mut() {
            let c = x.clamp(INTERIOR_OFFSET, 1.0 - INTERIOR_OFFSET);
            clamped |= c != *x;
            *x = c;
        }
    }
    let bits = indicators(model, mu, u)?.policy();
    Ok(Decision::from_sorted_bits(pvals, bits, clamped))
}

/// Decides every row independently; a bad row yields an error in its slot.
pub fn decide_batch(model: &DensityModel, mu: &Multipliers, rows: &[[f64; 3]]) -> Vec<Result<Decision>> {
    rows.par_iter()
        .map(|row| decide(model, mu, &PValueTriple::new(*row)?))
        .collect()
}
