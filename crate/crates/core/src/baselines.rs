//! Classical FWER-controlling procedures for three hypotheses, plus the
//! optimal policy behind the same interface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::DensityModel;
use crate::dual::Multipliers;
use crate::error::{check_alpha, Error, Result};
use crate::policy::{decide, Decision, PValueTriple};

const K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "procedure", rename_all = "snake_case")]
pub enum Procedure {
    Bonferroni,
    Holm,
    Hochberg,
    /// Closed testing with Simes local tests.
    Hommel,
    /// Step-down with exact independent-null thresholds `1 − (1 − α)^{1/m}`.
    RomanoWolf,
    /// The solved policy `D^μ` for `density`.
    Optimal { density: DensityModel, mu: Multipliers },
}

impl Procedure {
    /// The five classical procedures.
    pub fn baselines() -> [Procedure; 5] {
        [Self::Bonferroni, Self::Holm, Self::Hochberg, Self::Hommel, Self::RomanoWolf]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Bonferroni => "bonferroni",
            Self::Holm => "holm",
            Self::Hochberg => "hochberg",
            Self::Hommel => "hommel",
            Self::RomanoWolf => "romano_wolf",
            Self::Optimal { .. } => "optimal",
        }
    }

    pub fn apply(&self, pvals: &PValueTriple, alpha: f64) -> Result<Decision> {
        apply_procedure(self, pvals, alpha)
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses the name of a classical procedure. `optimal` needs a solved
/// policy and cannot be built from its name alone.
impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "bonferroni" => Ok(Self::Bonferroni),
            "holm" => Ok(Self::Holm),
            "hochberg" => Ok(Self::Hochberg),
            "hommel" => Ok(Self::Hommel),
            "romano_wolf" | "rw" => Ok(Self::RomanoWolf),
            other => Err(Error::InvalidParameter(format!("unknown procedure '{other}'"))),
        }
    }
}

pub fn apply_procedure(procedure: &Procedure, pvals: &PValueTriple, alpha: f64) -> Result<Decision> {
    check_alpha(alpha)?;
    let p = pvals.values();
    let sorted = pvals.order().map(|i| p[i]);
    let reject = match procedure {
        Procedure::Optimal { density, mu } => return decide(density, mu, pvals),
        Procedure::Bonferroni => p.map(|x| x <= alpha / K as f64),
        Procedure::Holm => {
            let n = step_down(&sorted, |j| alpha / (K - j) as f64);
            threshold_reject(&p, &sorted, n)
        }
        Procedure::RomanoWolf => {
            let n = step_down(&sorted, |j| 1.0 - (1.0 - alpha).powf(1.0 / (K - j) as f64));
            threshold_reject(&p, &sorted, n)
        }
        Procedure::Hochberg => {
            let n = (0..K)
                .rev()
                .find(|&j| sorted[j] <= alpha / (K - j) as f64)
                .map_or(0, |j| j + 1);
            threshold_reject(&p, &sorted, n)
        }
        Procedure::Hommel => hommel(&p, alpha),
    };
    Ok(Decision::from_rejections(pvals, reject))
}

/// Number of leading sorted p-values rejected by a step-down with
/// per-step thresholds `c(j)`, `j = 0, 1, 2`.
fn step_down(sorted: &[f64; K], c: impl Fn(usize) -> f64) -> usize {
    (0..K).take_while(|&j| sorted[j] <= c(j)).count()
}

/// Rejects every hypothesis whose p-value is at most the `n`-th smallest.
fn threshold_reject(p: &[f64; K], sorted: &[f64; K], n: usize) -> [bool; K] {
    if n == 0 {
        return [false; K];
    }
    p.map(|x| x <= sorted[n - 1])
}

/// Simes test of the intersection of the hypotheses in `subset`.
pub fn simes_rejects(p: &[f64], alpha: f64) -> bool {
    let mut s = p.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    s.iter().enumerate().any(|(j, &x)| x <= (j + 1) as f64 * alpha / m)
}

fn hommel(p: &[f64; K], alpha: f64) -> [bool; K] {
    let subset_rejected: Vec<bool> = (1u8..8)
        .map(|mask| {
            let members: Vec<f64> = (0..K).filter(|i| mask >> i & 1 == 1).map(|i| p[i]).collect();
            simes_rejects(&members, alpha)
        })
        .collect();
    std::array::from_fn(|i| (1u8..8).filter(|mask| mask >> i & 1 == 1).all(|mask| subset_rejected[mask as usize - 1]))
}
