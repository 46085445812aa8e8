//! Quadrature over the ordered simplex `Q = {0 ≤ u₁ ≤ u₂ ≤ u₃ ≤ 1}`.
//!
//! The grid backend splits each axis of the unit cube into `n` cells with
//! edges `(i/n)^q`, enumerates sorted index triples `i ≤ j ≤ k`, and weights
//! each cell by its exact intersection volume with `Q` (full volume off the
//! diagonal, one half for a single tie, one sixth for a triple tie). With
//! grading `q = 1` this is the plain sorted-triple midpoint rule; `q > 1`
//! concentrates cells near zero where the alternative densities are steep.
//! The weights always sum to exactly `1/6` and are non-negative, so the rule
//! is monotone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes per parallel work unit. Fixed so the reduction order never depends
/// on the number of workers.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationMethod {
    #[default]
    Grid,
    MonteCarlo,
}

/// Quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationConfig {
    pub method: IntegrationMethod,
    /// Cells per axis for `Grid`, total samples for `MonteCarlo`.
    pub n: usize,
    /// Seed of the `MonteCarlo` sampler.
    pub seed: u64,
    /// Exponent `q` of the graded axis edges `(i/n)^q` (`Grid` only).
    pub grading: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self::grid(64)
    }
}

impl IntegrationConfig {
    pub const DEFAULT_GRADING: f64 = 3.0;

    pub fn grid(n: usize) -> Self {
        Self {
            method: IntegrationMethod::Grid,
            n,
            seed: 0,
            grading: Self::DEFAULT_GRADING,
        }
    }

    pub fn monte_carlo(n: usize, seed: u64) -> Self {
        Self {
            method: IntegrationMethod::MonteCarlo,
            n,
            seed,
            grading: Self::DEFAULT_GRADING,
        }
    }

    pub fn with_grading(mut self, grading: f64) -> Self {
        self.grading = grading;
        self
    }

    /// Same scheme at twice the resolution.
    pub fn doubled(self) -> Self {
        Self { n: self.n * 2, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            IntegrationMethod::Grid if self.n < 8 => Err(Error::InvalidParameter(format!(
                "grid integration needs n >= 8, got {}",
                self.n
            ))),
            IntegrationMethod::MonteCarlo if self.n < 1000 => Err(Error::InvalidParameter(format!(
                "Monte Carlo integration needs n >= 1000, got {}",
                self.n
            ))),
            _ if !(self.grading >= 1.0 && self.grading.is_finite()) => Err(Error::InvalidParameter(
                format!("grading must be a finite number >= 1, got {}", self.grading),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    /// Half the grid-refinement difference (`Grid`) or the standard error (`MonteCarlo`).
    pub error_estimate: f64,
}

/// One quadrature node: a point of `Q` with its weight. For grid nodes the
/// point is the cell midpoint and `cell` records the per-axis cell indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub u: [f64; 3],
    pub weight: f64,
    pub cell: Option<[u32; 3]>,
}

/// A materialized node set for one [`IntegrationConfig`].
#[derive(Debug, Clone)]
pub struct SimplexRule {
    nodes: Vec<Node>,
    /// Per-axis cell edges (`Grid` only, empty otherwise).
    edges: Vec<f64>,
}

impl SimplexRule {
    pub fn new(config: &IntegrationConfig) -> Result<Self> {
        config.validate()?;
        Ok(match config.method {
            IntegrationMethod::Grid => Self::grid(config.n, config.grading),
            IntegrationMethod::MonteCarlo => Self::monte_carlo(config.n, config.seed),
        })
    }

    fn grid(n: usize, grading: f64) -> Self {
        let edges: Vec<f64> = (0..=n).map(|i| (i as f64 / n as f64).powf(grading)).collect();
        let width: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
        let mid: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mut nodes = Vec::with_capacity(n * (n + 1) * (n + 2) / 6);
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let tie = if i == k {
                        1.0 / 6.0
                    } else if i == j || j == k {
                        0.5
                    } else {
                        1.0
                    };
                    nodes.push(Node {
                        u: [mid[i], mid[j], mid[k]],
                        weight: tie * width[i] * width[j] * width[k],
                        cell: Some([i as u32, j as u32, k as u32]),
                    });
                }
            }
        }
        Self { nodes, edges }
    }

    fn monte_carlo(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weight = 1.0 / (6.0 * n as f64);
        let nodes = (0..n)
            .map(|_| {
                let mut u: [f64; 3] = [rng.random(), rng.random(), rng.random()];
                u.sort_by(f64::total_cmp);
                Node { u, weight, cell: None }
            })
            .collect();
        Self { nodes, edges: Vec::new() }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Per-axis cell edges of a grid rule.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn is_grid(&self) -> bool {
        !self.edges.is_empty()
    }

    /// `Σ weight · f(node)` with a deterministic compensated reduction.
    pub fn weighted_sum<F>(&self, f: F) -> f64
    where
        F: Fn(&Node) -> f64 + Sync,
    {
        parallel_sum(&self.nodes, |node| node.weight * f(node))
    }

    /// Like [`weighted_sum`](Self::weighted_sum) but for several integrands at once.
    pub fn weighted_sums<const M: usize, F>(&self, f: F) -> [f64; M]
    where
        F: Fn(&Node) -> [f64; M] + Sync,
    {
        chunked_sums(&self.nodes, |node| f(node).map(|v| node.weight * v))
    }
}

/// Sums `f` over `items` in fixed-size chunks, combining chunk totals in
/// index order so the result is independent of the worker count.
pub(crate) fn chunked_sums<T: Sync, const M: usize>(items: &[T], f: impl Fn(&T) -> [f64; M] + Sync) -> [f64; M] {
    let partials: Vec<[KahanSum; M]> = items
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = [KahanSum::default(); M];
            for x in chunk {
                for (a, v) in acc.iter_mut().zip(f(x)) {
                    a.add(v);
                }
            }
            acc
        })
        .collect();
    let mut total = [KahanSum::default(); M];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            t.add(v.value());
        }
    }
    total.map(|t| t.value())
}

fn parallel_sum<T: Sync>(items: &[T], f: impl Fn(&T) -> f64 + Sync) -> f64 {
    let [s] = chunked_sums(items, |x| [f(x)]);
    s
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Integrates `f(u₁, u₂, u₃)` over `Q`.
///
/// A non-finite integrand value aborts with the offending node.
pub fn integrate_on_q<F>(f: F, config: &IntegrationConfig) -> Result<IntegralEstimate>
where
    F: Fn([f64; 3]) -> f64 + Sync,
{
    config.validate()?;
    match config.method {
        IntegrationMethod::Grid => {
            let fine = grid_integral(&f, config.n, config.grading)?;
            let coarse = grid_integral(&f, (config.n / 2).max(1), config.grading)?;
            Ok(IntegralEstimate {
                value: fine,
                error_estimate: 0.5 * (fine - coarse).abs(),
            })
        }
        IntegrationMethod::MonteCarlo => {
            let rule = SimplexRule::monte_carlo(config.n, config.seed);
            let nodes = rule.nodes();
            check_finite(nodes, &f)?;
            let [s1, s2] = rule.weighted_sums(|node| {
                let v = f(node.u);
                [v, v * v]
            });
            // weights are 1/(6n): s1 = mean/6, s2 = mean(f²)/6
            let n = config.n as f64;
            let mean = 6.0 * s1;
            let var = (6.0 * s2 - mean * mean).max(0.0) * n / (n - 1.0);
            Ok(IntegralEstimate {
                value: s1,
                error_estimate: (var / n).sqrt() / 6.0,
            })
        }
    }
}

fn grid_integral<F>(f: &F, n: usize, grading: f64) -> Result<f64>
where
    F: Fn([f64; 3]) -> f64 + Sync,
{
    let rule = SimplexRule::grid(n, grading);
    check_finite(rule.nodes(), f)?;
    Ok(rule.weighted_sum(|node| f(node.u)))
}

fn check_finite<F>(nodes: &[Node], f: &F) -> Result<()>
where
    F: Fn([f64; 3]) -> f64 + Sync,
{
    let bad = nodes
        .par_iter()
        .map(|node| (node.u, f(node.u)))
        .find_first(|(_, v)| !v.is_finite());
    match bad {
        Some((node, value)) => Err(Error::NonFinite { node, value }),
        None => Ok(()),
    }
}
