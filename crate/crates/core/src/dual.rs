//! Dual quantities of the three-hypothesis power maximization program.
//!
//! At a sorted point `u` with `gᵢ = g(uᵢ)` the residuals are
//!
//! ```text
//! R₁ = 2g₁g₂g₃ − 6μ₀ − 2μ₁(g₂+g₃) − 2μ₂g₂g₃
//! R₂ = 2g₁g₂g₃ − 2μ₁g₁ − 2μ₂g₁g₃
//! R₃ = 2g₁g₂g₃ − 2μ₂g₁g₂
//! ```
//!
//! and the optimal policy for fixed `μ` rejects the `r` smallest p-values,
//! where `r` maximizes the partial sum `R₁ + … + R_r` (zero for `r = 0`).

use serde::{Deserialize, Serialize};

use crate::density::DensityModel;
use crate::error::{check_alpha, Error, Result};
use crate::simplex::{chunked_sums, IntegrationConfig, SimplexRule};

/// Dual vector `μ = (μ₀, μ₁, μ₂) ≥ 0`. Serializes as a three-element array.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Multipliers {
    pub mu0: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl Multipliers {
    pub const ZERO: Self = Self { mu0: 0.0, mu1: 0.0, mu2: 0.0 };

    pub fn new(mu0: f64, mu1: f64, mu2: f64) -> Result<Self> {
        Self::try_from([mu0, mu1, mu2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.mu0, self.mu1, self.mu2]
    }

    pub fn get(&self, gamma: usize) -> f64 {
        self.to_array()[gamma]
    }

    /// Copy with coordinate `gamma` replaced by `x`.
    pub fn with(self, gamma: usize, x: f64) -> Self {
        let mut a = self.to_array();
        a[gamma] = x;
        Self { mu0: a[0], mu1: a[1], mu2: a[2] }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let (a, b) = (self.to_array(), other.to_array());
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }
}

impl TryFrom<[f64; 3]> for Multipliers {
    type Error = Error;

    fn try_from(a: [f64; 3]) -> Result<Self> {
        if a.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "multipliers must be finite and non-negative, got {a:?}"
            )));
        }
        Ok(Self { mu0: a[0], mu1: a[1], mu2: a[2] })
    }
}

impl From<Multipliers> for [f64; 3] {
    fn from(m: Multipliers) -> Self {
        m.to_array()
    }
}

/// Objective and error coefficients at one point: `Rᵢ = aᵢ − Σ_l μ_l b_{l,i}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCoefficients {
    pub a: [f64; 3],
    /// `b[l][i]`
    pub b: [[f64; 3]; 3],
}

impl ConstraintCoefficients {
    pub fn from_g(g: [f64; 3]) -> Self {
        let [g1, g2, g3] = g;
        let p = 2.0 * g1 * g2 * g3;
        Self {
            a: [p; 3],
            b: [
                [6.0, 0.0, 0.0],
                [2.0 * (g2 + g3), 2.0 * g1, 0.0],
                [2.0 * g2 * g3, 2.0 * g1 * g3, 2.0 * g1 * g2],
            ],
        }
    }

    pub fn residuals(&self, mu: &Multipliers) -> [f64; 3] {
        let m = mu.to_array();
        std::array::from_fn(|i| self.a[i] - (0..3).map(|l| m[l] * self.b[l][i]).sum::<f64>())
    }
}

/// Residuals from density values at a sorted point, written out term by term.
#[inline]
pub fn residuals_from_g(g: [f64; 3], mu: &Multipliers) -> [f64; 3] {
    let [g1, g2, g3] = g;
    let p = 2.0 * g1 * g2 * g3;
    [
        p - 6.0 * mu.mu0 - 2.0 * mu.mu1 * (g2 + g3) - 2.0 * mu.mu2 * g2 * g3,
        p - 2.0 * mu.mu1 * g1 - 2.0 * mu.mu2 * g1 * g3,
        p - 2.0 * mu.mu2 * g1 * g2,
    ]
}

/// Indicator bits `α₁, α₂, α₃` (strict inequalities).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Indicators {
    pub alpha1: bool,
    pub alpha2: bool,
    pub alpha3: bool,
}

impl Indicators {
    #[inline]
    pub fn from_residuals(r: [f64; 3]) -> Self {
        let [r1, r2, r3] = r;
        Self {
            alpha1: r1 > 0.0 || r1 + r2 > 0.0 || r1 + r2 + r3 > 0.0,
            alpha2: r2 > 0.0 || r2 + r3 > 0.0,
            alpha3: r3 > 0.0,
        }
    }

    /// Policy bits `(D₁, D₂, D₃) = (α₁, α₁α₂, α₁α₂α₃)`.
    #[inline]
    pub fn policy(&self) -> [bool; 3] {
        let d1 = self.alpha1;
        let d2 = d1 && self.alpha2;
        [d1, d2, d2 && self.alpha3]
    }

    /// Number of rejections `D₁ + D₂ + D₃`.
    pub fn num_rejected(&self) -> usize {
        self.policy().iter().filter(|&&d| d).count()
    }
}

fn sorted_g(model: &DensityModel, u: [f64; 3]) -> Result<[f64; 3]> {
    if !(u[0] <= u[1] && u[1] <= u[2]) {
        return Err(Error::Precondition(format!("point {u:?} is not sorted ascending")));
    }
    Ok([model.eval(u[0])?, model.eval(u[1])?, model.eval(u[2])?])
}

/// Residuals `(R₁, R₂, R₃)` at a sorted point.
pub fn residuals(model: &DensityModel, mu: &Multipliers, u: [f64; 3]) -> Result<[f64; 3]> {
    Ok(residuals_from_g(sorted_g(model, u)?, mu))
}

/// Indicator bits at a sorted point.
pub fn indicators(model: &DensityModel, mu: &Multipliers, u: [f64; 3]) -> Result<Indicators> {
    residuals(model, mu, u).map(Indicators::from_residuals)
}

/// Which functions the coordinate updates drive to `α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetForm {
    /// `F_γ(μ) = FWER_γ(D^μ)`, the error rate of the induced policy under
    /// `h_γ`. This is the negative gradient of the dual function shifted by
    /// `α`, so a root is a coordinate-wise KKT point.
    #[default]
    FwerGradient,
    /// Simplified forms `6∫α₁`, `1 − 2∫β₂g(u₁)` and `2∫α₃g(u₁)g(u₂)`,
    /// obtained from the gradient by assuming `α₁ = 1` (and `α₂ = 1` for the
    /// last) on the region that matters.
    Reduced,
}

impl TargetForm {
    pub fn other(self) -> Self {
        match self {
            Self::FwerGradient => Self::Reduced,
            Self::Reduced => Self::FwerGradient,
        }
    }
}

/// Power functionals of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyPower {
    pub pi3: f64,
    pub pi_any: f64,
}

#[derive(Debug, Clone, Copy)]
struct GNode {
    g: [f64; 3],
    w: f64,
}

/// Density values on a quadrature rule, ready for repeated dual evaluations.
///
/// On a grid rule each axis value is the mean of `g` over the axis cell,
/// computed from the model's CDF. Products of such means integrate
/// `g(u₁)g(u₂)g(u₃)` and its sub-products exactly, which keeps the
/// singular densities honest near zero.
#[derive(Debug, Clone)]
pub struct DualProblem {
    model: DensityModel,
    integration: IntegrationConfig,
    nodes: Vec<GNode>,
}

impl DualProblem {
    pub fn new(model: &DensityModel, integration: &IntegrationConfig) -> Result<Self> {
        model.check_params()?;
        let rule = SimplexRule::new(integration)?;
        let nodes = if rule.is_grid() {
            let axis = rule
                .edges()
                .windows(2)
                .map(|w| model.cell_mean(w[0], w[1]))
                .collect::<Result<Vec<f64>>>()?;
            rule.nodes()
                .iter()
                .map(|node| {
                    let c = node.cell.expect("grid node");
                    GNode {
                        g: c.map(|i| axis[i as usize]),
                        w: node.weight,
                    }
                })
                .collect()
        } else {
            let lo = model.lower_bound();
            rule.nodes()
                .iter()
                .map(|node| {
                    let mut g = [0.0; 3];
                    for (gi, &ui) in g.iter_mut().zip(&node.u) {
                        *gi = model.eval(ui.max(lo))?;
                    }
                    Ok(GNode { g, w: node.weight })
                })
                .collect::<Result<Vec<_>>>()?
        };
        for n in &nodes {
            if n.g.iter().any(|x| !x.is_finite() || *x <= 0.0) {
                return Err(Error::Precondition(format!(
                    "density values {:?} on the quadrature rule are not finite and positive",
                    n.g
                )));
            }
        }
        Ok(Self {
            model: model.clone(),
            integration: *integration,
            nodes,
        })
    }

    pub fn model(&self) -> &DensityModel {
        &self.model
    }

    pub fn integration(&self) -> &IntegrationConfig {
        &self.integration
    }

    fn sums<const M: usize>(&self, f: impl Fn(&GNode) -> [f64; M] + Sync) -> [f64; M] {
        chunked_sums(&self.nodes, |n| f(n).map(|v| n.w * v))
    }

    /// `F_γ` at `mu`.
    pub fn target(&self, gamma: usize, mu: &Multipliers, form: TargetForm) -> f64 {
        assert!(gamma < 3, "coordinate index {gamma} out of range");
        match form {
            TargetForm::FwerGradient => self.fwer(mu)[gamma],
            TargetForm::Reduced => match gamma {
                0 => self.fwer(mu)[0],
                1 => {
                    let [s] = self.sums(|n| {
                        let a = Indicators::from_residuals(residuals_from_g(n.g, mu));
                        [if a.alpha2 { 0.0 } else { n.g[0] }]
                    });
                    1.0 - 2.0 * s
                }
                _ => {
                    let [s] = self.sums(|n| {
                        let a = Indicators::from_residuals(residuals_from_g(n.g, mu));
                        [if a.alpha3 { n.g[0] * n.g[1] } else { 0.0 }]
                    });
                    2.0 * s
                }
            },
        }
    }

    pub fn targets(&self, mu: &Multipliers, form: TargetForm) -> [f64; 3] {
        match form {
            TargetForm::FwerGradient => self.fwer(mu),
            TargetForm::Reduced => std::array::from_fn(|g| self.target(g, mu, form)),
        }
    }

    /// `FWER_l` of the induced policy `D^μ` under `h_l`, `l = 0, 1, 2`.
    pub fn fwer(&self, mu: &Multipliers) -> [f64; 3] {
        let [f0, f1, f2] = self.sums(|n| {
            let [g1, g2, g3] = n.g;
            let [d1, d2, d3] = Indicators::from_residuals(residuals_from_g(n.g, mu)).policy().map(f64::from);
            [d1, d1 * (g2 + g3) + d2 * g1, d1 * g2 * g3 + d2 * g1 * g3 + d3 * g1 * g2]
        });
        [6.0 * f0, 2.0 * f1, 2.0 * f2]
    }

    /// Average power `Π₃` and minimal power `Π_any` of `D^μ`.
    pub fn power(&self, mu: &Multipliers) -> PolicyPower {
        let [s3, s1] = self.sums(|n| {
            let p = n.g[0] * n.g[1] * n.g[2];
            let [d1, d2, d3] = Indicators::from_residuals(residuals_from_g(n.g, mu)).policy().map(f64::from);
            [(d1 + d2 + d3) * p, d1 * p]
        });
        PolicyPower { pi3: 2.0 * s3, pi_any: 6.0 * s1 }
    }

    /// Dual function `L(D^μ, μ)` through its five-term decomposition.
    pub fn lagrangian(&self, mu: &Multipliers, alpha: f64) -> f64 {
        let [t1, t2, t3, t4] = self.sums(|n| {
            let [g1, g2, g3] = n.g;
            let a = Indicators::from_residuals(residuals_from_g(n.g, mu));
            let (a1, a2, a3) = (f64::from(a.alpha1), f64::from(a.alpha2), f64::from(a.alpha3));
            [
                g1 * g2 * g3 * a1 * (1.0 + a2 + a2 * a3),
                a1,
                a1 * (g1 * a2 + g2 + g3),
                a1 * (g2 * g3 + a2 * g1 * g3 + a2 * a3 * g1 * g2),
            ]
        });
        alpha * (mu.mu0 + mu.mu1 + mu.mu2) + 2.0 * t1 - 6.0 * mu.mu0 * t2 - 2.0 * mu.mu1 * t3 - 2.0 * mu.mu2 * t4
    }

    /// `F_γ(μ) − α` for all three coordinates.
    pub fn kkt_residuals(&self, mu: &Multipliers, alpha: f64, form: TargetForm) -> [f64; 3] {
        self.targets(mu, form).map(|f| f - alpha)
    }
}

/// `F_γ(x; fixed)`: the target with coordinate `gamma` set to `x`.
pub fn target_f(
    gamma: usize,
    x: f64,
    fixed: &Multipliers,
    model: &DensityModel,
    integration: &IntegrationConfig,
    form: TargetForm,
) -> Result<f64> {
    if gamma > 2 {
        return Err(Error::InvalidParameter(format!("coordinate index must be 0, 1 or 2, got {gamma}")));
    }
    let mu = Multipliers::try_from(fixed.with(gamma, x).to_array())?;
    Ok(DualProblem::new(model, integration)?.target(gamma, &mu, form))
}

/// `L(D^μ, μ)`.
pub fn lagrangian(model: &DensityModel, mu: &Multipliers, alpha: f64, integration: &IntegrationConfig) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(DualProblem::new(model, integration)?.lagrangian(mu, alpha))
}

/// `(F₀ − α, F₁ − α, F₂ − α)` at `mu`.
pub fn check_kkt(
    model: &DensityModel,
    mu: &Multipliers,
    alpha: f64,
    integration: &IntegrationConfig,
    form: TargetForm,
) -> Result<[f64; 3]> {
    check_alpha(alpha)?;
    Ok(DualProblem::new(model, integration)?.kkt_residuals(mu, alpha, form))
}
