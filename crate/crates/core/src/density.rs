//! Alternative p-value densities.
//!
//! Every model describes the density `g` of a single p-value under its
//! alternative hypothesis; under the null the p-value is `U(0, 1)`. The
//! built-in models are induced by classical test statistics through the
//! probability integral transform, and `g` doubles as the likelihood-ratio
//! threshold function, so for a well-posed problem it is strictly positive and
//! non-increasing on `(0, 1)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Lower end of the evaluation range for densities that are unbounded at zero.
pub const INTERIOR_OFFSET: f64 = 1e-8;

/// Relative tolerance below which an adjacent increase of `g` is treated as
/// rounding noise by [`DensityModel::validate`].
const MONOTONE_RTOL: f64 = 1e-12;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Parameterized alternative density `g(u)` of a p-value.
///
/// JSON form: `{"model": "truncated_normal", "params": {"theta": -2.0, "M": 6.0}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "snake_case")]
pub enum DensityModel {
    /// One-sided test of a normal mean, statistics truncated to `[-M, M]`.
    TruncatedNormal {
        theta: f64,
        #[serde(rename = "M")]
        m: f64,
    },
    /// Two-sided p-values of a symmetric mixture `0.5 N(theta, 1) + 0.5 N(-theta, 1)`.
    MixtureNormal { theta: f64 },
    /// Two-sided normal p-values of a Student-t statistic.
    StudentT { df: f64 },
    /// `Beta(theta, 1)` p-values, `g(u) = theta u^(theta - 1)`.
    Beta { theta: f64 },
    Uniform,
    /// Knot table interpolated linearly in `log g`.
    Tabulated(TabulatedDensity),
}

/// Knots `(u, g(u))` of a tabulated density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedRepr", into = "TabulatedRepr")]
pub struct TabulatedDensity {
    u: Vec<f64>,
    g: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TabulatedRepr {
    points: Vec<(f64, f64)>,
}

impl TryFrom<TabulatedRepr> for TabulatedDensity {
    type Error = Error;

    fn try_from(repr: TabulatedRepr) -> Result<Self> {
        TabulatedDensity::new(repr.points)
    }
}

impl From<TabulatedDensity> for TabulatedRepr {
    fn from(t: TabulatedDensity) -> Self {
        TabulatedRepr {
            points: t.u.into_iter().zip(t.g).collect(),
        }
    }
}

impl TabulatedDensity {
    /// Builds a table from `(u, g)` pairs. Knots must be strictly increasing in
    /// `u`, lie in `[0, 1]` and carry strictly positive values. Monotonicity of
    /// the values is not enforced here; [`DensityModel::validate`] reports it.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("tabulated density needs at least one knot".into()));
        }
        for (i, &(u, g)) in points.iter().enumerate() {
            if !(0.0..=1.0).contains(&u) || !g.is_finite() || g <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "knot {i} = ({u}, {g}) must have u in [0, 1] and g > 0"
                )));
            }
            if i > 0 && u <= points[i - 1].0 {
                return Err(Error::InvalidParameter(format!(
                    "knots must be strictly increasing in u (knot {i})"
                )));
            }
        }
        let (u, g) = points.into_iter().unzip();
        Ok(Self { u, g })
    }

    /// Reads a headered two-column CSV `u,g`.
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut points = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let field = |k: usize| -> Result<f64> {
                record
                    .get(k)
                    .ok_or_else(|| Error::Parse(format!("line {}: expected two columns", line + 2)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", line + 2, k + 1)))
            };
            points.push((field(0)?, field(1)?));
        }
        Self::new(points)
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.u.iter().copied().zip(self.g.iter().copied())
    }

    fn eval(&self, u: f64) -> f64 {
        let n = self.u.len();
        if u <= self.u[0] {
            return self.g[0];
        }
        if u >= self.u[n - 1] {
            return self.g[n - 1];
        }
        let k = self.u.partition_point(|&x| x <= u) - 1;
        let t = (u - self.u[k]) / (self.u[k + 1] - self.u[k]);
        (self.g[k].ln() * (1.0 - t) + self.g[k + 1].ln() * t).exp()
    }

    /// Exact integral of the log-linear interpolant over `[0, u]`.
    fn cdf(&self, u: f64) -> f64 {
        let n = self.u.len();
        let mut acc = self.g[0] * u.min(self.u[0]);
        if u <= self.u[0] {
            return acc;
        }
        for k in 0..n - 1 {
            let (a, b) = (self.u[k], self.u[k + 1]);
            if u <= a {
                break;
            }
            let hi = u.min(b);
            acc += log_linear_integral(a, self.g[k], b, self.g[k + 1], hi);
        }
        if u > self.u[n - 1] {
            acc += self.g[n - 1] * (u - self.u[n - 1]);
        }
        acc
    }
}

/// `∫_a^hi exp(linear)` where the exponent interpolates `ln ga` at `a` and `ln gb` at `b`.
fn log_linear_integral(a: f64, ga: f64, b: f64, gb: f64, hi: f64) -> f64 {
    let slope = (gb.ln() - ga.ln()) / (b - a);
    let width = hi - a;
    if (slope * width).abs() < 1e-10 {
        return ga * width * (1.0 + 0.5 * slope * width);
    }
    ga * (slope * width).exp_m1() / slope
}

/// Summary of empirical regularity constants of a density on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityValidationReport {
    /// Smallest observed value (empirical positivity constant).
    pub min_value: f64,
    /// Largest observed value (empirical upper bound).
    pub max_value: f64,
    /// Number of adjacent grid pairs where `g` increases.
    pub monotone_violations: usize,
    /// Numerical `∫₀¹ g`.
    pub mass: f64,
    /// Tolerance the mass is expected to meet.
    pub mass_tolerance: f64,
    /// `min |Δg| / |Δu|` over adjacent grid pairs.
    pub lipschitz_lower_estimate: f64,
    /// Left end of the evaluation grid.
    pub lower_bound: f64,
}

impl DensityValidationReport {
    pub fn is_conforming(&self) -> bool {
        self.monotone_violations == 0
            && self.min_value > 0.0
            && (self.mass - 1.0).abs() <= self.mass_tolerance
    }
}

impl DensityModel {
    pub fn truncated_normal(theta: f64, m: f64) -> Self {
        Self::TruncatedNormal { theta, m }
    }

    pub fn mixture_normal(theta: f64) -> Self {
        Self::MixtureNormal { theta }
    }

    pub fn student_t(df: f64) -> Self {
        Self::StudentT { df }
    }

    pub fn beta(theta: f64) -> Self {
        Self::Beta { theta }
    }

    /// Short model name used in tables and diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Self::TruncatedNormal { .. } => "truncated_normal",
            Self::MixtureNormal { .. } => "mixture_normal",
            Self::StudentT { .. } => "student_t",
            Self::Beta { .. } => "beta",
            Self::Uniform => "uniform",
            Self::Tabulated(_) => "tabulated",
        }
    }

    /// The model's shape parameter (theta or df), if it has one.
    pub fn parameter(&self) -> Option<f64> {
        match *self {
            Self::TruncatedNormal { theta, .. } | Self::MixtureNormal { theta } | Self::Beta { theta } => {
                Some(theta)
            }
            Self::StudentT { df } => Some(df),
            Self::Uniform | Self::Tabulated(_) => None,
        }
    }

    pub fn check_params(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            Self::TruncatedNormal { theta, m } => {
                if !theta.is_finite() || !(m.is_finite() && m > 0.0) {
                    return bad(format!("truncated normal needs finite theta and M > 0, got theta={theta}, M={m}"));
                }
            }
            Self::MixtureNormal { theta } => {
                if !theta.is_finite() {
                    return bad(format!("mixture normal needs finite theta, got {theta}"));
                }
            }
            Self::StudentT { df } => {
                if !(df.is_finite() && df > 0.0) {
                    return bad(format!("student t needs df > 0, got {df}"));
                }
            }
            Self::Beta { theta } => {
                if !(theta > 0.0 && theta <= 1.0) {
                    return bad(format!("beta model needs theta in (0, 1], got {theta}"));
                }
            }
            Self::Uniform | Self::Tabulated(_) => {}
        }
        Ok(())
    }

    /// Whether `g(u) → ∞` as `u → 0`, so `u = 0` is outside the domain.
    pub fn is_unbounded_at_zero(&self) -> bool {
        match *self {
            Self::MixtureNormal { .. } | Self::StudentT { .. } => true,
            Self::Beta { theta } => theta < 1.0,
            _ => false,
        }
    }

    fn check_u(&self, u: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&u) || (u == 0.0 && self.is_unbounded_at_zero()) {
            return Err(Error::Domain { model: self.name(), u });
        }
        Ok(())
    }

    /// Evaluates `g(u)`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        self.check_params()?;
        self.check_u(u)?;
        let nd = std_normal();
        let value = match self {
            Self::TruncatedNormal { theta, m } => {
                let x = truncated_quantile(&nd, *m, u);
                let (z0, z1) = truncation_masses(&nd, *theta, *m);
                (z0 / z1) * (theta * x - 0.5 * theta * theta).exp()
            }
            Self::MixtureNormal { theta } => {
                let x = two_sided_statistic(&nd, u);
                (-0.5 * theta * theta).exp() * (theta * x).cosh()
            }
            Self::StudentT { df } => {
                let x = two_sided_statistic(&nd, u);
                let t = StudentsT::new(0.0, 1.0, *df).expect("validated df");
                (t.ln_pdf(x) - nd.ln_pdf(x)).exp()
            }
            Self::Beta { theta } => theta * u.powf(theta - 1.0),
            Self::Uniform => 1.0,
            Self::Tabulated(t) => t.eval(u),
        };
        Ok(value)
    }

    /// Alternative CDF `∫₀ᵘ g`.
    pub fn cdf(&self, u: f64) -> Result<f64> {
        self.check_params()?;
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain { model: self.name(), u });
        }
        let nd = std_normal();
        let value = match self {
            Self::TruncatedNormal { theta, m } => {
                let x = truncated_quantile(&nd, *m, u);
                let (_, z1) = truncation_masses(&nd, *theta, *m);
                ((nd.cdf(x - theta) - nd.cdf(-m - theta)) / z1).clamp(0.0, 1.0)
            }
            Self::MixtureNormal { theta } => {
                if u == 0.0 {
                    0.0
                } else {
                    let c = two_sided_statistic(&nd, u);
                    nd.cdf(theta - c) + nd.cdf(-theta - c)
                }
            }
            Self::StudentT { df } => {
                if u == 0.0 {
                    0.0
                } else {
                    let c = two_sided_statistic(&nd, u);
                    let t = StudentsT::new(0.0, 1.0, *df).expect("validated df");
                    2.0 * t.cdf(-c)
                }
            }
            Self::Beta { theta } => u.powf(*theta),
            Self::Uniform => u,
            Self::Tabulated(t) => t.cdf(u),
        };
        Ok(value)
    }

    /// Mean of `g` over `[a, b]`, computed from the CDF so that singular
    /// behaviour at zero is integrated exactly.
    pub fn cell_mean(&self, a: f64, b: f64) -> Result<f64> {
        if !(a < b) {
            return Err(Error::InvalidParameter(format!("empty cell [{a}, {b}]")));
        }
        if matches!(self, Self::Uniform) {
            return Ok(1.0);
        }
        let mean = (self.cdf(b)? - self.cdf(a)?) / (b - a);
        if mean > 0.0 && mean.is_finite() {
            return Ok(mean);
        }
        // CDF difference lost to rounding (far tail of a light-tailed model).
        self.eval(0.5 * (a + b))
    }

    /// Draws one p-value with density `g`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.check_params()?;
        let nd = std_normal();
        let u = match self {
            Self::TruncatedNormal { theta, m } => {
                let v: f64 = rng.random();
                let (z0, z1) = truncation_masses(&nd, *theta, *m);
                let p = nd.cdf(-m - theta) + v * z1;
                let x = (theta + nd.inverse_cdf(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)))
                    .clamp(-m, *m);
                (nd.cdf(x) - nd.cdf(-m)) / z0
            }
            Self::MixtureNormal { theta } => {
                let z: f64 = StandardNormal.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                2.0 * nd.cdf(-(sign * theta + z).abs())
            }
            Self::StudentT { df } => {
                let t = rand_distr::StudentT::new(*df)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let x: f64 = t.sample(rng);
                2.0 * nd.cdf(-x.abs())
            }
            Self::Beta { theta } => {
                let v: f64 = rng.random();
                v.powf(1.0 / theta)
            }
            Self::Uniform => rng.random(),
            Self::Tabulated(_) => return Err(Error::UnsupportedVariant("tabulated density sampling")),
        };
        Ok(u.clamp(0.0, 1.0))
    }

    /// Left end of the range on which `g` is evaluated.
    pub fn lower_bound(&self) -> f64 {
        if self.is_unbounded_at_zero() {
            INTERIOR_OFFSET
        } else {
            0.0
        }
    }

    /// Checks positivity, monotonicity and normalization on a grid of
    /// `grid_size` points spanning `[lower_bound, 1]`.
    ///
    /// The mass uses composite Simpson with 10⁴ panels. For the parametric
    /// models the rule runs in `ln u` and `ln(1 − u)` away from the endpoints
    /// and the mass within `INTERIOR_OFFSET` of either end is taken from the
    /// model's CDF.
    pub fn validate(&self, grid_size: usize) -> Result<DensityValidationReport> {
        if grid_size < 2 {
            return Err(Error::InvalidParameter(format!("grid_size must be >= 2, got {grid_size}")));
        }
        self.check_params()?;
        let lo = self.lower_bound();
        let step = (1.0 - lo) / (grid_size - 1) as f64;
        let values = (0..grid_size)
            .map(|i| {
                let u = if i + 1 == grid_size { 1.0 } else { lo + step * i as f64 };
                self.eval(u).map(|g| (u, g))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut min_value = f64::INFINITY;
        let mut max_value = f64::NEG_INFINITY;
        for &(_, g) in &values {
            min_value = min_value.min(g);
            max_value = max_value.max(g);
        }
        let mut monotone_violations = 0;
        let mut lipschitz = f64::INFINITY;
        for w in values.windows(2) {
            let ((u0, g0), (u1, g1)) = (w[0], w[1]);
            if g1 > g0 * (1.0 + MONOTONE_RTOL) {
                monotone_violations += 1;
            }
            lipschitz = lipschitz.min((g1 - g0).abs() / (u1 - u0));
        }

        let mass = self.numerical_mass(10_000)?;
        Ok(DensityValidationReport {
            min_value,
            max_value,
            monotone_violations,
            mass,
            mass_tolerance: 1e-6,
            lipschitz_lower_estimate: lipschitz,
            lower_bound: lo,
        })
    }

    fn numerical_mass(&self, panels: usize) -> Result<f64> {
        let panels = panels + panels % 2;
        match self {
            Self::Uniform => simpson(0.0, 1.0, panels, |u| self.eval(u)),
            Self::Tabulated(t) => {
                // Kinks at the knots spoil Simpson; integrate piecewise.
                let mut edges: Vec<f64> = std::iter::once(0.0)
                    .chain(t.u.iter().copied().filter(|&u| u > 0.0 && u < 1.0))
                    .chain(std::iter::once(1.0))
                    .collect();
                edges.dedup();
                let per = (panels / (edges.len() - 1)).max(2);
                let mut acc = 0.0;
                for w in edges.windows(2) {
                    acc += simpson(w[0], w[1], per + per % 2, |u| self.eval(u))?;
                }
                Ok(acc)
            }
            // The parametric models can put mass in thin layers at either end
            // (a singularity at zero, or layers of width ~Φ(−M) for the
            // truncated normal), so integrate in ln u on [ε₀, ½] and in
            // ln(1 − u) on [½, 1 − ε₀], adding both tails from the CDF.
            _ => {
                let (s0, s1) = (INTERIOR_OFFSET.ln(), 0.5f64.ln());
                let half = panels / 2 + panels / 2 % 2;
                let left = simpson(s0, s1, half, |s| {
                    let u = s.exp();
                    self.eval(u).map(|g| g * u)
                })?;
                let right = simpson(s0, s1, half, |s| {
                    let v = s.exp();
                    self.eval(1.0 - v).map(|g| g * v)
                })?;
                let tails = self.cdf(INTERIOR_OFFSET)? + 1.0 - self.cdf(1.0 - INTERIOR_OFFSET)?;
                Ok(left + right + tails)
            }
        }
    }
}

fn simpson(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let h = (b - a) / panels as f64;
    let mut acc = f(a)? + f(b)?;
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64)?;
    }
    Ok(acc * h / 3.0)
}

/// `(Z₀, Z₁(θ))`: null and alternative probability of `[-M, M]`.
fn truncation_masses(nd: &Normal, theta: f64, m: f64) -> (f64, f64) {
    let z0 = nd.cdf(m) - nd.cdf(-m);
    let z1 = nd.cdf(m - theta) - nd.cdf(-m - theta);
    (z0, z1)
}

/// Statistic `x` with truncated-null CDF equal to `u`.
fn truncated_quantile(nd: &Normal, m: f64, u: f64) -> f64 {
    let z0 = nd.cdf(m) - nd.cdf(-m);
    let p = nd.cdf(-m) + u * z0;
    nd.inverse_cdf(p).clamp(-m, m)
}

/// `Φ⁻¹(1 - u/2)`, evaluated through the lower tail for accuracy at small `u`.
fn two_sided_statistic(nd: &Normal, u: f64) -> f64 {
    if u >= 1.0 {
        return 0.0;
    }
    -nd.inverse_cdf(0.5 * u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_is_identically_one() {
        assert_eq!(DensityModel::Uniform.eval(0.37).unwrap(), 1.0);
        assert_eq!(DensityModel::Uniform.eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn beta_direct_substitution() {
        assert_relative_eq!(DensityModel::beta(0.5).eval(0.25).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn truncated_normal_with_zero_shift_is_flat() {
        let m = DensityModel::truncated_normal(0.0, 6.0);
        for u in [0.0, 0.1, 0.5, 0.93, 1.0] {
            assert_relative_eq!(m.eval(u).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn unbounded_models_reject_zero() {
        for m in [DensityModel::mixture_normal(-2.0), DensityModel::student_t(4.0), DensityModel::beta(0.2)] {
            assert!(matches!(m.eval(0.0), Err(Error::Domain { .. })), "{m:?}");
            assert!(m.eval(1e-12).unwrap().is_finite());
        }
        assert!(DensityModel::beta(1.0).eval(0.0).is_ok());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(DensityModel::student_t(0.0).eval(0.5).is_err());
        assert!(DensityModel::student_t(-1.0).eval(0.5).is_err());
        assert!(DensityModel::beta(1.5).eval(0.5).is_err());
        assert!(DensityModel::truncated_normal(-1.0, 0.0).eval(0.5).is_err());
        assert!(DensityModel::Uniform.eval(1.5).is_err());
    }

    #[test]
    fn mixture_two_sided_statistic_matches_closed_form() {
        // u = 0.05 → x = 1.959963984540054
        let g = DensityModel::mixture_normal(-2.0).eval(0.05).unwrap();
        let x: f64 = 1.959963984540054;
        assert_relative_eq!(g, (-2.0f64).exp() * (2.0 * x).cosh(), max_relative = 1e-12);
    }

    #[test]
    fn cdf_endpoints() {
        for m in [
            DensityModel::truncated_normal(-2.0, 6.0),
            DensityModel::mixture_normal(-2.0),
            DensityModel::student_t(2.0),
            DensityModel::beta(0.2),
            DensityModel::Uniform,
        ] {
            assert_relative_eq!(m.cdf(0.0).unwrap(), 0.0, epsilon = 1e-12);
            assert_relative_eq!(m.cdf(1.0).unwrap(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn cell_mean_of_uniform_is_exact() {
        assert_eq!(DensityModel::Uniform.cell_mean(0.1, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn validate_uniform() {
        let r = DensityModel::Uniform.validate(100).unwrap();
        assert_eq!(r.monotone_violations, 0);
        assert_eq!(r.min_value, 1.0);
        assert_eq!(r.max_value, 1.0);
        assert_relative_eq!(r.mass, 1.0, epsilon = 1e-12);
        assert!(r.is_conforming());
    }

    #[test]
    fn validate_beta_mass() {
        let r = DensityModel::beta(0.2).validate(1000).unwrap();
        assert_eq!(r.monotone_violations, 0);
        assert!((r.mass - 1.0).abs() <= r.mass_tolerance, "mass {}", r.mass);
    }

    #[test]
    fn validate_needs_two_points() {
        assert!(DensityModel::Uniform.validate(1).is_err());
    }

    #[test]
    fn tabulated_with_increasing_pair_reports_one_violation() {
        let t = TabulatedDensity::new(vec![(0.0, 2.0), (0.25, 1.5), (0.5, 1.6), (0.75, 0.5), (1.0, 0.4)])
            .unwrap();
        let r = DensityModel::Tabulated(t).validate(5).unwrap();
        assert_eq!(r.monotone_violations, 1);
    }

    #[test]
    fn tabulated_interpolates_in_log_space_and_extrapolates_flat() {
        let t = TabulatedDensity::new(vec![(0.2, 4.0), (0.6, 1.0)]).unwrap();
        let m = DensityModel::Tabulated(t);
        assert_relative_eq!(m.eval(0.4).unwrap(), 2.0, max_relative = 1e-12);
        assert_eq!(m.eval(0.05).unwrap(), 4.0);
        assert_eq!(m.eval(0.9).unwrap(), 1.0);
        // ∫ over the log-linear segment: (4 - 1) * 0.4 / ln 4
        let expected = 0.8 + 3.0 * 0.4 / 4f64.ln() + 0.4;
        assert_relative_eq!(m.cdf(1.0).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn tabulated_rejects_bad_knots() {
        assert!(TabulatedDensity::new(vec![]).is_err());
        assert!(TabulatedDensity::new(vec![(0.5, 1.0), (0.5, 0.9)]).is_err());
        assert!(TabulatedDensity::new(vec![(0.1, 0.0)]).is_err());
        assert!(TabulatedDensity::new(vec![(1.2, 1.0)]).is_err());
    }

    #[test]
    fn tabulated_csv() {
        let csv = "u,g\n0.0,2.0\n0.5,1.0\n1.0,0.5\n";
        let t = TabulatedDensity::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(t.knots().count(), 3);
        let bad = "u,g\n0.0,2.0\n0.5,abc\n";
        let err = TabulatedDensity::from_csv(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn tabulated_sampling_is_unsupported() {
        let t = TabulatedDensity::new(vec![(0.0, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            DensityModel::Tabulated(t).sample(&mut rng),
            Err(Error::UnsupportedVariant(_))
        ));
    }

    #[test]
    fn json_shape() {
        let m: DensityModel =
            serde_json::from_str(r#"{"model":"truncated_normal","params":{"theta":-2.0,"M":6.0}}"#).unwrap();
        assert_eq!(m, DensityModel::truncated_normal(-2.0, 6.0));
        let u: DensityModel = serde_json::from_str(r#"{"model":"uniform"}"#).unwrap();
        assert_eq!(u, DensityModel::Uniform);
        let t: DensityModel =
            serde_json::from_str(r#"{"model":"tabulated","params":{"points":[[0.0,2.0],[1.0,0.5]]}}"#).unwrap();
        assert_eq!(t.name(), "tabulated");
        assert!(serde_json::from_str::<DensityModel>(
            r#"{"model":"tabulated","params":{"points":[[0.5,2.0],[0.2,0.5]]}}"#
        )
        .is_err());
    }
}
