//! Most powerful test of three simple hypotheses under strong family-wise
//! error control.
//!
//! The optimal policy is characterized by a dual vector `μ = (μ₀, μ₁, μ₂)`
//! with one multiplier per error constraint `FWER_l ≤ α`. [`solve_optimal_mu`]
//! finds it by coordinate-wise bisection over quadrature on the ordered
//! simplex, [`decide`] applies the resulting policy to observed p-values, and
//! [`compare_procedures`] benchmarks it against the classical procedures by
//! Monte Carlo simulation.
//!
//! ```
//! use optmht_core::{decide, solve_optimal_mu, DensityModel, PValueTriple, SolverConfig};
//!
//! let model = DensityModel::beta(0.2);
//! let solved = solve_optimal_mu(&model, &SolverConfig::with_alpha(0.05)).unwrap();
//! assert!(solved.status.is_converged());
//! let triple = PValueTriple::new([0.001, 0.3, 0.02]).unwrap();
//! let d = decide(&model, &solved.mu, &triple).unwrap();
//! assert!(d.reject[0]);
//! ```

pub mod baselines;
pub mod density;
pub mod dual;
pub mod error;
pub mod metrics;
pub mod policy;
pub mod simplex;
pub mod solver;

pub use baselines::{apply_procedure, Procedure};
pub use density::{DensityModel, DensityValidationReport, TabulatedDensity, INTERIOR_OFFSET};
pub use dual::{
    check_kkt, indicators, lagrangian, residuals, target_f, ConstraintCoefficients, DualProblem, Indicators,
    Multipliers, PolicyPower, TargetForm,
};
pub use error::{Error, Result};
pub use metrics::{
    compare_procedures, estimate_power, sample_triple, CellSummary, Estimate, OutcomeCounts, PowerReport, PowerRow,
    SimulationSpec, TruthConfig,
};
pub use policy::{decide, decide_batch, Decision, PValueTriple};
pub use simplex::{integrate_on_q, IntegralEstimate, IntegrationConfig, IntegrationMethod, SimplexRule};
pub use solver::{
    compute_coordinate_mu, find_coordinate_root, solve_optimal_mu, CoordinateFlag, CoordinateSolve, SolveResult,
    SolveStatus, SolverConfig,
};
