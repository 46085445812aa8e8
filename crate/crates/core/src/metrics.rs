//! Monte Carlo estimation of power and error rates.
//!
//! Every replication draws from its own ChaCha stream keyed by
//! `(seed, rep, truth)`, so results do not depend on scheduling. All
//! procedures in one run see the same p-values (common random numbers).
//! Per-replication outcomes take only a handful of integer values, so they
//! are aggregated as exact integer histograms and the reduction is
//! order-independent.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::Procedure;
use crate::density::DensityModel;
use crate::error::{check_alpha, Error, Result};
use crate::policy::PValueTriple;

/// Default number of replications per truth configuration.
pub const DEFAULT_REPS: usize = 20_000;

/// Replications per parallel work unit.
const REP_CHUNK: usize = 256;

/// Which hypotheses are false (`true` = alternative holds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruthConfig {
    pub h: [bool; 3],
}

impl TruthConfig {
    /// `h_l`: the first `l` hypotheses are false.
    pub fn canonical(l: usize) -> Self {
        assert!(l <= 3, "truth index {l} out of range");
        Self { h: std::array::from_fn(|k| k < l) }
    }

    pub fn all_canonical() -> Vec<Self> {
        (0..=3).map(Self::canonical).collect()
    }

    pub fn num_alternatives(&self) -> usize {
        self.h.iter().filter(|&&b| b).count()
    }

    /// Index `l` when this is a canonical configuration.
    pub fn canonical_index(&self) -> Option<usize> {
        let l = self.num_alternatives();
        (Self::canonical(l) == *self).then_some(l)
    }
}

impl fmt::Display for TruthConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.canonical_index() {
            Some(l) => write!(f, "h{l}"),
            None => write!(f, "{}{}{}", self.h[0] as u8, self.h[1] as u8, self.h[2] as u8),
        }
    }
}

/// Outcome counts of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct OutcomeCounts {
    /// True nulls accepted.
    pub U: usize,
    /// True nulls rejected (false discoveries).
    pub V: usize,
    /// False nulls accepted.
    pub T: usize,
    /// False nulls rejected.
    pub S: usize,
    /// Accepted.
    pub W: usize,
    /// Rejected.
    pub R: usize,
    /// Number of true nulls.
    pub K0: usize,
}

impl OutcomeCounts {
    pub fn tally(truth: &TruthConfig, reject: &[bool; 3]) -> Self {
        let mut c = Self { U: 0, V: 0, T: 0, S: 0, W: 0, R: 0, K0: 0 };
        for (&alt, &rej) in truth.h.iter().zip(reject) {
            match (alt, rej) {
                (false, false) => c.U += 1,
                (false, true) => c.V += 1,
                (true, false) => c.T += 1,
                (true, true) => c.S += 1,
            }
        }
        c.K0 = c.U + c.V;
        c.R = c.V + c.S;
        c.W = c.U + c.T;
        c
    }

    /// Margins of the outcome table.
    pub fn is_consistent(&self) -> bool {
        self.U + self.V == self.K0 && self.T + self.S == 3 - self.K0 && self.W + self.R == 3 && self.R == self.V + self.S
    }
}

/// Draws one triple: null coordinates `U(0, 1)`, alternatives from `model`.
pub fn sample_triple<R: rand::Rng + ?Sized>(model: &DensityModel, truth: &TruthConfig, rng: &mut R) -> Result<PValueTriple> {
    let mut p = [0.0; 3];
    for (x, &alt) in p.iter_mut().zip(&truth.h) {
        *x = if alt { model.sample(rng)? } else { rng.random() };
    }
    PValueTriple::new(p)
}

/// Stream for replication `rep` under truth configuration `truth`.
pub fn replication_rng(seed: u64, rep: u64, truth: &TruthConfig) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let code = truth.h.iter().enumerate().fold(0u64, |acc, (k, &b)| acc | (b as u64) << k);
    rng.set_stream(rep * 8 + code);
    rng
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    fn from_moments(n: u64, sum: f64, sum_sq: f64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 { ((sum_sq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0) } else { 0.0 };
        Self { value: mean, se: (var / nf).sqrt() }
    }
}

/// Integer tallies for one (procedure, truth) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    /// `vr[v][r]`: replications with `V = v`, `R = r`.
    vr: [[u64; 4]; 4],
    /// `s[k]`: replications with `S = k`.
    s: [u64; 4],
    /// `diff[d + 3]`: replications where `S − S_reference = d`.
    diff: [u64; 7],
}

impl Tally {
    fn merge(&mut self, other: &Tally) {
        for v in 0..4 {
            for r in 0..4 {
                self.vr[v][r] += other.vr[v][r];
            }
        }
        for k in 0..4 {
            self.s[k] += other.s[k];
        }
        for d in 0..7 {
            self.diff[d] += other.diff[d];
        }
    }
}

/// Statistics of one procedure under one truth configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub truth: TruthConfig,
    /// `P(V > 0)`.
    pub fwer: Estimate,
    /// `E[V / R; R > 0]`.
    pub fdr: Estimate,
    /// `E[S] / l` (zero alternatives: not defined, reported as 0).
    pub avg_power: Estimate,
    /// `P(R > 0)`.
    pub any_rejection: Estimate,
    /// `E[S − S_ref] / l` against the first procedure of the run.
    pub power_gain_vs_reference: Estimate,
    pub n_reps: usize,
}

impl CellSummary {
    fn from_tally(truth: TruthConfig, t: &Tally) -> Self {
        let n: u64 = t.s.iter().sum();
        let l = truth.num_alternatives().max(1) as f64;
        let mut fwer = (0.0, 0.0);
        let mut fdr = (0.0, 0.0);
        let mut any = (0.0, 0.0);
        for v in 0..4 {
            for r in 0..4 {
                let c = t.vr[v][r] as f64;
                if v > 0 {
                    fwer.0 += c;
                    fwer.1 += c;
                }
                if r > 0 {
                    let q = v as f64 / r as f64;
                    fdr.0 += c * q;
                    fdr.1 += c * q * q;
                    any.0 += c;
                    any.1 += c;
                }
            }
        }
        let (mut pw, mut pw2) = (0.0, 0.0);
        for (k, &c) in t.s.iter().enumerate() {
            let x = k as f64 / l;
            pw += c as f64 * x;
            pw2 += c as f64 * x * x;
        }
        let (mut dg, mut dg2) = (0.0, 0.0);
        for (i, &c) in t.diff.iter().enumerate() {
            let x = (i as f64 - 3.0) / l;
            dg += c as f64 * x;
            dg2 += c as f64 * x * x;
        }
        Self {
            truth,
            fwer: Estimate::from_moments(n, fwer.0, fwer.1),
            fdr: Estimate::from_moments(n, fdr.0, fdr.1),
            avg_power: Estimate::from_moments(n, pw, pw2),
            any_rejection: Estimate::from_moments(n, any.0, any.1),
            power_gain_vs_reference: Estimate::from_moments(n, dg, dg2),
            n_reps: n as usize,
        }
    }
}

/// Simulation settings shared by every procedure of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub alpha: f64,
    pub n_reps: usize,
    pub seed: u64,
    pub truths: Vec<TruthConfig>,
}

impl SimulationSpec {
    pub fn new(alpha: f64, n_reps: usize, seed: u64) -> Self {
        Self { alpha, n_reps, seed, truths: TruthConfig::all_canonical() }
    }

    fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.n_reps < 1000 {
            return Err(Error::Precondition(format!("n_reps must be at least 1000, got {}", self.n_reps)));
        }
        if self.truths.is_empty() {
            return Err(Error::Precondition("at least one truth configuration is required".into()));
        }
        Ok(())
    }
}

/// Power and error summary of one procedure across truth configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub procedure: String,
    pub model: String,
    pub parameter: Option<f64>,
    pub alpha: f64,
    /// `Π₃` (requires `h₃`).
    pub pi3: Option<Estimate>,
    /// `Π_any` (requires `h₃`).
    pub pi_any: Option<Estimate>,
    /// `FWER_l` for `l = 0, 1, 2` (requires `h_l`).
    pub fwer: [Option<Estimate>; 3],
    pub fdr: [Option<Estimate>; 3],
    /// `Π₃` gain over the run's first procedure, with paired standard error.
    pub pi3_gain_vs_reference: Option<Estimate>,
    pub cells: Vec<CellSummary>,
    pub n_reps: usize,
    pub seed: u64,
}

impl PowerReport {
    fn build(procedure: &Procedure, model: &DensityModel, spec: &SimulationSpec, cells: Vec<CellSummary>) -> Self {
        let canonical = |l: usize| cells.iter().find(|c| c.truth.canonical_index() == Some(l));
        let h3 = canonical(3);
        Self {
            procedure: procedure.name().to_owned(),
            model: model.name().to_owned(),
            parameter: model.parameter(),
            alpha: spec.alpha,
            pi3: h3.map(|c| c.avg_power),
            pi_any: h3.map(|c| c.any_rejection),
            fwer: std::array::from_fn(|l| canonical(l).map(|c| c.fwer)),
            fdr: std::array::from_fn(|l| canonical(l).map(|c| c.fdr)),
            pi3_gain_vs_reference: h3.map(|c| c.power_gain_vs_reference),
            cells,
            n_reps: spec.n_reps,
            seed: spec.seed,
        }
    }

    /// Largest `FWER_l` over the simulated configurations with at least one true null.
    pub fn max_fwer(&self) -> Option<Estimate> {
        self.cells
            .iter()
            .filter(|c| c.truth.num_alternatives() < 3)
            .map(|c| c.fwer)
            .max_by(|a, b| a.value.total_cmp(&b.value))
    }
}

/// Simulates all `procedures` on shared p-value draws.
///
/// The first procedure is the reference for paired power differences.
pub fn compare_procedures(procedures: &[Procedure], model: &DensityModel, spec: &SimulationSpec) -> Result<Vec<PowerReport>> {
    spec.validate()?;
    if procedures.is_empty() {
        return Err(Error::Precondition("no procedures to simulate".into()));
    }
    model.check_params()?;
    let np = procedures.len();
    let nt = spec.truths.len();
    let chunks: Vec<(u64, u64)> = (0..spec.n_reps as u64)
        .step_by(REP_CHUNK)
        .map(|start| (start, (start + REP_CHUNK as u64).min(spec.n_reps as u64)))
        .collect();

    let partials: Vec<Vec<Tally>> = chunks
        .par_iter()
        .map(|&(start, end)| -> Result<Vec<Tally>> {
            let mut tallies = vec![Tally::default(); np * nt];
            for rep in start..end {
                for (ti, truth) in spec.truths.iter().enumerate() {
                    let wrap = |e: Error| Error::Replication { rep, source: Box::new(e) };
                    let mut rng = replication_rng(spec.seed, rep, truth);
                    let pvals = sample_triple(model, truth, &mut rng).map_err(wrap)?;
                    let mut s_ref = 0usize;
                    for (pi, proc) in procedures.iter().enumerate() {
                        let d = proc.apply(&pvals, spec.alpha).map_err(wrap)?;
                        let c = OutcomeCounts::tally(truth, &d.reject);
                        debug_assert!(c.is_consistent());
                        if pi == 0 {
                            s_ref = c.S;
                        }
                        let t = &mut tallies[pi * nt + ti];
                        t.vr[c.V][c.R] += 1;
                        t.s[c.S] += 1;
                        t.diff[c.S + 3 - s_ref] += 1;
                    }
                }
            }
            Ok(tallies)
        })
        .collect::<Result<_>>()?;

    let mut total = vec![Tally::default(); np * nt];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(procedures
        .iter()
        .enumerate()
        .map(|(pi, proc)| {
            let cells = spec
                .truths
                .iter()
                .enumerate()
                .map(|(ti, truth)| CellSummary::from_tally(*truth, &total[pi * nt + ti]))
                .collect();
            PowerReport::build(proc, model, spec, cells)
        })
        .collect())
}

/// Simulates a single procedure.
pub fn estimate_power(procedure: &Procedure, model: &DensityModel, spec: &SimulationSpec) -> Result<PowerReport> {
    Ok(compare_procedures(std::slice::from_ref(procedure), model, spec)?.remove(0))
}

/// Flat table row; optional cells are empty in CSV and `null` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub procedure: String,
    pub model: String,
    #[serde(rename = "theta_df")]
    pub parameter: Option<f64>,
    pub truth: String,
    pub pi3: Option<f64>,
    pub pi3_se: Option<f64>,
    pub pi_any: Option<f64>,
    pub pi_any_se: Option<f64>,
    pub fwer0: Option<f64>,
    pub fwer1: Option<f64>,
    pub fwer2: Option<f64>,
    pub fdr0: Option<f64>,
    pub fdr1: Option<f64>,
    pub fdr2: Option<f64>,
    pub n_reps: usize,
    pub seed: u64,
}

impl From<&PowerReport> for PowerRow {
    fn from(r: &PowerReport) -> Self {
        Self {
            procedure: r.procedure.clone(),
            model: r.model.clone(),
            parameter: r.parameter,
            truth: r.cells.iter().map(|c| c.truth.to_string()).collect::<Vec<_>>().join(";"),
            pi3: r.pi3.map(|e| e.value),
            pi3_se: r.pi3.map(|e| e.se),
            pi_any: r.pi_any.map(|e| e.value),
            pi_any_se: r.pi_any.map(|e| e.se),
            fwer0: r.fwer[0].map(|e| e.value),
            fwer1: r.fwer[1].map(|e| e.value),
            fwer2: r.fwer[2].map(|e| e.value),
            fdr0: r.fdr[0].map(|e| e.value),
            fdr1: r.fdr[1].map(|e| e.value),
            fdr2: r.fdr[2].map(|e| e.value),
            n_reps: r.n_reps,
            seed: r.seed,
        }
    }
}

/// Writes reports as a headered CSV table.
pub fn write_csv<W: std::io::Write>(reports: &[PowerReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in reports {
        w.serialize(PowerRow::from(r)).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}
