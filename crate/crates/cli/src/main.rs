//! `optmht`: solve for the optimal three-hypothesis policy, apply it to
//! p-values, and benchmark it against classical procedures.
//!
//! Exit codes: 0 on success, 1 on input errors, 2 when the solver does not
//! converge.

mod config;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use optmht_core::metrics::write_csv;
use optmht_core::{
    compare_procedures, decide_batch, solve_optimal_mu, DensityModel, Multipliers, PowerReport, Procedure,
    SimulationSpec, SolveResult,
};
use serde::{Deserialize, Serialize};

use config::{parse_procedure, read_json, RunConfig};

#[derive(Parser)]
#[command(name = "optmht", version, about = "Most powerful FWER-controlling test of three hypotheses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the optimal multipliers and write the result as JSON.
    Solve(Args),
    /// Apply a policy to a CSV of p-value triples.
    Decide(Args),
    /// Simulate power and error rates of one procedure.
    Simulate(Args),
    /// Simulate several procedures on common random numbers.
    Compare(Args),
    /// Check a density against the model assumptions.
    ValidateDensity(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Procedure name (repeat for `compare`).
    #[arg(long)]
    procedure: Vec<String>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Simulation seed override.
    #[arg(long)]
    seed: Option<u64>,
}

/// Solver stopped without converging; maps to exit code 2.
#[derive(Debug)]
struct NotConverged(String);

impl std::fmt::Display for NotConverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NotConverged {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<NotConverged>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    let (name, args) = match &command {
        Command::Solve(a) => ("solve", a),
        Command::Decide(a) => ("decide", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Compare(a) => ("compare", a),
        Command::ValidateDensity(a) => ("validate-density", a),
    };
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("cannot configure thread pool")?;
    }
    let (cfg, base) = RunConfig::load(&args.config)?;
    cfg.check_command(name)?;
    let out = args.out.clone().or_else(|| cfg.output.as_ref().map(|p| base.join(p)));
    match command {
        Command::Solve(_) => solve(&cfg, &base, out.as_deref()),
        Command::Decide(_) => decide(&cfg, &base, args, out.as_deref()),
        Command::Simulate(_) | Command::Compare(_) => simulate(&cfg, &base, args, name == "compare", out.as_deref()),
        Command::ValidateDensity(_) => {
            let model = cfg.density(&base)?;
            let report = model.validate(cfg.validate.grid_size)?;
            if !report.is_conforming() {
                eprintln!("warning: {} does not satisfy the model assumptions", model.name());
            }
            write_output(out.as_deref(), |w| write_json(w, &report))
        }
    }
}

fn not_converged(r: &SolveResult) -> NotConverged {
    let msg = r.message.clone().unwrap_or_else(|| format!("no convergence after {} cycles", r.outer_iterations));
    NotConverged(format!("solver stopped with status {:?}: {msg}", r.status))
}

fn solve(cfg: &RunConfig, base: &Path, out: Option<&Path>) -> Result<()> {
    let r = solve_optimal_mu(&cfg.density(base)?, &cfg.solver()?)?;
    write_output(out, |w| write_json(w, &r))?;
    if !r.status.is_converged() {
        return Err(not_converged(&r).into());
    }
    Ok(())
}

/// Multipliers from a saved solve, inline values, or a fresh solve.
fn optimal_policy(
    cfg: &RunConfig,
    base: &Path,
    solution: Option<&PathBuf>,
    mu: Option<Multipliers>,
) -> Result<(DensityModel, Multipliers)> {
    if let Some(path) = solution {
        let r: SolveResult = read_json(&base.join(path))?;
        if !r.status.is_converged() {
            return Err(not_converged(&r).into());
        }
        if let Some(d) = cfg.density.as_ref().map(|_| cfg.density(base)).transpose()? {
            if d != r.density {
                bail!("density in the config differs from the density of the saved solution");
            }
        }
        return Ok((r.density, r.mu));
    }
    let model = cfg.density(base)?;
    if let Some(mu) = mu {
        return Ok((model, mu));
    }
    let r = solve_optimal_mu(&model, &cfg.solver()?)?;
    if !r.status.is_converged() {
        return Err(not_converged(&r).into());
    }
    Ok((model, r.mu))
}

#[derive(Deserialize)]
struct PRow {
    id: String,
    p1: f64,
    p2: f64,
    p3: f64,
}

#[derive(Serialize)]
struct DecisionRow<'a> {
    id: &'a str,
    reject1: u8,
    reject2: u8,
    reject3: u8,
    num_rejected: usize,
}

fn decide(cfg: &RunConfig, base: &Path, args: &Args, out: Option<&Path>) -> Result<()> {
    let Some(section) = &cfg.decide else {
        bail!("config has no 'decide' section");
    };
    let input = base.join(&section.input);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&input)
        .with_context(|| format!("cannot read {}", input.display()))?;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for rec in reader.deserialize::<PRow>() {
        let r = rec.map_err(|e| csv_error(&input, &e))?;
        ids.push(r.id);
        rows.push([r.p1, r.p2, r.p3]);
    }

    let procedure = match args.procedure.as_slice() {
        [] => None,
        [one] => parse_procedure(one)?,
        _ => bail!("decide takes at most one --procedure"),
    };
    let decisions = match procedure {
        Some(p) => rows
            .iter()
            .map(|row| optmht_core::PValueTriple::new(*row).and_then(|t| p.apply(&t, cfg.alpha)))
            .collect(),
        None => {
            let (model, mu) = optimal_policy(cfg, base, section.solution.as_ref(), section.mu)?;
            decide_batch(&model, &mu, &rows)
        }
    };
    let mut records = Vec::with_capacity(rows.len());
    for (i, d) in decisions.into_iter().enumerate() {
        // Header is line 1.
        let d = d.with_context(|| format!("{}:{}: row '{}'", input.display(), i + 2, ids[i]))?;
        if d.clamped {
            eprintln!("warning: row '{}': p-values clamped into the density's range", ids[i]);
        }
        records.push(d);
    }
    write_output(out, |w| {
        let mut csv = csv::Writer::from_writer(w);
        for (id, d) in ids.iter().zip(&records) {
            let [reject1, reject2, reject3] = d.reject.map(u8::from);
            csv.serialize(DecisionRow { id, reject1, reject2, reject3, num_rejected: d.num_rejected })?;
        }
        csv.flush()?;
        Ok(())
    })
}

fn csv_error(path: &Path, e: &csv::Error) -> anyhow::Error {
    match e.position() {
        Some(pos) => anyhow::anyhow!("{}:{}: {}", path.display(), pos.line(), e),
        None => anyhow::anyhow!("{}: {}", path.display(), e),
    }
}

fn simulate(cfg: &RunConfig, base: &Path, args: &Args, compare: bool, out: Option<&Path>) -> Result<()> {
    let sim = &cfg.simulation;
    let names: Vec<String> = match (compare, args.procedure.is_empty()) {
        (_, false) => args.procedure.clone(),
        (true, true) => sim.procedures.clone(),
        (false, true) => vec![sim.procedure.clone()],
    };
    if !compare && names.len() != 1 {
        bail!("simulate takes exactly one procedure; use compare for several");
    }
    let parsed = names.iter().map(|n| parse_procedure(n)).collect::<Result<Vec<_>>>()?;
    let model = cfg.density(base)?;
    let mut optimal = None;
    let mut procedures = Vec::with_capacity(parsed.len());
    for p in parsed {
        procedures.push(match p {
            Some(p) => p,
            None => {
                if optimal.is_none() {
                    let (density, mu) = optimal_policy(cfg, base, sim.solution.as_ref(), sim.mu)?;
                    if density != model {
                        bail!("density in the config differs from the density of the saved solution");
                    }
                    optimal = Some(Procedure::Optimal { density, mu });
                }
                optimal.clone().unwrap()
            }
        });
    }
    let spec = SimulationSpec {
        alpha: cfg.alpha,
        n_reps: sim.n_reps,
        seed: args.seed.unwrap_or(sim.seed),
        truths: cfg.truths()?,
    };
    let reports = compare_procedures(&procedures, &model, &spec)?;
    let json = out.is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
    write_output(out, |w| if json { write_json(w, &reports) } else { write_table(w, &reports) })
}

fn write_table(w: &mut dyn Write, reports: &[PowerReport]) -> Result<()> {
    write_csv(reports, w)?;
    Ok(())
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

fn write_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut file = io::BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?);
            f(&mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}
