//! JSON run configuration.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use optmht_core::metrics::DEFAULT_REPS;
use optmht_core::{DensityModel, Multipliers, Procedure, SolverConfig, TabulatedDensity, TruthConfig};
use serde::Deserialize;
use serde_json::Value;

/// One config file drives every command; each command reads its own section.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional guard: when set it must match the subcommand.
    pub command: Option<String>,
    pub alpha: f64,
    /// A density model (`{"model": ..., "params": ...}`). A tabulated model
    /// may give `{"csv": "file.csv"}` as its params.
    pub density: Option<Value>,
    /// Solver overrides; `alpha` always comes from the top level.
    #[serde(default)]
    pub solver: Option<Value>,
    #[serde(default)]
    pub simulation: SimulationSection,
    pub decide: Option<DecideSection>,
    #[serde(default)]
    pub validate: ValidateSection,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub n_reps: usize,
    pub seed: u64,
    /// Canonical truth indices `l` (first `l` hypotheses false).
    pub truths: Vec<usize>,
    /// Procedure for `simulate`.
    pub procedure: String,
    /// Procedures for `compare`; the first is the reference for paired gains.
    pub procedures: Vec<String>,
    /// Saved solve to use for the optimal procedure instead of solving.
    pub solution: Option<PathBuf>,
    pub mu: Option<Multipliers>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            n_reps: DEFAULT_REPS,
            seed: 1,
            truths: vec![0, 1, 2, 3],
            procedure: "optimal".into(),
            procedures: ["optimal", "bonferroni", "holm", "hochberg", "hommel", "romano_wolf"].map(String::from).to_vec(),
            solution: None,
            mu: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecideSection {
    /// CSV with header `id,p1,p2,p3`.
    pub input: PathBuf,
    pub solution: Option<PathBuf>,
    pub mu: Option<Multipliers>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub grid_size: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self { grid_size: 1000 }
    }
}

/// Formats a JSON error as `path:line:column: message`.
pub fn json_error(path: &Path, e: &serde_json::Error) -> anyhow::Error {
    let msg = e.to_string();
    let msg = msg.rsplit_once(" at line ").map_or(msg.as_str(), |(m, _)| m);
    anyhow::anyhow!("{}:{}:{}: {}", path.display(), e.line(), e.column(), msg)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| json_error(path, &e))
}

impl RunConfig {
    /// Loads a config and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let cfg: Self = read_json(path)?;
        if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
            bail!("{}: alpha must lie in (0, 1), got {}", path.display(), cfg.alpha);
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn check_command(&self, command: &str) -> Result<()> {
        match &self.command {
            Some(c) if c != command => bail!("config is for command '{c}', not '{command}'"),
            _ => Ok(()),
        }
    }

    pub fn density(&self, base: &Path) -> Result<DensityModel> {
        let Some(spec) = &self.density else {
            bail!("config has no 'density' section");
        };
        let csv = spec.get("params").and_then(|p| p.get("csv")).and_then(Value::as_str);
        if spec.get("model").and_then(Value::as_str) == Some("tabulated") {
            if let Some(file) = csv {
                let path = base.join(file);
                let reader = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
                let table = TabulatedDensity::from_csv(reader).with_context(|| path.display().to_string())?;
                return Ok(DensityModel::Tabulated(table));
            }
        }
        let model: DensityModel = serde_json::from_value(spec.clone()).context("invalid 'density' section")?;
        model.check_params().context("invalid 'density' section")?;
        Ok(model)
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let mut cfg: SolverConfig = match &self.solver {
            Some(v) => serde_json::from_value(v.clone()).context("invalid 'solver' section")?,
            None => SolverConfig::default(),
        };
        cfg.alpha = self.alpha;
        cfg.validate().context("invalid 'solver' section")?;
        Ok(cfg)
    }

    pub fn truths(&self) -> Result<Vec<TruthConfig>> {
        self.simulation
            .truths
            .iter()
            .map(|&l| {
                if l > 3 {
                    bail!("simulation.truths: index {l} out of range 0..=3");
                }
                Ok(TruthConfig::canonical(l))
            })
            .collect()
    }
}

/// Parses a procedure name; `optimal` is returned as `None`.
pub fn parse_procedure(name: &str) -> Result<Option<Procedure>> {
    if name.eq_ignore_ascii_case("optimal") {
        return Ok(None);
    }
    Ok(Some(name.parse()?))
}
