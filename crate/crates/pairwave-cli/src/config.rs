//! Run configuration: a single JSON file with strict schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Variational,
    Greedy,
    Bdg,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(rename = "M")]
    pub m: usize,
    /// Quadrature order; defaults to 2M.
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
}

impl BasisConfig {
    pub fn quadrature(&self) -> usize {
        self.q.unwrap_or(2 * self.m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "one")]
    pub omega: f64,
    pub g: f64,
    #[serde(default = "half")]
    pub sigma: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiccatiConfig {
    #[serde(default = "default_solver")]
    pub solver: SolverChoice,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Mandatory: every random start derives from it.
    pub seed: u64,
    /// Also solve the branch with mode 1 flipped to its outer root.
    #[serde(default = "yes")]
    pub flip: bool,
}

fn default_solver() -> SolverChoice {
    SolverChoice::All
}

fn default_tol() -> f64 {
    1e-11
}

fn default_max_iter() -> usize {
    20_000
}

fn default_restarts() -> usize {
    16
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockConfig {
    #[serde(default = "default_fock_m")]
    pub m: usize,
    #[serde(rename = "N", default = "default_fock_n")]
    pub n: usize,
    #[serde(default = "yes")]
    pub theorem2: bool,
    #[serde(default = "yes")]
    pub projectors: bool,
    #[serde(default = "yes")]
    pub conjugation: bool,
    #[serde(default = "default_conjugation_n")]
    pub conjugation_n: Vec<usize>,
    #[serde(default = "yes")]
    pub bogoliubov: bool,
    #[serde(default = "default_bogoliubov_cap")]
    pub bogoliubov_cap: usize,
}

fn default_fock_m() -> usize {
    3
}

fn default_fock_n() -> usize {
    2
}

fn default_conjugation_n() -> Vec<usize> {
    vec![4, 8, 16]
}

fn default_bogoliubov_cap() -> usize {
    8
}

impl Default for FockConfig {
    fn default() -> Self {
        Self {
            m: default_fock_m(),
            n: default_fock_n(),
            theorem2: true,
            projectors: true,
            conjugation: true,
            conjugation_n: default_conjugation_n(),
            bogoliubov: true,
            bogoliubov_cap: default_bogoliubov_cap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub basis: BasisConfig,
    pub model: ModelConfig,
    pub riccati: RiccatiConfig,
    #[serde(default)]
    pub fock: FockConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.basis.m < 2 {
            return bad(format!("basis.M must be at least 2, got {}", self.basis.m));
        }
        if self.basis.quadrature() < 2 * self.basis.m {
            return bad(format!("basis.Q must be at least 2M = {}", 2 * self.basis.m));
        }
        let m = &self.model;
        if !(m.omega > 0.0 && m.omega.is_finite()) || !(m.sigma > 0.0 && m.sigma.is_finite()) {
            return bad("model.omega and model.sigma must be positive".into());
        }
        if !(m.g >= 0.0 && m.g.is_finite()) {
            return bad(format!("model.g must be non-negative, got {}", m.g));
        }
        if m.n < 1 {
            return bad("model.N must be at least 1".into());
        }
        let r = &self.riccati;
        if !(r.tol > 0.0) || r.max_iter == 0 || r.restarts == 0 {
            return bad("riccati.tol, riccati.max_iter and riccati.restarts must be positive".into());
        }
        let f = &self.fock;
        if f.m < 2 || f.m > self.basis.m {
            return bad(format!("fock.m must lie in 2..=M, got {}", f.m));
        }
        if f.n < 1 {
            return bad("fock.N must be at least 1".into());
        }
        if f.conjugation_n.iter().any(|&n| n < 2) {
            return bad("fock.conjugation_n entries must be at least 2".into());
        }
        if f.bogoliubov_cap < 2 {
            return bad("fock.bogoliubov_cap must be at least 2".into());
        }
        if self.output.formats.is_empty() {
            return bad("output.formats must not be empty".into());
        }
        Ok(())
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}
