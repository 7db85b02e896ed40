//! Experiment configuration: a flat JSON object.
//!
//! ```json
//! {
//!   "domain": "rectangle", "lx": 1.0, "ly": 1.0, "nx": 32, "ny": 32,
//!   "a": 2.0, "q": 4.0, "eps": 0.14,
//!   "n_starts": 50, "seed": 7,
//!   "output": "runs/square"
//! }
//! ```
//!
//! `a`, the domain, and `eps` (or `eps_grid` for sweeps) have no defaults.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use neumann_rigidity::diagnostics::DiagnosticTolerances;
use neumann_rigidity::discretization::{assemble, build_disk_mesh, build_rectangle_mesh, DiscreteOperator};
use neumann_rigidity::io::read_mesh;
use neumann_rigidity::scalar_model::ModelParams;
use neumann_rigidity::solver::{NewtonOptions, SteadyStateProblem};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum DomainSpec {
    Rectangle { lx: f64, ly: f64, nx: usize, ny: usize },
    Disk { radius: f64, refinement: usize },
    /// Mesh file; a relative path is resolved against the config file's
    /// directory.
    Mesh { mesh_file: PathBuf },
}

fn default_q() -> f64 {
    4.0
}
fn default_n_starts() -> usize {
    50
}
fn default_eig_tol() -> f64 {
    1e-10
}
fn default_amplitude() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub domain: DomainSpec,
    pub a: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(default = "default_n_starts")]
    pub n_starts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Absolute Newton tolerance; the solver default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    /// Sup-norm cap on Newton steps; `null` disables it.
    #[serde(default = "default_max_step")]
    pub newton_max_step: Option<f64>,
    #[serde(default = "default_eig_tol")]
    pub eig_tol: f64,
    /// Base tolerance of the diagnostics suite; the Newton tolerance when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag_tol: Option<f64>,
    /// `M` values for which `constants` reports `K(M) / μ₁`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m_values: Vec<f64>,
    /// Bisection bracket for `bifurcate`; `[0.5, 1.5]` times the predicted
    /// `ε*` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<[f64; 2]>,
    /// Switch amplitude in units of `ξ_a`.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Continuation schedule for `bifurcate`, in absolute `ε`;
    /// `0.90, 0.85, …, 0.50` times the predicted `ε*` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Directory of the config file, for resolving a relative mesh path.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_max_step() -> Option<f64> {
    NewtonOptions::default().max_step
}

const KNOWN_KEYS: &[&str] = &[
    "domain",
    "lx",
    "ly",
    "nx",
    "ny",
    "radius",
    "refinement",
    "mesh_file",
    "a",
    "q",
    "eps",
    "eps_grid",
    "n_starts",
    "seed",
    "newton_tol",
    "newton_max_step",
    "eig_tol",
    "diag_tol",
    "m_values",
    "bracket",
    "amplitude",
    "branch_schedule",
    "output",
];

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{name} must be positive (got {v})")))
    }
}

impl ExperimentConfig {
    /// Parses and validates a config. Unknown keys are rejected so that a
    /// misspelt tolerance cannot silently fall back to its default.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config is not valid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::Validation("config must be a JSON object".into()))?;
        let unknown: BTreeSet<&str> = obj
            .keys()
            .map(String::as_str)
            .filter(|k| !KNOWN_KEYS.contains(k))
            .collect();
        if !unknown.is_empty() {
            return Err(CliError::Validation(format!("unknown config keys: {unknown:?}")));
        }
        for key in ["domain", "a"] {
            if !obj.contains_key(key) {
                return Err(CliError::Validation(format!("missing required key `{key}`")));
            }
        }
        let config: Self =
            serde_json::from_value(value).map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that does not need the mesh.
    pub fn validate(&self) -> CliResult<()> {
        ModelParams::new(self.a, self.eps.unwrap_or(1.0), self.q).map_err(|e| CliError::Validation(e.to_string()))?;
        if let Some(grid) = &self.eps_grid {
            for &e in grid {
                positive("every eps_grid entry", e)?;
            }
        }
        match &self.domain {
            DomainSpec::Rectangle { lx, ly, nx, ny } => {
                positive("lx", *lx)?;
                positive("ly", *ly)?;
                if *nx < 2 || *ny < 2 {
                    return Err(CliError::Validation(format!("nx and ny must be at least 2 (got {nx}, {ny})")));
                }
            }
            DomainSpec::Disk { radius, refinement } => {
                positive("radius", *radius)?;
                if *refinement < 1 {
                    return Err(CliError::Validation("refinement must be at least 1".into()));
                }
            }
            DomainSpec::Mesh { .. } => {}
        }
        if self.n_starts == 0 {
            return Err(CliError::Validation("n_starts must be at least 1".into()));
        }
        positive("eig_tol", self.eig_tol)?;
        for (name, v) in [
            ("newton_tol", self.newton_tol),
            ("newton_max_step", self.newton_max_step),
            ("diag_tol", self.diag_tol),
        ] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if self.amplitude == 0.0 || !self.amplitude.is_finite() {
            return Err(CliError::Validation(format!("amplitude must be nonzero (got {})", self.amplitude)));
        }
        if let Some([lo, hi]) = self.bracket {
            positive("bracket lower end", lo)?;
            positive("bracket upper end", hi)?;
        }
        if let Some(s) = &self.branch_schedule {
            for &e in s {
                positive("every branch_schedule entry", e)?;
            }
        }
        Ok(())
    }

    pub fn require_eps(&self) -> CliResult<f64> {
        self.eps
            .ok_or_else(|| CliError::Validation("this command needs `eps`".into()))
    }

    pub fn require_grid(&self) -> CliResult<&[f64]> {
        match &self.eps_grid {
            Some(g) if !g.is_empty() => Ok(g),
            Some(_) => Err(CliError::Validation("eps_grid must not be empty".into())),
            None => Err(CliError::Validation("this command needs `eps_grid`".into())),
        }
    }

    pub fn mesh_path(&self) -> Option<PathBuf> {
        match &self.domain {
            DomainSpec::Mesh { mesh_file } if mesh_file.is_relative() => {
                Some(self.base_dir.as_deref().unwrap_or(Path::new(".")).join(mesh_file))
            }
            DomainSpec::Mesh { mesh_file } => Some(mesh_file.clone()),
            _ => None,
        }
    }

    pub fn operator(&self) -> CliResult<DiscreteOperator> {
        let mesh = match &self.domain {
            DomainSpec::Rectangle { lx, ly, nx, ny } => build_rectangle_mesh(*nx, *ny, *lx, *ly)?,
            DomainSpec::Disk { radius, refinement } => build_disk_mesh(*refinement, *radius)?,
            DomainSpec::Mesh { .. } => read_mesh(&self.mesh_path().expect("mesh domain"))?,
        };
        Ok(assemble(&mesh)?)
    }

    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.newton_tol,
            max_step: self.newton_max_step,
            ..NewtonOptions::default()
        }
    }

    /// Operator, `ξ_a`, `μ₁`, and solver settings.
    pub fn problem(&self) -> CliResult<SteadyStateProblem> {
        let op = self.operator()?;
        let mut problem = SteadyStateProblem::new(op, self.a, self.q, self.eig_tol)?.with_newton(self.newton_options());
        if let Some(t) = self.diag_tol {
            problem.diagnostic_tolerances = DiagnosticTolerances::from_newton_tol(t);
        }
        Ok(problem)
    }
}
