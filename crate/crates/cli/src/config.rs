//! Experiment configuration: defaults per experiment, a flat `key=value` file
//! format and flag overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("{0}")]
    Range(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Dirichlet,
    Neumann,
    PatchTest,
    GmresBench,
    HStudy,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Dirichlet => "dirichlet",
            Experiment::Neumann => "neumann",
            Experiment::PatchTest => "patch-test",
            Experiment::GmresBench => "gmres-bench",
            Experiment::HStudy => "h-study",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dirichlet" => Ok(Experiment::Dirichlet),
            "neumann" => Ok(Experiment::Neumann),
            "patch-test" => Ok(Experiment::PatchTest),
            "gmres-bench" => Ok(Experiment::GmresBench),
            "h-study" => Ok(Experiment::HStudy),
            _ => Err("expected dirichlet, neumann, patch-test, gmres-bench or h-study".into()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SolverKind {
    Multiplicative,
    Additive,
    Gmres,
    GmresBj,
    GmresBgs,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Multiplicative => "multiplicative",
            SolverKind::Additive => "additive",
            SolverKind::Gmres => "gmres",
            SolverKind::GmresBj => "gmres-bj",
            SolverKind::GmresBgs => "gmres-bgs",
        }
    }

    pub fn is_schwarz(self) -> bool {
        matches!(self, SolverKind::Multiplicative | SolverKind::Additive)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <SolverKind as clap::ValueEnum>::from_str(s, false)
    }
}

/// Polynomial boundary data of the patch test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PatchKind {
    /// `g = x1 + x2`, `f = 0`.
    Linear,
    /// `p = x1^2` with the matching manufactured forcing.
    Quadratic,
}

impl FromStr for PatchKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <PatchKind as clap::ValueEnum>::from_str(s, false)
    }
}

/// Fully resolved settings of one CLI run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Mesh size; `None` runs the experiment's default sweep where it has one.
    pub h: Option<f64>,
    pub delta: f64,
    pub delta2: Option<f64>,
    pub s: Option<f64>,
    pub solver: SolverKind,
    pub tol: Option<f64>,
    pub inner_tol: f64,
    pub max_iters: usize,
    pub theta: f64,
    pub out: Option<PathBuf>,
    /// Mesh size of the h-study reference solution.
    pub reference_h: f64,
    pub patch: PatchKind,
}

pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_H: f64 = 0.1;
pub const DEFAULT_REFERENCE_H: f64 = 0.025;

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            h: None,
            delta: DEFAULT_DELTA,
            delta2: None,
            s: None,
            solver: SolverKind::Multiplicative,
            tol: None,
            inner_tol: 1e-12,
            max_iters: 10_000,
            theta: 1.0,
            out: None,
            reference_h: DEFAULT_REFERENCE_H,
            patch: PatchKind::Linear,
        }
    }

    /// Fractional order: 0.5 for the Dirichlet run and the GMRES bench, 0.6 for the patch test.
    pub fn order(&self) -> f64 {
        self.s.unwrap_or(match self.experiment {
            Experiment::PatchTest => 0.6,
            _ => 0.5,
        })
    }

    pub fn mesh_size(&self) -> f64 {
        self.h.unwrap_or(DEFAULT_H)
    }

    /// Horizon of the second kernel piece; defaults to `delta`.
    pub fn horizon2(&self) -> f64 {
        self.delta2.unwrap_or(self.delta)
    }

    /// Outer tolerance: absolute residual for Schwarz, relative for GMRES.
    /// The h-study solves tighter so that solver error stays below the
    /// discretization error.
    pub fn tolerance(&self) -> f64 {
        self.tol.unwrap_or(match self.experiment {
            Experiment::HStudy => 1e-11,
            Experiment::GmresBench => 1e-10,
            _ if !self.solver.is_schwarz() => 1e-10,
            _ => 1e-9,
        })
    }

    /// Apply one `key=value` setting; keys match the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::Value { key: key.into(), value: value.into(), reason: reason.into() };
        let num = || value.parse::<f64>().map_err(|_| bad("not a number"));
        match key {
            "experiment" => self.experiment = value.parse().map_err(|e: String| bad(&e))?,
            "h" => self.h = Some(num()?),
            "delta" => self.delta = num()?,
            "delta2" => self.delta2 = Some(num()?),
            "s" => self.s = Some(num()?),
            "solver" => self.solver = value.parse().map_err(|e: String| bad(&e))?,
            "tol" => self.tol = Some(num()?),
            "inner-tol" => self.inner_tol = num()?,
            "max-iters" => self.max_iters = value.parse().map_err(|_| bad("not a nonnegative integer"))?,
            "theta" => self.theta = num()?,
            "out" => self.out = Some(PathBuf::from(value)),
            "reference-h" => self.reference_h = num()?,
            "patch" => self.patch = value.parse().map_err(|e: String| bad(&e))?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Apply a flat `key=value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.into() })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        self.apply_text(&text)
    }

    /// Check ranges before any work starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |ok: bool, msg: String| if ok { Ok(()) } else { Err(ConfigError::Range(msg)) };
        if let Some(h) = self.h {
            range(h > 0.0 && h <= 0.5, format!("h must lie in (0, 0.5], got {h}"))?;
        }
        range(self.delta > 0.0 && self.delta <= 0.5, format!("delta must lie in (0, 0.5], got {}", self.delta))?;
        if let Some(d2) = self.delta2 {
            range(d2 > 0.0 && d2 <= self.delta, format!("delta2 must lie in (0, delta], got {d2}"))?;
        }
        if let Some(s) = self.s {
            range(s > 0.0 && s < 1.0, format!("s must lie in (0, 1), got {s}"))?;
        }
        let tol = self.tolerance();
        range(tol > 0.0 && tol < 1.0, format!("tol must lie in (0, 1), got {tol}"))?;
        range(
            self.inner_tol > 0.0 && self.inner_tol <= tol,
            format!("inner-tol must lie in (0, tol], got {}", self.inner_tol),
        )?;
        range(self.max_iters > 0, "max-iters must be positive".into())?;
        range(self.theta > 0.0 && self.theta <= 2.0, format!("theta must lie in (0, 2], got {}", self.theta))?;
        range(
            self.reference_h > 0.0 && self.reference_h <= 0.05,
            format!("reference-h must lie in (0, 0.05], got {}", self.reference_h),
        )?;
        if self.experiment == Experiment::Neumann && self.solver != SolverKind::Multiplicative {
            return Err(ConfigError::Range("the Neumann experiment supports the multiplicative solver only".into()));
        }
        Ok(())
    }
}
