//! Saddle-search drivers: projected IMF, direct H⁻¹ IMF, projected GAD and
//! plain L² GAD, plus index-1 verification.

mod gad;
mod imf;
mod index;
mod translation;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::minmode::{Metric, MinModeOptions};

pub use gad::{gad_search, gad_step, GadStep};
pub use imf::{imf_fixed_budget, imf_search};
pub use index::{verify_index1, IndexReport, DEGENERACY_TOL};
pub use translation::{
    auxiliary_functional, auxiliary_gradient, translation_step_convex_split, translation_step_hminus1,
    translation_step_imex, RANK_ONE_BREAKDOWN,
};

/// Residuals above this abort a search as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ImfProjected,
    ImfH1,
    GadProjected,
    GadL2,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ImfProjected => "imf-projected",
            Method::ImfH1 => "imf-h1",
            Method::GadProjected => "gad-projected",
            Method::GadL2 => "gad-l2",
        }
    }

    pub fn is_imf(&self) -> bool {
        matches!(self, Method::ImfProjected | Method::ImfH1)
    }

    /// Metric of the rotation step.
    pub fn metric(&self) -> Metric {
        match self {
            Method::ImfH1 => Metric::HMinus1,
            _ => Metric::ProjectedL2,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imf-projected" => Ok(Method::ImfProjected),
            "imf-h1" => Ok(Method::ImfH1),
            "gad-projected" => Ok(Method::GadProjected),
            "gad-l2" => Ok(Method::GadL2),
            other => Err(Error::Config(format!(
                "unknown method {other:?} (expected imf-projected, imf-h1, gad-projected or gad-l2)"
            ))),
        }
    }
}

/// Starting direction for GAD.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialDirection {
    /// Seeded standard normal, projected and normalized.
    Random,
    /// Min-mode of the Hessian at the initial state.
    MinMode,
}

impl FromStr for InitialDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(InitialDirection::Random),
            "minmode" | "min-mode" => Ok(InitialDirection::MinMode),
            other => Err(Error::Config(format!("unknown v0 {other:?} (expected random or minmode)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub method: Method,
    /// Auxiliary-functional parameters; the translation steppers implement
    /// (α, β) = (0, 2).
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    /// Translation steps per cycle; 0 iterates until the step velocity falls
    /// below `inner_tol` (at most `max_inner_iters` steps).
    pub inner_iters: usize,
    pub inner_tol: f64,
    pub max_inner_iters: usize,
    /// Stop when ‖PδF(φ)‖_{L²} ≤ outer_tol.
    pub outer_tol: f64,
    pub max_cycles: usize,
    pub gad_gamma: f64,
    pub seed: u64,
    /// Implicit shift `A` of the steppers; `None` uses the model default.
    pub stabilization: Option<f64>,
    /// Weight `B` of the implicit rank-one term; `None` uses the model default.
    pub rank_one_shift: Option<f64>,
    pub minmode_tol: f64,
    pub minmode_max_iters: usize,
    pub v0: InitialDirection,
    /// Record wall-clock seconds in the trace (otherwise the column is 0).
    pub wall_time: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            method: Method::ImfProjected,
            alpha: 0.0,
            beta: 2.0,
            dt: 0.1,
            inner_iters: 0,
            inner_tol: 1e-10,
            max_inner_iters: 100_000,
            outer_tol: 1e-8,
            max_cycles: 200,
            gad_gamma: 1.0,
            seed: 0,
            stabilization: None,
            rank_one_shift: None,
            minmode_tol: 1e-10,
            minmode_max_iters: 10_000,
            v0: InitialDirection::Random,
            wall_time: true,
        }
    }
}

impl SearchConfig {
    pub fn with_method(method: Method) -> Self {
        SearchConfig { method, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {x}")))
            }
        };
        positive("dt", self.dt)?;
        positive("outer_tol", self.outer_tol)?;
        positive("inner_tol", self.inner_tol)?;
        positive("gad_gamma", self.gad_gamma)?;
        positive("minmode_tol", self.minmode_tol)?;
        if !(self.alpha + self.beta > 1.0) {
            return Err(Error::Config(format!(
                "alpha + beta must exceed 1, got {} + {}",
                self.alpha, self.beta
            )));
        }
        if self.method.is_imf() && (self.alpha != 0.0 || self.beta != 2.0) {
            return Err(Error::Config(
                "the translation steppers implement alpha = 0, beta = 2 only".into(),
            ));
        }
        for (name, x) in [("stabilization", self.stabilization), ("rank_one_shift", self.rank_one_shift)] {
            if let Some(x) = x {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::Config(format!("{name} must be non-negative, got {x}")));
                }
            }
        }
        if self.max_inner_iters == 0 {
            return Err(Error::Config("max_inner_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn minmode_options(&self, metric: Metric) -> MinModeOptions {
        MinModeOptions { tolerance: self.minmode_tol, max_iterations: self.minmode_max_iters, metric, seed: self.seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub cycle: usize,
    /// Translation steps taken since the previous record.
    pub inner_iters: usize,
    pub residual_l2: f64,
    pub energy: f64,
    pub min_eig: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub const CSV_HEADER: &'static str = "cycle,inner_iters,residual_l2,energy,min_eig,wall_s";

    pub fn push(&mut self, record: TraceRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.cycle < record.cycle));
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual_l2).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{:.15e},{:.15e},{:.15e},{:.15e}\n",
                r.cycle, r.inner_iters, r.residual_l2, r.energy, r.min_eig, r.wall_s
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxCycles,
    Diverged,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxCycles => "max-cycles",
            Status::Diverged => "diverged",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SaddleResult {
    pub phi: Field,
    /// Final direction: H⁻¹-unit for imf-h1, L²-unit otherwise.
    pub v: Field,
    /// Final min-mode eigenvalue (or Rayleigh quotient for GAD) in the
    /// method's metric.
    pub lambda: f64,
    pub trace: ConvergenceTrace,
    pub status: Status,
    /// Largest |mean(φ) − m| over the recorded cycles.
    pub max_mass_drift: f64,
    /// Total translation (IMF) or time (GAD) steps.
    pub total_steps: usize,
    pub wall_s: f64,
}

impl SaddleResult {
    pub fn residual(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.residual_l2)
    }
}

/// Dispatches on `cfg.method`. GAD starts from `cfg.v0`.
pub fn search(model: &dyn crate::energy::EnergyModel, phi0: &Field, cfg: &SearchConfig) -> Result<SaddleResult> {
    if cfg.method.is_imf() {
        imf_search(model, phi0, cfg)
    } else {
        gad_search(model, phi0, None, cfg)
    }
}

pub(crate) fn is_divergent(residual: f64, fields: &[&Field]) -> bool {
    !(residual.is_finite() && residual <= DIVERGENCE_THRESHOLD) || fields.iter().any(|f| !f.is_finite())
}
