//! Optimal mechanism synthesis.
//!
//! [`assemble_program`] turns a [`SynthesisSpec`] into a log-det program over
//! `(Pi, sigma_z, G)`, [`solve`] runs the barrier method on it,
//! [`extract_mechanism`] recovers `sigma_v` and the achieved leakage and
//! distortion, and [`certify`] re-checks every constraint of the result.

mod certify;
mod program;
mod solver;

use rayon::prelude::*;
use serde::Serialize;

pub use certify::{certify, Certificate, CertificateCheck, DISTORTION_SLACK};
pub use program::{
    assemble_program, strictly_feasible_start, BlockKind, LmiBlock, LogDetProgram, Point, VarLayout, BOUND_SCALE,
};
pub use solver::{solve, Diagnostics, SolveOutcome, SolveStatus, SolverConfig};

use crate::error::{Error, Result};
use crate::gaussmat::{LogBase, Matrix, SymMatrix};
use crate::model::{self, validate_prior, Mechanism, Prior};

/// Upper bound on `E[||W (Z - Y)||^2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionBudget {
    Bounded(f64),
    /// No distortion constraint at all.
    Unconstrained,
}

impl DistortionBudget {
    pub fn epsilon(self) -> Option<f64> {
        match self {
            DistortionBudget::Bounded(e) => Some(e),
            DistortionBudget::Unconstrained => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisSpec {
    pub prior: Prior,
    /// Distortion weight, `n_y x n_y`.
    pub w: Matrix,
    pub budget: DistortionBudget,
}

impl SynthesisSpec {
    pub fn new(prior: Prior, w: Matrix, budget: DistortionBudget) -> Result<Self> {
        let spec = SynthesisSpec { prior, w, budget };
        spec.validate()?;
        Ok(spec)
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.budget.epsilon()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.prior.n_y();
        if self.w.shape() != (n, n) {
            return Err(Error::dims(
                "W",
                format!("{n}x{n}"),
                format!("{}x{}", self.w.nrows(), self.w.ncols()),
            ));
        }
        if let DistortionBudget::Bounded(eps) = self.budget {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(Error::InfeasibleSpec(format!(
                    "distortion budget must be positive and finite, got {eps}"
                )));
            }
            if self.w.iter().all(|v| *v == 0.0) {
                return Err(Error::InfeasibleSpec("W^T W is identically zero".into()));
            }
        }
        validate_prior(self.prior.clone())?;
        Ok(())
    }
}

/// An optimal mechanism together with the optimization variables it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub g: Matrix,
    pub sigma_z: SymMatrix,
    pub pi: SymMatrix,
    pub sigma_v: SymMatrix,
    /// `I[S; Z]` of the extracted mechanism, in `log_base`.
    pub leakage: f64,
    pub log_base: LogBase,
    pub achieved_distortion: f64,
    pub status: SolveStatus,
    pub diagnostics: Diagnostics,
}

impl SynthesisResult {
    pub fn mechanism(&self) -> Result<Mechanism> {
        Mechanism::new(self.g.clone(), self.sigma_v.clone())
    }
}

/// Recovers `sigma_v` from the solver output and evaluates the mechanism.
pub fn extract_mechanism(spec: &SynthesisSpec, outcome: &SolveOutcome, cfg: &SolverConfig) -> Result<SynthesisResult> {
    let Point { pi, sigma_z, g } = outcome.point.clone();
    let sigma_v = model::sigma_v_from(&g, &sigma_z, &spec.prior.sigma_y)?;
    let mech = Mechanism::new(g.clone(), sigma_v.clone())?;
    let leakage = model::mutual_information(&spec.prior, &mech, cfg.log_base)?;
    let achieved_distortion = model::distortion(&spec.prior, &mech, &spec.w)?;
    Ok(SynthesisResult {
        g,
        sigma_z,
        pi,
        sigma_v,
        leakage,
        log_base: cfg.log_base,
        achieved_distortion,
        status: outcome.status,
        diagnostics: outcome.diagnostics.clone(),
    })
}

/// Assemble, solve and extract in one call.
pub fn synthesize(spec: &SynthesisSpec, cfg: &SolverConfig) -> Result<SynthesisResult> {
    let prog = assemble_program(spec)?;
    let outcome = solve(&prog, cfg)?;
    extract_mechanism(spec, &outcome, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub epsilon: f64,
    pub leakage: Option<f64>,
    pub achieved_distortion: Option<f64>,
    pub status: Option<SolveStatus>,
    /// Set when the solve for this point failed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffCurve {
    pub log_base: LogBase,
    pub points: Vec<TradeoffPoint>,
}

/// Independent optimal solves over a strictly increasing grid of budgets.
///
/// Per-point failures are recorded in the curve and do not abort the sweep.
pub fn tradeoff_curve(prior: &Prior, w: &Matrix, grid: &[f64], cfg: &SolverConfig) -> Result<TradeoffCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("epsilon grid is empty".into()));
    }
    if grid.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidArgument(
            "epsilon grid values must be positive and finite".into(),
        ));
    }
    if grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument(
            "epsilon grid must be strictly increasing".into(),
        ));
    }
    cfg.validate()?;
    validate_prior(prior.clone())?;
    let points = grid
        .par_iter()
        .map(|&eps| {
            let run = SynthesisSpec::new(prior.clone(), w.clone(), DistortionBudget::Bounded(eps))
                .and_then(|spec| synthesize(&spec, cfg));
            match run {
                Ok(r) => TradeoffPoint {
                    epsilon: eps,
                    leakage: Some(r.leakage),
                    achieved_distortion: Some(r.achieved_distortion),
                    status: Some(r.status),
                    error: None,
                },
                Err(e) => TradeoffPoint {
                    epsilon: eps,
                    leakage: None,
                    achieved_distortion: None,
                    status: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(TradeoffCurve {
        log_base: cfg.log_base,
        points,
    })
}
