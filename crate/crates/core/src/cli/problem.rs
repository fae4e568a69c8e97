//! JSON problem files and matrix (de)serialization for the command line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::gaussmat::{LogBase, Matrix, SymMatrix, Vector};
use crate::model::{Mechanism, Prior};
use crate::sdp::{DistortionBudget, SolverConfig, SynthesisSpec};

pub const SCHEMA_VERSION: &str = "1";

/// Failure while reading inputs, split by exit code.
#[derive(Debug)]
pub enum InputError {
    /// Unreadable file, malformed JSON, unknown field, ragged array.
    Parse(String),
    /// Well-formed input describing an invalid problem.
    Invalid(Error),
}

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InputError::Parse(m) => write!(f, "parse error: {m}"),
            InputError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for InputError {
    fn from(e: Error) -> Self {
        InputError::Invalid(e)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorFile {
    pub mu_s: Vec<f64>,
    pub sigma_s: Vec<Vec<f64>>,
    pub mu_y: Vec<f64>,
    pub sigma_y: Vec<Vec<f64>>,
    pub sigma_ys: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum WeightField {
    Matrix(Vec<Vec<f64>>),
    Keyword(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum EpsilonField {
    Value(f64),
    Keyword(Unconstrained),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Unconstrained {
    Unconstrained,
}

impl From<DistortionBudget> for EpsilonField {
    fn from(b: DistortionBudget) -> Self {
        match b {
            DistortionBudget::Bounded(e) => EpsilonField::Value(e),
            DistortionBudget::Unconstrained => EpsilonField::Keyword(Unconstrained::Unconstrained),
        }
    }
}

impl EpsilonField {
    pub fn budget(self) -> DistortionBudget {
        match self {
            EpsilonField::Value(e) => DistortionBudget::Bounded(e),
            EpsilonField::Keyword(_) => DistortionBudget::Unconstrained,
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "unconstrained" {
            return Ok(EpsilonField::Keyword(Unconstrained::Unconstrained));
        }
        s.parse::<f64>()
            .map(EpsilonField::Value)
            .map_err(|_| format!("expected a number or \"unconstrained\", got {s:?}"))
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub t0: Option<f64>,
    pub growth: Option<f64>,
    pub newton_tol: Option<f64>,
    pub gap_tol: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_newton: Option<usize>,
    pub lmi_b_margin: Option<f64>,
    pub pd_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: String,
    pub prior: PriorFile,
    pub w: WeightField,
    pub epsilon: EpsilonField,
    #[serde(default)]
    pub log_base: LogBase,
    #[serde(default)]
    pub solver: Option<SolverOverrides>,
}

/// A fully checked problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: SynthesisSpec,
    pub cfg: SolverConfig,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| InputError::Parse(format!("{}: {e}", path.display())))
}

pub fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<Matrix, InputError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(InputError::Parse(format!("{name}: matrix must be non-empty")));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(InputError::Parse(format!(
            "{name}: row {i} has {} entries, expected {ncols}",
            rows[i].len()
        )));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn sym_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<SymMatrix, InputError> {
    let m = matrix_from_rows(name, rows)?;
    if !m.is_square() {
        return Err(Error::dims(name, "square", format!("{}x{}", m.nrows(), m.ncols())).into());
    }
    let asym = (&m - m.transpose()).amax();
    if asym > 1e-12 * m.amax().max(1.0) {
        return Err(Error::InvalidPrior(format!("{name} is not symmetric (max asymmetry {asym:.3e})")).into());
    }
    Ok(SymMatrix::new(m)?)
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self, InputError> {
        read_json(path)
    }

    pub fn prior(&self) -> Result<Prior, InputError> {
        let p = &self.prior;
        Ok(Prior {
            mu_s: Vector::from_vec(p.mu_s.clone()),
            sigma_s: sym_from_rows("sigma_s", &p.sigma_s)?,
            mu_y: Vector::from_vec(p.mu_y.clone()),
            sigma_y: sym_from_rows("sigma_y", &p.sigma_y)?,
            sigma_ys: matrix_from_rows("sigma_ys", &p.sigma_ys)?,
        })
    }

    pub fn weight(&self, n_y: usize) -> Result<Matrix, InputError> {
        match &self.w {
            WeightField::Keyword(k) if k == "identity" => Ok(Matrix::identity(n_y, n_y)),
            WeightField::Keyword(k) => Err(InputError::Parse(format!(
                "w: expected a matrix or \"identity\", got {k:?}"
            ))),
            WeightField::Matrix(rows) => matrix_from_rows("w", rows),
        }
    }

    pub fn solver_config(&self) -> Result<SolverConfig, InputError> {
        let mut cfg = SolverConfig {
            log_base: self.log_base,
            ..SolverConfig::default()
        };
        if let Some(o) = &self.solver {
            macro_rules! apply {
                ($($f:ident),*) => { $( if let Some(v) = o.$f { cfg.$f = v; } )* };
            }
            apply!(
                t0,
                growth,
                newton_tol,
                gap_tol,
                max_outer,
                max_newton,
                lmi_b_margin,
                pd_tol
            );
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses and validates everything, optionally replacing the budget.
    pub fn problem(&self, budget: Option<DistortionBudget>) -> Result<Problem, InputError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(InputError::Parse(format!(
                "unsupported schema_version {:?}, expected {SCHEMA_VERSION:?}",
                self.schema_version
            )));
        }
        let prior = self.prior()?;
        let w = self.weight(prior.n_y())?;
        let cfg = self.solver_config()?;
        let spec = SynthesisSpec::new(prior, w, budget.unwrap_or(self.epsilon.budget()))?;
        Ok(Problem { spec, cfg })
    }
}

/// Row-major nested arrays with explicit dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

impl From<&Matrix> for MatrixJson {
    fn from(m: &Matrix) -> Self {
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self, name: &str) -> Result<Matrix, InputError> {
        let m = matrix_from_rows(name, &self.data)?;
        if m.shape() != (self.rows, self.cols) {
            return Err(InputError::Parse(format!(
                "{name}: declared {}x{} but data is {}x{}",
                self.rows,
                self.cols,
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(m)
    }
}

/// The mechanism part of a synthesis result file. Other fields are ignored.
#[derive(Debug, Clone, Deserialize)]
pub struct MechanismFile {
    pub g: MatrixJson,
    pub sigma_v: MatrixJson,
}

impl MechanismFile {
    pub fn mechanism(&self) -> Result<Mechanism, InputError> {
        let g = self.g.to_matrix("g")?;
        let sv = self.sigma_v.to_matrix("sigma_v")?;
        if !sv.is_square() {
            return Err(Error::dims("sigma_v", "square", format!("{}x{}", sv.nrows(), sv.ncols())).into());
        }
        Ok(Mechanism::new(g, SymMatrix::new(sv)?)?)
    }
}
