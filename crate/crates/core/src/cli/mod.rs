//! Command-line front end.
//!
//! Exit codes: 0 success (and certified, where applicable), 1 usage or parse
//! error, 2 validation or certification failure, 3 solver failure.

pub mod problem;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{self, BoundReport};
use crate::error::Error;
use crate::gaussmat::LogBase;
use crate::model::{self, assemble_joint, Mechanism};
use crate::sdp::{
    certify, synthesize, tradeoff_curve, Certificate, Diagnostics, DistortionBudget, SolveStatus, SynthesisResult,
};
use crate::sim::{self, Estimate, Family};

use problem::{EpsilonField, InputError, MatrixJson, MechanismFile, Problem, ProblemFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "gaussmech",
    version,
    about = "Synthesize and validate optimal Gaussian privacy mechanisms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a problem file.
    Validate(ValidateArgs),
    /// Solve for the leakage-optimal mechanism and certify it.
    Synthesize(SynthesizeArgs),
    /// Optimal leakage over a grid of distortion budgets, as CSV.
    Tradeoff(TradeoffArgs),
    /// Monte Carlo validation of a mechanism.
    Simulate(SimulateArgs),
    /// Log-concave leakage bounds.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TradeoffArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated, strictly increasing budgets, e.g. "0.5,1,2".
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon_grid: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Laplace,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Laplace => Family::Laplace,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// A synthesis result file, or "inline" to synthesize from the problem.
    #[arg(long)]
    pub mechanism: String,
    /// Replaces the problem's budget, a number or "unconstrained".
    #[arg(long, value_parser = EpsilonField::parse)]
    pub epsilon: Option<EpsilonField>,
    #[arg(long, value_enum, default_value_t = FamilyArg::Gaussian)]
    pub family: FamilyArg,
    #[arg(long)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-sample CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary JSON; stdout when omitted.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Problem file supplying n = n_s + n_y and the log base.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Gaussian-surrogate leakage.
    #[arg(long, conflicts_with = "from_result")]
    pub leakage: Option<f64>,
    /// Synthesis result file supplying the leakage (and n, base).
    #[arg(long)]
    pub from_result: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `std::env::args` and runs; returns the process exit code.
pub fn main() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            }
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(m: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: m.into(),
        }
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        let code = match &e {
            InputError::Parse(_) => EXIT_USAGE,
            InputError::Invalid(inner) => exit_code(inner),
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NumericalBreakdown(_) => EXIT_SOLVER,
        Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_INVALID,
    }
}

fn io_failure(path: Option<&Path>, e: io::Error) -> Failure {
    Failure::usage(match path {
        Some(p) => format!("{}: {e}", p.display()),
        None => e.to_string(),
    })
}

pub fn run(cli: Cli) -> i32 {
    let r = match cli.command {
        Command::Validate(a) => cmd_validate(&a),
        Command::Synthesize(a) => cmd_synthesize(&a),
        Command::Tradeoff(a) => cmd_tradeoff(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Bounds(a) => cmd_bounds(&a),
    };
    match r {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_failure(Some(p), e))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), Failure> {
    let mut out = open_out(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| io_failure(path, e.into()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| io_failure(path, e))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Serialize)]
struct Leakage {
    value: f64,
    base: LogBase,
    unit: &'static str,
}

impl Leakage {
    fn new(value: f64, base: LogBase) -> Self {
        Leakage {
            value,
            base,
            unit: base.unit(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ValidateReport {
    valid: bool,
    n_s: usize,
    n_y: usize,
    epsilon: EpsilonField,
    log_base: LogBase,
}

fn cmd_validate(a: &ValidateArgs) -> Result<i32, Failure> {
    let file = ProblemFile::load(&a.input)?;
    let Problem { spec, cfg } = file.problem(None)?;
    write_json(
        None,
        &ValidateReport {
            valid: true,
            n_s: spec.prior.n_s(),
            n_y: spec.prior.n_y(),
            epsilon: spec.budget.into(),
            log_base: cfg.log_base,
        },
    )?;
    Ok(EXIT_OK)
}

/// Written by `synthesize`; read back by `simulate --mechanism` and
/// `bounds --from-result`.
#[derive(Debug, Serialize)]
struct SynthesisOutput {
    schema_version: &'static str,
    generated_at_unix: u64,
    status: SolveStatus,
    certified: bool,
    n_s: usize,
    n_y: usize,
    epsilon: EpsilonField,
    leakage: Leakage,
    achieved_distortion: f64,
    g: MatrixJson,
    sigma_v: MatrixJson,
    sigma_z: MatrixJson,
    pi: MatrixJson,
    certificate: Certificate,
    diagnostics: Diagnostics,
}

#[derive(Debug, Serialize)]
struct SolverFailureOutput {
    schema_version: &'static str,
    generated_at_unix: u64,
    status: &'static str,
    error: String,
}

fn synthesis_output(p: &Problem, r: &SynthesisResult, cert: Certificate) -> SynthesisOutput {
    SynthesisOutput {
        schema_version: problem::SCHEMA_VERSION,
        generated_at_unix: unix_now(),
        status: r.status,
        certified: cert.passed,
        n_s: p.spec.prior.n_s(),
        n_y: p.spec.prior.n_y(),
        epsilon: p.spec.budget.into(),
        leakage: Leakage::new(r.leakage, r.log_base),
        achieved_distortion: r.achieved_distortion,
        g: (&r.g).into(),
        sigma_v: r.sigma_v.as_matrix().into(),
        sigma_z: r.sigma_z.as_matrix().into(),
        pi: r.pi.as_matrix().into(),
        certificate: cert,
        diagnostics: r.diagnostics.clone(),
    }
}

fn write_synthesis_csv(path: Option<&Path>, o: &SynthesisOutput) -> Result<(), Failure> {
    let csv_err = |e: csv::Error| Failure::usage(format!("csv write failed: {e}"));
    let mut wtr = csv::Writer::from_writer(open_out(path)?);
    wtr.write_record(["field", "row", "col", "value"]).map_err(csv_err)?;
    let scalar = |name: &str, v: String| [name.to_string(), String::new(), String::new(), v];
    wtr.write_record(scalar("status", format!("{:?}", o.status).to_lowercase()))
        .map_err(csv_err)?;
    wtr.write_record(scalar("certified", o.certified.to_string()))
        .map_err(csv_err)?;
    wtr.write_record(scalar(
        &format!("leakage_{}", o.leakage.unit),
        o.leakage.value.to_string(),
    ))
    .map_err(csv_err)?;
    wtr.write_record(scalar("achieved_distortion", o.achieved_distortion.to_string()))
        .map_err(csv_err)?;
    for (name, m) in [
        ("g", &o.g),
        ("sigma_v", &o.sigma_v),
        ("sigma_z", &o.sigma_z),
        ("pi", &o.pi),
    ] {
        for (i, row) in m.data.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                wtr.write_record([name.to_string(), i.to_string(), j.to_string(), v.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    for c in &o.certificate.checks {
        wtr.write_record(scalar(&format!("margin_{}", c.name), c.margin.to_string()))
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| io_failure(path, e))
}

fn cmd_synthesize(a: &SynthesizeArgs) -> Result<i32, Failure> {
    let p = ProblemFile::load(&a.input)?.problem(None)?;
    let r = match synthesize(&p.spec, &p.cfg) {
        Ok(r) => r,
        Err(e) => {
            let code = exit_code(&e);
            if code == EXIT_SOLVER {
                write_json(
                    a.out.as_deref(),
                    &SolverFailureOutput {
                        schema_version: problem::SCHEMA_VERSION,
                        generated_at_unix: unix_now(),
                        status: "failed",
                        error: e.to_string(),
                    },
                )?;
            }
            return Err(e.into());
        }
    };
    let cert = certify(&p.spec, &r, &p.cfg);
    let out = synthesis_output(&p, &r, cert);
    match a.format {
        Format::Json => write_json(a.out.as_deref(), &out)?,
        Format::Csv => write_synthesis_csv(a.out.as_deref(), &out)?,
    }
    if r.status != SolveStatus::Optimal {
        eprintln!("error: solver stopped with status {:?}", r.status);
        return Ok(EXIT_SOLVER);
    }
    if !out.certified {
        eprintln!("error: certification failed: {}", out.certificate.failed().join(", "));
        return Ok(EXIT_INVALID);
    }
    Ok(EXIT_OK)
}

fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    if s.trim().is_empty() {
        return Err(Failure::usage("--epsilon-grid is empty"));
    }
    let grid = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Failure::usage(format!("--epsilon-grid: not a number: {t:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if grid.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Failure::usage("--epsilon-grid values must be positive"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Failure::usage("--epsilon-grid must be strictly increasing"));
    }
    Ok(grid)
}

fn cmd_tradeoff(a: &TradeoffArgs) -> Result<i32, Failure> {
    let grid = parse_grid(&a.epsilon_grid)?;
    let file = ProblemFile::load(&a.input)?;
    let p = file.problem(Some(DistortionBudget::Bounded(grid[0])))?;
    let curve = tradeoff_curve(&p.spec.prior, &p.spec.w, &grid, &p.cfg)?;

    let csv_err = |e: csv::Error| Failure::usage(format!("csv write failed: {e}"));
    let mut wtr = csv::Writer::from_writer(open_out(a.out.as_deref())?);
    let leak_col = format!("leakage_{}", curve.log_base.unit());
    wtr.write_record(["epsilon", leak_col.as_str(), "achieved_distortion", "status", "detail"])
        .map_err(csv_err)?;
    let mut all_ok = true;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for pt in &curve.points {
        let status = match (&pt.status, &pt.error) {
            (Some(SolveStatus::Optimal), _) => "optimal",
            (Some(SolveStatus::MaxIterations), _) => "max_iterations",
            (Some(SolveStatus::Infeasible), _) => "infeasible",
            (None, _) => "error",
        };
        all_ok &= status == "optimal";
        wtr.write_record([
            pt.epsilon.to_string(),
            opt(pt.leakage),
            opt(pt.achieved_distortion),
            status.to_string(),
            pt.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| io_failure(a.out.as_deref(), e))?;
    Ok(if all_ok { EXIT_OK } else { EXIT_SOLVER })
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    family: Family,
    samples: usize,
    seed: u64,
    epsilon: EpsilonField,
    empirical_distortion: Estimate,
    analytic_distortion: f64,
    mse_from_z: Estimate,
    mse_from_y: Estimate,
    analytic_mse_from_z: f64,
    analytic_mse_from_y: f64,
    /// Gaussian formula on the sample covariance of `(z, s)`; for Laplace
    /// data this is the Gaussian-surrogate leakage, not the true MI.
    plugin_leakage: Option<Leakage>,
    plugin_leakage_note: String,
    analytic_gaussian_leakage: Leakage,
    bounds: BoundReport,
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32, Failure> {
    if a.samples == 0 {
        return Err(Failure::usage("--samples must be at least 1"));
    }
    let file = ProblemFile::load(&a.input)?;
    let p = file.problem(a.epsilon.map(EpsilonField::budget))?;
    let (prior, w, base) = (&p.spec.prior, &p.spec.w, p.cfg.log_base);

    let mech: Mechanism = if a.mechanism == "inline" {
        let r = synthesize(&p.spec, &p.cfg)?;
        let cert = certify(&p.spec, &r, &p.cfg);
        if r.status != SolveStatus::Optimal {
            return Err(Failure {
                code: EXIT_SOLVER,
                message: format!("solver stopped with status {:?}", r.status),
            });
        }
        if !cert.passed {
            return Err(Failure {
                code: EXIT_INVALID,
                message: format!("certification failed: {}", cert.failed().join(", ")),
            });
        }
        r.mechanism()?
    } else {
        let m = problem::read_json::<MechanismFile>(Path::new(&a.mechanism))?.mechanism()?;
        if m.dim() != prior.n_y() {
            return Err(Error::dims("mechanism vs prior n_y", prior.n_y(), m.dim()).into());
        }
        if let Some(eps) = p.spec.epsilon() {
            let d = model::distortion(prior, &m, w)?;
            if d > eps * (1.0 + crate::sdp::DISTORTION_SLACK) {
                return Err(Failure {
                    code: EXIT_INVALID,
                    message: format!("mechanism distortion {d} exceeds budget {eps}"),
                });
            }
        }
        m
    };

    let joint = assemble_joint(prior, &mech)?;
    let batch = sim::sample_prior(prior, a.family.into(), a.samples, a.seed)?;
    let batch = sim::apply_mechanism(&batch, &mech, a.seed)?;
    let (from_z, from_y) = sim::adversary_estimates(&batch, &joint, prior)?;
    let out = File::create(&a.out).map_err(|e| io_failure(Some(&a.out), e))?;
    sim::write_csv(&batch, Some((&from_z, &from_y)), BufWriter::new(out))?;

    let (mse_from_z, mse_from_y) = sim::adversary_mse(&batch, &joint, prior)?;
    let y_joint = sim::undistorted_joint(prior);
    let (plugin_leakage, plugin_leakage_note) = match sim::plugin_leakage(&batch, base) {
        Ok(v) => (
            Some(Leakage::new(v, base)),
            "gaussian plug-in estimate from sample covariances".to_string(),
        ),
        Err(e @ Error::InsufficientSamples { .. }) => (None, e.to_string()),
        Err(e) => return Err(e.into()),
    };
    let gaussian = model::mutual_information(prior, &mech, base)?;
    let summary = SimulationSummary {
        family: a.family.into(),
        samples: a.samples,
        seed: a.seed,
        epsilon: p.spec.budget.into(),
        empirical_distortion: sim::empirical_distortion(&batch, w)?,
        analytic_distortion: model::distortion(prior, &mech, w)?,
        mse_from_z,
        mse_from_y,
        analytic_mse_from_z: model::mmse_error_cov(&joint)?.trace(),
        analytic_mse_from_y: model::mmse_error_cov(&y_joint)?.trace(),
        plugin_leakage,
        plugin_leakage_note,
        analytic_gaussian_leakage: Leakage::new(gaussian, base),
        bounds: bounds::report(gaussian.max(0.0), prior.n_s() + prior.n_y(), base)?,
    };
    write_json(a.summary.as_deref(), &summary)?;
    Ok(EXIT_OK)
}

#[derive(Debug, serde::Deserialize)]
struct ResultLeakage {
    value: f64,
    base: LogBase,
}

#[derive(Debug, serde::Deserialize)]
struct ResultFile {
    n_s: usize,
    n_y: usize,
    leakage: ResultLeakage,
}

fn cmd_bounds(a: &BoundsArgs) -> Result<i32, Failure> {
    let result = match &a.from_result {
        Some(path) => Some(problem::read_json::<ResultFile>(path)?),
        None => None,
    };
    let (leakage, mut n, mut base) = match (&result, a.leakage) {
        (Some(r), _) => (r.leakage.value, Some(r.n_s + r.n_y), r.leakage.base),
        (None, Some(l)) => (l, None, LogBase::Two),
        (None, None) => return Err(Failure::usage("one of --leakage or --from-result is required")),
    };
    if let Some(path) = &a.input {
        let file = ProblemFile::load(path)?;
        let prior = file.prior()?;
        if result.is_none() {
            base = file.log_base;
        }
        let from_input = prior.n_s() + prior.n_y();
        if n.is_some_and(|m| m != from_input) {
            return Err(Error::dims("result vs problem n_s + n_y", from_input, n.unwrap_or(0)).into());
        }
        n = Some(from_input);
    }
    let n = n.ok_or_else(|| Failure::usage("--input is required to determine n"))?;
    write_json(a.out.as_deref(), &bounds::report(leakage, n, base)?)?;
    Ok(EXIT_OK)
}
