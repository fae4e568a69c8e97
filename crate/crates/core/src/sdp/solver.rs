//! Path-following barrier method for the log-det program.
//!
//! Minimizes `t (-log det Pi) - sum_k log det F_k(x)` for an increasing
//! schedule of `t`, centering with damped Newton steps. On the central path
//! the duality gap equals `nu / t` where `nu` is the sum of block sizes.

use nalgebra::Cholesky;
use serde::Serialize;

use super::program::{BlockKind, LogDetProgram, Point};
use crate::error::{Error, Result};
use crate::gaussmat::{LogBase, Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Initial barrier weight on the objective.
    pub t0: f64,
    /// Multiplicative growth of `t` per outer iteration.
    pub growth: f64,
    /// Centering stops when half the squared Newton decrement falls below this.
    pub newton_tol: f64,
    /// Relative duality-gap target.
    pub gap_tol: f64,
    pub max_outer: usize,
    /// Newton iterations allowed per centering step.
    pub max_newton: usize,
    /// Strict-feasibility margin of the noise-covariance LMI, relative to
    /// `tr(sigma_y) / n_y`.
    pub lmi_b_margin: f64,
    pub pd_tol: f64,
    pub log_base: LogBase,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            t0: 1.0,
            growth: 10.0,
            newton_tol: 1e-10,
            gap_tol: 1e-7,
            max_outer: 100,
            max_newton: 200,
            lmi_b_margin: 1e-8,
            pd_tol: crate::gaussmat::DEFAULT_PD_TOL,
            log_base: LogBase::Two,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t0", self.t0),
            ("newton_tol", self.newton_tol),
            ("gap_tol", self.gap_tol),
            ("lmi_b_margin", self.lmi_b_margin),
            ("pd_tol", self.pd_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "solver {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.growth > 1.0) || !self.growth.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "solver growth must exceed 1, got {}",
                self.growth
            )));
        }
        if self.max_outer == 0 || self.max_newton == 0 {
            return Err(Error::InvalidArgument("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    pub final_t: f64,
    /// Duality-gap bound `nu / t` in nats of the objective.
    pub duality_gap: f64,
    /// `-log det Pi` at the returned point, nats.
    pub objective: f64,
    pub barrier_degree: usize,
    /// Absolute margin applied to the noise-covariance LMI.
    pub lmi_b_margin: f64,
    /// Smallest eigenvalue of each block (minus its margin) at the returned point.
    pub block_margins: Vec<(BlockKind, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub point: Point,
    pub status: SolveStatus,
    pub diagnostics: Diagnostics,
}

/// Per-solve state: the program plus the absolute margin of each block.
struct Barrier<'a> {
    prog: &'a LogDetProgram,
    margins: Vec<f64>,
}

struct Derivatives {
    value: f64,
    grad: Vector,
    hess: Matrix,
}

impl<'a> Barrier<'a> {
    fn new(prog: &'a LogDetProgram, lmi_b_margin: f64) -> Self {
        let margins = prog
            .blocks
            .iter()
            .map(|b| {
                if b.kind == BlockKind::NoiseCovariance {
                    lmi_b_margin
                } else {
                    0.0
                }
            })
            .collect();
        Barrier { prog, margins }
    }

    fn weight(kind: BlockKind, t: f64) -> f64 {
        if kind == BlockKind::Pi {
            t + 1.0
        } else {
            1.0
        }
    }

    fn shifted(&self, k: usize, x: &Vector) -> Matrix {
        let b = &self.prog.blocks[k];
        let mut m = b.eval(x).into_inner();
        if self.margins[k] != 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] -= self.margins[k];
            }
        }
        m
    }

    /// Barrier value, or `None` if `x` is outside the domain.
    fn value(&self, x: &Vector, t: f64) -> Option<f64> {
        let mut f = 0.0;
        for (k, b) in self.prog.blocks.iter().enumerate() {
            let chol = Cholesky::new(self.shifted(k, x))?;
            let ld: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            f -= Self::weight(b.kind, t) * ld;
        }
        f.is_finite().then_some(f)
    }

    fn derivatives(&self, x: &Vector, t: f64) -> Option<Derivatives> {
        let m = self.prog.layout.len();
        let mut grad = Vector::zeros(m);
        let mut hess = Matrix::zeros(m, m);
        let mut value = 0.0;
        for (k, b) in self.prog.blocks.iter().enumerate() {
            let w = Self::weight(b.kind, t);
            let chol = Cholesky::new(self.shifted(k, x))?;
            value -= w * 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            let inv = chol.inverse();
            // M_i = F^{-1} F_i, kept with its transpose for tr(M_i M_j)
            let ms: Vec<(usize, Matrix)> = b.terms().iter().map(|(i, c)| (*i, &inv * c)).collect();
            let mts: Vec<Matrix> = ms.iter().map(|(_, mi)| mi.transpose()).collect();
            for (a, (ia, ma)) in ms.iter().enumerate() {
                grad[*ia] -= w * ma.trace();
                for (bi, (ib, _)) in ms.iter().enumerate().skip(a) {
                    let h = w * ma.dot(&mts[bi]);
                    hess[(*ia, *ib)] += h;
                    if ia != ib {
                        hess[(*ib, *ia)] += h;
                    }
                }
            }
        }
        value.is_finite().then_some(Derivatives { value, grad, hess })
    }

    fn block_margins(&self, x: &Vector) -> Vec<(BlockKind, f64)> {
        self.prog
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let m = crate::gaussmat::SymMatrix::symmetrized(self.shifted(k, x));
                (b.kind, crate::gaussmat::min_eigenvalue(&m))
            })
            .collect()
    }
}

/// Newton direction with Jacobi scaling of the Hessian.
fn newton_step(d: &Derivatives) -> Result<Vector> {
    let n = d.grad.len();
    let scale = Vector::from_iterator(
        n,
        d.hess
            .diagonal()
            .iter()
            .map(|h| if *h > 0.0 { 1.0 / h.sqrt() } else { 1.0 }),
    );
    let mut h = d.hess.clone();
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] *= scale[i] * scale[j];
        }
    }
    let rhs = -d.grad.component_mul(&scale);
    let mut reg = 0.0;
    for _ in 0..6 {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += reg;
        }
        if let Some(chol) = Cholesky::new(hr) {
            let y = chol.solve(&rhs);
            if y.iter().all(|v| v.is_finite()) {
                return Ok(y.component_mul(&scale));
            }
        }
        reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
    }
    Err(Error::NumericalBreakdown(
        "Newton system is not positive definite".into(),
    ))
}

enum Centering {
    Converged,
    Stalled,
    IterationLimit,
}

fn center(barrier: &Barrier<'_>, x: &mut Vector, t: f64, cfg: &SolverConfig, count: &mut usize) -> Result<Centering> {
    for _ in 0..cfg.max_newton {
        let d = barrier
            .derivatives(x, t)
            .ok_or_else(|| Error::NumericalBreakdown("iterate left the barrier domain".into()))?;
        let dx = newton_step(&d)?;
        let slope = d.grad.dot(&dx);
        let lambda2 = -slope;
        if !(lambda2 >= 0.0) {
            return Err(Error::NumericalBreakdown(format!(
                "non-descent Newton direction (decrement {lambda2:e})"
            )));
        }
        if lambda2 / 2.0 <= cfg.newton_tol {
            return Ok(Centering::Converged);
        }
        *count += 1;
        let mut s = 1.0;
        // Inside the quadratic region a full step is feasible for a
        // self-concordant barrier and function values are too close to
        // compare reliably, so only feasibility is checked.
        let quadratic = lambda2.sqrt() < 0.25;
        loop {
            let trial = &*x + &dx * s;
            match barrier.value(&trial, t) {
                Some(f) if quadratic || f <= d.value + 0.25 * s * slope => {
                    *x = trial;
                    break;
                }
                _ => {
                    s *= 0.5;
                    if s < 1e-14 {
                        return Ok(Centering::Stalled);
                    }
                }
            }
        }
    }
    Ok(Centering::IterationLimit)
}

/// Solves the program from its stored strictly feasible start.
pub fn solve(prog: &LogDetProgram, cfg: &SolverConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let margin = cfg.lmi_b_margin * prog.sigma_y_scale;
    let barrier = Barrier::new(prog, margin);
    let mut x = prog.layout.pack(&prog.start);
    if barrier.value(&x, cfg.t0).is_none() {
        return Err(Error::InfeasibleSpec(format!(
            "start point violates the noise-covariance margin {margin:e}; the distortion budget is too small"
        )));
    }
    let nu = prog.barrier_degree() as f64;
    let mut t = cfg.t0;
    let mut newton = 0;
    let mut status = SolveStatus::MaxIterations;
    let mut outer = 0;
    while outer < cfg.max_outer {
        outer += 1;
        match center(&barrier, &mut x, t, cfg, &mut newton)? {
            Centering::IterationLimit => break,
            Centering::Converged | Centering::Stalled => {}
        }
        let point = prog.layout.unpack(&x);
        let f0 = prog.objective(&point);
        if nu / t <= cfg.gap_tol * f0.abs().max(1.0) {
            status = SolveStatus::Optimal;
            break;
        }
        t *= cfg.growth;
    }
    let point = prog.layout.unpack(&x);
    let diagnostics = Diagnostics {
        outer_iterations: outer,
        newton_iterations: newton,
        final_t: t,
        duality_gap: nu / t,
        objective: prog.objective(&point),
        barrier_degree: nu as usize,
        lmi_b_margin: margin,
        block_margins: barrier.block_margins(&x),
    };
    Ok(SolveOutcome {
        point,
        status,
        diagnostics,
    })
}
