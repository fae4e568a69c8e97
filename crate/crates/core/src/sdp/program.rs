//! Assembly of the log-det program over `(Pi, sigma_z, G)`.
//!
//! Every constraint is an affine symmetric matrix function of the packed
//! decision vector `x`, stored as a constant plus one coefficient matrix per
//! variable that touches the block:
//!
//! ```text
//! Pi                                    >= 0
//! [[sigma_s - Pi, (G sigma_ys)^T], [G sigma_ys, sigma_z]]     >= 0   (epigraph)
//! [[sigma_z, G], [G^T, sigma_y^{-1}]]                          >  0   (noise covariance)
//! [[theta, (W (G - I) mu_y)^T], [W (G - I) mu_y, I]]           >= 0   (distortion)
//! theta = eps - tr[W^T W (sigma_z + sigma_y - G sigma_y - sigma_y G^T)]
//! ```

use serde::Serialize;

use super::{DistortionBudget, SynthesisSpec};
use crate::error::{Error, Result};
use crate::gaussmat::{self, spd_inverse, Matrix, SymMatrix, Vector};
use crate::model::{posterior_covariance, weight_gram};

/// Identifies a constraint block of the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// `Pi >= 0`; also carries the objective `-log det Pi`.
    Pi,
    /// Epigraph LMI linking `Pi` to the posterior covariance.
    Epigraph,
    /// Strict LMI equivalent to `sigma_z - G sigma_y G^T > 0`.
    NoiseCovariance,
    /// Distortion budget LMI.
    Distortion,
    /// `r I - sigma_z >= 0`, only present when the other constraints leave
    /// `sigma_z` unbounded.
    Bound,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Pi => "pi_psd",
            BlockKind::Epigraph => "lmi_a_epigraph",
            BlockKind::NoiseCovariance => "lmi_b_noise_covariance",
            BlockKind::Distortion => "lmi_c_distortion",
            BlockKind::Bound => "sigma_z_bound",
        }
    }
}

/// Index map between `(Pi, sigma_z, G)` and the packed vector `x`.
///
/// Symmetric variables are packed as their upper triangle (row-major),
/// `G` is packed row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub n_s: usize,
    pub n_y: usize,
}

fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

fn tri_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * n - i + 1) / 2 + (j - i)
}

impl VarLayout {
    pub fn len(&self) -> usize {
        tri(self.n_s) + tri(self.n_y) + self.n_y * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pi_index(&self, i: usize, j: usize) -> usize {
        tri_index(self.n_s, i, j)
    }

    pub fn sigma_z_index(&self, i: usize, j: usize) -> usize {
        tri(self.n_s) + tri_index(self.n_y, i, j)
    }

    pub fn g_index(&self, a: usize, b: usize) -> usize {
        tri(self.n_s) + tri(self.n_y) + a * self.n_y + b
    }

    pub fn pack(&self, p: &Point) -> Vector {
        let mut x = Vector::zeros(self.len());
        for i in 0..self.n_s {
            for j in i..self.n_s {
                x[self.pi_index(i, j)] = p.pi[(i, j)];
            }
        }
        for i in 0..self.n_y {
            for j in i..self.n_y {
                x[self.sigma_z_index(i, j)] = p.sigma_z[(i, j)];
            }
            for j in 0..self.n_y {
                x[self.g_index(i, j)] = p.g[(i, j)];
            }
        }
        x
    }

    pub fn unpack(&self, x: &Vector) -> Point {
        let mut pi = Matrix::zeros(self.n_s, self.n_s);
        for i in 0..self.n_s {
            for j in 0..self.n_s {
                pi[(i, j)] = x[self.pi_index(i, j)];
            }
        }
        let mut sz = Matrix::zeros(self.n_y, self.n_y);
        let mut g = Matrix::zeros(self.n_y, self.n_y);
        for i in 0..self.n_y {
            for j in 0..self.n_y {
                sz[(i, j)] = x[self.sigma_z_index(i, j)];
                g[(i, j)] = x[self.g_index(i, j)];
            }
        }
        Point {
            pi: SymMatrix::symmetrized(pi),
            sigma_z: SymMatrix::symmetrized(sz),
            g,
        }
    }

    /// Symmetric unit basis matrix `E_ij + E_ji` (or `E_ii`) of size `n`.
    fn sym_basis(n: usize, i: usize, j: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
        m
    }
}

/// A point in the decision space.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub pi: SymMatrix,
    pub sigma_z: SymMatrix,
    pub g: Matrix,
}

/// An affine symmetric matrix function `F(x) = F0 + sum_i x_i F_i`.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub kind: BlockKind,
    constant: Matrix,
    terms: Vec<(usize, Matrix)>,
}

impl LmiBlock {
    fn new(kind: BlockKind, constant: Matrix) -> Self {
        LmiBlock {
            kind,
            constant,
            terms: Vec::new(),
        }
    }

    fn add_term(&mut self, var: usize, coeff: Matrix) {
        debug_assert_eq!(coeff.shape(), self.constant.shape());
        if coeff.iter().all(|v| *v == 0.0) {
            return;
        }
        match self.terms.iter_mut().find(|(i, _)| *i == var) {
            Some((_, m)) => *m += coeff,
            None => self.terms.push((var, coeff)),
        }
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn terms(&self) -> &[(usize, Matrix)] {
        &self.terms
    }

    pub fn eval(&self, x: &Vector) -> SymMatrix {
        let mut m = self.constant.clone();
        for (i, c) in &self.terms {
            if x[*i] != 0.0 {
                m += c * x[*i];
            }
        }
        SymMatrix::symmetrized(m)
    }
}

/// The assembled program together with a strictly feasible start.
#[derive(Debug, Clone)]
pub struct LogDetProgram {
    pub layout: VarLayout,
    pub blocks: Vec<LmiBlock>,
    pub start: Point,
    pub budget: DistortionBudget,
    /// `tr(sigma_y) / n_y`; the noise-covariance margin is relative to it.
    pub sigma_y_scale: f64,
    /// Radius of the `sigma_z` bound, when present.
    pub bound_radius: Option<f64>,
}

impl LogDetProgram {
    pub fn block(&self, kind: BlockKind) -> Option<&LmiBlock> {
        self.blocks.iter().find(|b| b.kind == kind)
    }

    /// Evaluates one block at a point.
    pub fn evaluate(&self, kind: BlockKind, p: &Point) -> Option<SymMatrix> {
        self.block(kind).map(|b| b.eval(&self.layout.pack(p)))
    }

    /// `-log det Pi` (nats), or `+inf` outside the domain.
    pub fn objective(&self, p: &Point) -> f64 {
        match gaussmat::cholesky_with_tol(&p.pi, 0.0) {
            Ok(l) => -gaussmat::log_det_from_cholesky(&l),
            Err(_) => f64::INFINITY,
        }
    }

    /// Sum of block sizes, the barrier parameter of the full barrier.
    pub fn barrier_degree(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }
}

/// Builds a start point at which every block is strictly positive definite.
///
/// For a bounded budget `eps` this is `G = I`,
/// `sigma_z = sigma_y + s2 I` with `s2 = eps / (2 tr(W^T W))` (distortion
/// exactly `eps / 2`), and `Pi` equal to half the posterior covariance.
/// Without a budget it is `G = 0`, `sigma_z = (tr(sigma_y) / n_y) I`,
/// `Pi = sigma_s / 2`.
pub fn strictly_feasible_start(spec: &SynthesisSpec) -> Result<Point> {
    let p = &spec.prior;
    let n = p.n_y();
    match spec.budget {
        DistortionBudget::Bounded(eps) => {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(Error::InfeasibleSpec(format!(
                    "distortion budget must be positive and finite, got {eps}"
                )));
            }
            let tq = weight_gram(&spec.w).trace();
            if !(tq > 0.0) {
                return Err(Error::InfeasibleSpec("W^T W is identically zero".into()));
            }
            let s2 = eps / (2.0 * tq);
            let sigma_z = SymMatrix::symmetrized(p.sigma_y.as_matrix() + Matrix::identity(n, n) * s2);
            let post = posterior_covariance(&p.sigma_s, &sigma_z, &p.sigma_ys)?;
            Ok(Point {
                pi: post.scaled(0.5),
                sigma_z,
                g: Matrix::identity(n, n),
            })
        }
        DistortionBudget::Unconstrained => Ok(Point {
            pi: p.sigma_s.scaled(0.5),
            sigma_z: SymMatrix::identity(n).scaled(p.sigma_y.scale()),
            g: Matrix::zeros(n, n),
        }),
    }
}

/// Multiplier applied to the largest eigenvalue of the start `sigma_z` to
/// obtain the radius of the `sigma_z` bound.
pub const BOUND_SCALE: f64 = 100.0;

pub fn assemble_program(spec: &SynthesisSpec) -> Result<LogDetProgram> {
    spec.validate()?;
    let prior = &spec.prior;
    let (ns, ny) = (prior.n_s(), prior.n_y());
    let layout = VarLayout { n_s: ns, n_y: ny };
    let start = strictly_feasible_start(spec)?;
    let q = weight_gram(&spec.w);

    // Pi >= 0
    let mut pi_block = LmiBlock::new(BlockKind::Pi, Matrix::zeros(ns, ns));
    for i in 0..ns {
        for j in i..ns {
            pi_block.add_term(layout.pi_index(i, j), VarLayout::sym_basis(ns, i, j));
        }
    }

    // [[sigma_s - Pi, (G sigma_ys)^T], [G sigma_ys, sigma_z]]
    let na = ns + ny;
    let mut a0 = Matrix::zeros(na, na);
    a0.view_mut((0, 0), (ns, ns)).copy_from(prior.sigma_s.as_matrix());
    let mut epigraph = LmiBlock::new(BlockKind::Epigraph, a0);
    for i in 0..ns {
        for j in i..ns {
            let mut c = Matrix::zeros(na, na);
            c.view_mut((0, 0), (ns, ns))
                .copy_from(&(-VarLayout::sym_basis(ns, i, j)));
            epigraph.add_term(layout.pi_index(i, j), c);
        }
    }
    for i in 0..ny {
        for j in i..ny {
            let mut c = Matrix::zeros(na, na);
            c.view_mut((ns, ns), (ny, ny))
                .copy_from(&VarLayout::sym_basis(ny, i, j));
            epigraph.add_term(layout.sigma_z_index(i, j), c);
        }
    }
    for a in 0..ny {
        for b in 0..ny {
            // E_ab sigma_ys has row a equal to row b of sigma_ys
            let mut c = Matrix::zeros(na, na);
            for k in 0..ns {
                let v = prior.sigma_ys[(b, k)];
                c[(ns + a, k)] = v;
                c[(k, ns + a)] = v;
            }
            epigraph.add_term(layout.g_index(a, b), c);
        }
    }

    // [[sigma_z, G], [G^T, sigma_y^{-1}]]
    let nb = 2 * ny;
    let mut b0 = Matrix::zeros(nb, nb);
    b0.view_mut((ny, ny), (ny, ny))
        .copy_from(spd_inverse(&prior.sigma_y)?.as_matrix());
    let mut noise = LmiBlock::new(BlockKind::NoiseCovariance, b0);
    for i in 0..ny {
        for j in i..ny {
            let mut c = Matrix::zeros(nb, nb);
            c.view_mut((0, 0), (ny, ny)).copy_from(&VarLayout::sym_basis(ny, i, j));
            noise.add_term(layout.sigma_z_index(i, j), c);
        }
    }
    for a in 0..ny {
        for b in 0..ny {
            let mut c = Matrix::zeros(nb, nb);
            c[(a, ny + b)] = 1.0;
            c[(ny + b, a)] = 1.0;
            noise.add_term(layout.g_index(a, b), c);
        }
    }

    let mut blocks = vec![pi_block, epigraph, noise];

    if let DistortionBudget::Bounded(eps) = spec.budget {
        // [[theta, a^T], [a, I]], a = W (G - I) mu_y
        let nc = 1 + ny;
        let sy = prior.sigma_y.as_matrix();
        let mut c0 = Matrix::identity(nc, nc);
        c0[(0, 0)] = eps - (&q * sy).trace();
        let bias0 = -(&spec.w * &prior.mu_y);
        for k in 0..ny {
            c0[(0, 1 + k)] = bias0[k];
            c0[(1 + k, 0)] = bias0[k];
        }
        let mut dist = LmiBlock::new(BlockKind::Distortion, c0);
        for i in 0..ny {
            for j in i..ny {
                let mut c = Matrix::zeros(nc, nc);
                c[(0, 0)] = -if i == j { q[(i, i)] } else { q[(i, j)] + q[(j, i)] };
                dist.add_term(layout.sigma_z_index(i, j), c);
            }
        }
        let syq = sy * &q;
        for a in 0..ny {
            for b in 0..ny {
                let mut c = Matrix::zeros(nc, nc);
                // tr(Q E_ab sy) + tr(Q sy E_ba) = 2 (sy Q)_{ba}
                c[(0, 0)] = 2.0 * syq[(b, a)];
                for k in 0..ny {
                    let v = spec.w[(k, a)] * prior.mu_y[b];
                    c[(0, 1 + k)] = v;
                    c[(1 + k, 0)] = v;
                }
                dist.add_term(layout.g_index(a, b), c);
            }
        }
        blocks.push(dist);
    }

    let needs_bound = match spec.budget {
        DistortionBudget::Unconstrained => true,
        DistortionBudget::Bounded(_) => !gaussmat::is_pd(&SymMatrix::symmetrized(q.clone()), gaussmat::DEFAULT_PD_TOL),
    };
    let bound_radius = if needs_bound {
        let r = BOUND_SCALE * gaussmat::max_eigenvalue(&start.sigma_z);
        let mut bound = LmiBlock::new(BlockKind::Bound, Matrix::identity(ny, ny) * r);
        for i in 0..ny {
            for j in i..ny {
                bound.add_term(layout.sigma_z_index(i, j), -VarLayout::sym_basis(ny, i, j));
            }
        }
        blocks.push(bound);
        Some(r)
    } else {
        None
    };

    Ok(LogDetProgram {
        layout,
        blocks,
        start,
        budget: spec.budget,
        sigma_y_scale: prior.sigma_y.scale(),
        bound_radius,
    })
}
