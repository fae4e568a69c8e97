//! Prior statistics, the linear Gaussian mechanism `Z = G Y + V`, and the
//! closed-form quantities built from them: the joint law of `(Z, S)`, the
//! mutual-information leakage `I[S; Z]`, the weighted distortion
//! `E[||W (Z - Y)||^2]` and the linear MMSE adversary.
//!
//! Cross-covariances are stored with the disclosed variable on the rows:
//! `sigma_ys` is `n_y x n_s` and `JointZS::cross` is `n_y x n_s`.

use crate::error::{Error, Result};
use crate::gaussmat::{self, block2, cholesky, congruence_inverse, LogBase, Matrix, SymMatrix, Vector};

/// Second-order statistics of the query output `Y` and the private data `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    pub mu_s: Vector,
    pub sigma_s: SymMatrix,
    pub mu_y: Vector,
    pub sigma_y: SymMatrix,
    /// `Cov(Y, S)`, `n_y x n_s`.
    pub sigma_ys: Matrix,
}

impl Prior {
    pub fn n_s(&self) -> usize {
        self.sigma_s.dim()
    }

    pub fn n_y(&self) -> usize {
        self.sigma_y.dim()
    }

    /// Joint covariance of `(Y, S)`, with `Y` first.
    pub fn joint_covariance(&self) -> Result<SymMatrix> {
        block2(&self.sigma_y, &self.sigma_ys, &self.sigma_s)
    }

    /// Joint mean `(mu_y; mu_s)`.
    pub fn joint_mean(&self) -> Vector {
        let mut v = Vector::zeros(self.n_y() + self.n_s());
        v.rows_mut(0, self.n_y()).copy_from(&self.mu_y);
        v.rows_mut(self.n_y(), self.n_s()).copy_from(&self.mu_s);
        v
    }

    fn check_dims(&self) -> Result<()> {
        let (ns, ny) = (self.n_s(), self.n_y());
        if self.mu_s.len() != ns {
            return Err(Error::dims("mu_s", ns, self.mu_s.len()));
        }
        if self.mu_y.len() != ny {
            return Err(Error::dims("mu_y", ny, self.mu_y.len()));
        }
        if self.sigma_ys.shape() != (ny, ns) {
            return Err(Error::dims(
                "sigma_ys",
                format!("{ny}x{ns}"),
                format!("{}x{}", self.sigma_ys.nrows(), self.sigma_ys.ncols()),
            ));
        }
        Ok(())
    }
}

/// Checks dimensions and the positivity conditions of a prior.
///
/// Requires `sigma_s > 0`, `sigma_y > 0` and a positive definite Schur
/// complement `sigma_y - sigma_ys sigma_s^{-1} sigma_ys^T`, which together
/// are equivalent to a positive definite joint covariance.
pub fn validate_prior(p: Prior) -> Result<Prior> {
    p.check_dims()?;
    cholesky(&p.sigma_s).map_err(|e| Error::InvalidPrior(format!("sigma_s is not positive definite: {e}")))?;
    cholesky(&p.sigma_y).map_err(|e| Error::InvalidPrior(format!("sigma_y is not positive definite: {e}")))?;
    let explained = congruence_inverse(&p.sigma_s, &p.sigma_ys.transpose())?;
    let schur = SymMatrix::symmetrized(p.sigma_y.as_matrix() - explained.as_matrix());
    if let Err(e) = cholesky(&schur) {
        return Err(Error::InvalidPrior(format!(
            "schur complement sigma_y - sigma_ys sigma_s^-1 sigma_ys^T is not positive definite \
             (joint covariance of (Y, S) is singular or indefinite): {e}"
        )));
    }
    Ok(p)
}

/// The distorting mechanism `Z = G Y + V`, `V ~ N(0, sigma_v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    pub g: Matrix,
    pub sigma_v: SymMatrix,
}

impl Mechanism {
    /// Builds a mechanism, checking `G` is square and `sigma_v > 0`.
    pub fn new(g: Matrix, sigma_v: SymMatrix) -> Result<Self> {
        if g.nrows() != g.ncols() || g.nrows() != sigma_v.dim() {
            return Err(Error::dims(
                "mechanism",
                format!("G {0}x{0}", sigma_v.dim()),
                format!("G {}x{}", g.nrows(), g.ncols()),
            ));
        }
        cholesky(&sigma_v).map_err(|e| e.relabel("sigma_v"))?;
        Ok(Mechanism { g, sigma_v })
    }

    /// `G = I`, `sigma_v = s2 I`.
    pub fn isotropic(n: usize, s2: f64) -> Result<Self> {
        Self::new(Matrix::identity(n, n), SymMatrix::identity(n).scaled(s2))
    }

    pub fn dim(&self) -> usize {
        self.sigma_v.dim()
    }

    fn check_against(&self, p: &Prior) -> Result<()> {
        if self.dim() != p.n_y() {
            return Err(Error::dims("mechanism vs prior n_y", p.n_y(), self.dim()));
        }
        Ok(())
    }
}

/// Joint first and second moments of `(Z, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointZS {
    /// `(mu_z; mu_s)`.
    pub mu_zs: Vector,
    pub sigma_z: SymMatrix,
    /// `Cov(Z, S)`, `n_y x n_s`.
    pub cross: Matrix,
    pub sigma_s: SymMatrix,
}

impl JointZS {
    pub fn n_z(&self) -> usize {
        self.sigma_z.dim()
    }

    pub fn n_s(&self) -> usize {
        self.sigma_s.dim()
    }

    pub fn mu_z(&self) -> Vector {
        self.mu_zs.rows(0, self.n_z()).into_owned()
    }

    pub fn mu_s(&self) -> Vector {
        self.mu_zs.rows(self.n_z(), self.n_s()).into_owned()
    }

    /// `[[sigma_z, cross], [cross^T, sigma_s]]`.
    pub fn covariance(&self) -> Result<SymMatrix> {
        block2(&self.sigma_z, &self.cross, &self.sigma_s)
    }
}

pub fn assemble_joint(p: &Prior, m: &Mechanism) -> Result<JointZS> {
    m.check_against(p)?;
    let g = &m.g;
    let sigma_z = SymMatrix::symmetrized(g * p.sigma_y.as_matrix() * g.transpose() + m.sigma_v.as_matrix());
    let cross = g * &p.sigma_ys;
    let mu_z = g * &p.mu_y;
    let mut mu_zs = Vector::zeros(p.n_y() + p.n_s());
    mu_zs.rows_mut(0, p.n_y()).copy_from(&mu_z);
    mu_zs.rows_mut(p.n_y(), p.n_s()).copy_from(&p.mu_s);
    Ok(JointZS {
        mu_zs,
        sigma_z,
        cross,
        sigma_s: p.sigma_s.clone(),
    })
}

/// Posterior (MMSE error) covariance `sigma_s - cross^T sigma_z^{-1} cross`.
pub fn posterior_covariance(sigma_s: &SymMatrix, sigma_z: &SymMatrix, cross: &Matrix) -> Result<SymMatrix> {
    if cross.shape() != (sigma_z.dim(), sigma_s.dim()) {
        return Err(Error::dims(
            "cross-covariance",
            format!("{}x{}", sigma_z.dim(), sigma_s.dim()),
            format!("{}x{}", cross.nrows(), cross.ncols()),
        ));
    }
    let explained = congruence_inverse(sigma_z, cross).map_err(|e| e.relabel("sigma_z"))?;
    Ok(SymMatrix::symmetrized(sigma_s.as_matrix() - explained.as_matrix()))
}

/// Leakage of jointly Gaussian `(S, Z)` from their covariances:
/// `1/2 log det sigma_s - 1/2 log det(sigma_s - cross^T sigma_z^{-1} cross)`.
pub fn gaussian_leakage(sigma_s: &SymMatrix, sigma_z: &SymMatrix, cross: &Matrix, base: LogBase) -> Result<f64> {
    let post = posterior_covariance(sigma_s, sigma_z, cross)?;
    let ld_s = gaussmat::log_det_pd(sigma_s, LogBase::Natural).map_err(|e| e.relabel("sigma_s"))?;
    let ld_post = gaussmat::log_det_pd(&post, LogBase::Natural).map_err(|e| e.relabel("posterior covariance"))?;
    Ok(base.from_nats((0.5 * (ld_s - ld_post)).max(0.0)))
}

/// `I[S; Z]` for the mechanism `m` applied to data with prior `p`.
pub fn mutual_information(p: &Prior, m: &Mechanism, base: LogBase) -> Result<f64> {
    let j = assemble_joint(p, m)?;
    gaussian_leakage(&j.sigma_s, &j.sigma_z, &j.cross, base)
}

/// `W^T W`.
pub fn weight_gram(w: &Matrix) -> Matrix {
    w.transpose() * w
}

/// Distortion `E[||W (Z - Y)||^2]` written in terms of `(G, sigma_z)`:
/// `tr[W^T W (sigma_z + sigma_y - G sigma_y - sigma_y G^T)] + |W (G - I) mu_y|^2`.
pub fn distortion_from_sigma_z(p: &Prior, g: &Matrix, sigma_z: &SymMatrix, w: &Matrix) -> Result<f64> {
    let n = p.n_y();
    if w.shape() != (n, n) {
        return Err(Error::dims(
            "W",
            format!("{n}x{n}"),
            format!("{}x{}", w.nrows(), w.ncols()),
        ));
    }
    if g.shape() != (n, n) || sigma_z.dim() != n {
        return Err(Error::dims(
            "G / sigma_z",
            n,
            format!("{} / {}", g.nrows(), sigma_z.dim()),
        ));
    }
    let q = weight_gram(w);
    let sy = p.sigma_y.as_matrix();
    let inner = sigma_z.as_matrix() + sy - g * sy - sy * g.transpose();
    let trace_term = (&q * inner).trace();
    let bias = w * (g - Matrix::identity(n, n)) * &p.mu_y;
    Ok(trace_term + bias.norm_squared())
}

/// Distortion `E[||W (Z - Y)||^2]` of mechanism `m`.
pub fn distortion(p: &Prior, m: &Mechanism, w: &Matrix) -> Result<f64> {
    m.check_against(p)?;
    let sigma_z = SymMatrix::symmetrized(&m.g * p.sigma_y.as_matrix() * m.g.transpose() + m.sigma_v.as_matrix());
    distortion_from_sigma_z(p, &m.g, &sigma_z, w)
}

/// Recovers `sigma_v = sigma_z - G sigma_y G^T`; fails if it is not PD.
pub fn sigma_v_from(g: &Matrix, sigma_z: &SymMatrix, sigma_y: &SymMatrix) -> Result<SymMatrix> {
    let n = sigma_y.dim();
    if g.shape() != (n, n) || sigma_z.dim() != n {
        return Err(Error::dims(
            "G / sigma_z",
            n,
            format!("{}x{} / {}", g.nrows(), g.ncols(), sigma_z.dim()),
        ));
    }
    let v = SymMatrix::symmetrized(sigma_z.as_matrix() - g * sigma_y.as_matrix() * g.transpose());
    cholesky(&v).map_err(|e| e.relabel("sigma_v = sigma_z - G sigma_y G^T"))?;
    Ok(v)
}

/// Linear MMSE estimate of `S` from an observation `z`.
pub fn mmse_estimate(j: &JointZS, z: &Vector) -> Result<Vector> {
    if z.len() != j.n_z() {
        return Err(Error::dims("observation z", j.n_z(), z.len()));
    }
    let gain = mmse_gain(j)?;
    Ok(j.mu_s() + gain * (z - j.mu_z()))
}

/// Estimator gain `cross^T sigma_z^{-1}` (`n_s x n_z`).
pub fn mmse_gain(j: &JointZS) -> Result<Matrix> {
    let l = cholesky(&j.sigma_z).map_err(|e| e.relabel("sigma_z"))?;
    // sigma_z^{-1} cross, transposed
    Ok(gaussmat::cholesky_solve(&l, &j.cross).transpose())
}

pub fn mmse_error_cov(j: &JointZS) -> Result<SymMatrix> {
    posterior_covariance(&j.sigma_s, &j.sigma_z, &j.cross)
}
