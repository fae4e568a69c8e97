//! Dense symmetric / positive-definite matrix primitives.
//!
//! Every positive-definiteness decision in the crate goes through a single
//! relative tolerance: a matrix `a` is treated as PD when its Cholesky pivots
//! (or its smallest eigenvalue) exceed `tol * |tr(a)| / dim`.

use std::fmt;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative PD tolerance.
pub const DEFAULT_PD_TOL: f64 = 1e-9;

/// Logarithm base used for entropies and leakage values.
/// Serialized as `"2"` or `"e"`; deserializes from `2`, `"2"` or `"e"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    /// Bits.
    #[default]
    Two,
    /// Nats.
    Natural,
}

impl LogBase {
    /// Converts a quantity measured in nats into this base.
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::Two => nats / std::f64::consts::LN_2,
            LogBase::Natural => nats,
        }
    }

    pub fn log(self, x: f64) -> f64 {
        self.from_nats(x.ln())
    }

    /// Short unit label, `bits` or `nats`.
    pub fn unit(self) -> &'static str {
        match self {
            LogBase::Two => "bits",
            LogBase::Natural => "nats",
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogBase::Two => f.write_str("2"),
            LogBase::Natural => f.write_str("e"),
        }
    }
}

impl Serialize for LogBase {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LogBase {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(2.0) => Ok(LogBase::Two),
            Raw::Str(s) if s == "2" => Ok(LogBase::Two),
            Raw::Str(s) if s == "e" => Ok(LogBase::Natural),
            _ => Err(de::Error::custom("log_base must be 2 or \"e\"")),
        }
    }
}

/// A square matrix that is exactly symmetric.
///
/// Construction symmetrizes the input as `(A + A^T) / 2`, so values coming
/// out of chained floating-point products are accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dims(
                "symmetric matrix",
                "square",
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        if m.nrows() == 0 {
            return Err(Error::dims("symmetric matrix", "dim >= 1", 0));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes a square matrix without validating its shape.
    pub(crate) fn symmetrized(m: Matrix) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(Matrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(Matrix::from_diagonal(&Vector::from_column_slice(d)))
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut m = Matrix::zeros(n, n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::dims("symmetric matrix row", n, r.len()));
            }
            for (j, v) in r.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        SymMatrix(&self.0 * s)
    }

    /// Scale used by the relative PD tolerance: `|tr(a)| / dim`.
    pub fn scale(&self) -> f64 {
        self.0.trace().abs() / self.dim() as f64
    }
}

impl Deref for SymMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

fn threshold(a: &SymMatrix, tol: f64) -> f64 {
    tol * a.scale()
}

/// Lower-triangular Cholesky factor of `a`, using the default tolerance.
pub fn cholesky(a: &SymMatrix) -> Result<Matrix> {
    cholesky_with_tol(a, DEFAULT_PD_TOL)
}

pub fn cholesky_with_tol(a: &SymMatrix, tol: f64) -> Result<Matrix> {
    let n = a.dim();
    let thr = threshold(a, tol);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > thr) {
            return Err(Error::NotPositiveDefinite {
                what: "matrix".into(),
                pivot: d,
                threshold: thr,
            });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// `log det(a)` for a PD matrix, computed as `2 * sum(log L_ii)`.
pub fn log_det_pd(a: &SymMatrix, base: LogBase) -> Result<f64> {
    let l = cholesky(a)?;
    Ok(base.from_nats(log_det_from_cholesky(&l)))
}

pub(crate) fn log_det_from_cholesky(l: &Matrix) -> f64 {
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Solves `L L^T X = B` given the lower Cholesky factor `L`.
pub(crate) fn cholesky_solve(l: &Matrix, b: &Matrix) -> Matrix {
    let y = l
        .solve_lower_triangular(b)
        .expect("cholesky factor has a positive diagonal");
    l.transpose()
        .solve_upper_triangular(&y)
        .expect("cholesky factor has a positive diagonal")
}

/// Inverse of a PD matrix.
pub fn spd_inverse(a: &SymMatrix) -> Result<SymMatrix> {
    let l = cholesky(a)?;
    let n = a.dim();
    Ok(SymMatrix::symmetrized(cholesky_solve(&l, &Matrix::identity(n, n))))
}

/// `B^T a^{-1} B` for PD `a`, computed through the Cholesky factor.
pub fn congruence_inverse(a: &SymMatrix, b: &Matrix) -> Result<SymMatrix> {
    if b.nrows() != a.dim() {
        return Err(Error::dims("congruence factor rows", a.dim(), b.nrows()));
    }
    let l = cholesky(a)?;
    let x = l
        .solve_lower_triangular(b)
        .expect("cholesky factor has a positive diagonal");
    Ok(SymMatrix::symmetrized(x.transpose() * x))
}

/// Schur complement of the trailing block: for `m = [[A, B], [B^T, C]]` with
/// `A` of size `split`, returns `A - B C^{-1} B^T`.
pub fn schur_complement(m: &SymMatrix, split: usize) -> Result<SymMatrix> {
    let n = m.dim();
    if split == 0 || split >= n {
        return Err(Error::dims("schur split", format!("1..{}", n - 1), split));
    }
    let a = m.view((0, 0), (split, split)).into_owned();
    let b = m.view((0, split), (split, n - split)).into_owned();
    let c = SymMatrix::symmetrized(m.view((split, split), (n - split, n - split)).into_owned());
    let correction = congruence_inverse(&c, &b.transpose()).map_err(|e| e.relabel("schur pivot block"))?;
    Ok(SymMatrix::symmetrized(a - correction.into_inner()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &SymMatrix) -> f64 {
    SymmetricEigen::new(a.as_matrix().clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(a: &SymMatrix) -> f64 {
    SymmetricEigen::new(a.as_matrix().clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `min_eigenvalue(a) > tol * |tr(a)| / dim`.
pub fn is_pd(a: &SymMatrix, tol: f64) -> bool {
    min_eigenvalue(a) > threshold(a, tol)
}

/// Assembles the symmetric block matrix `[[a, b], [b^T, c]]`.
pub fn block2(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<SymMatrix> {
    let (p, q) = (a.nrows(), c.nrows());
    if a.ncols() != p || c.ncols() != q || b.nrows() != p || b.ncols() != q {
        return Err(Error::dims(
            "block matrix",
            format!("[{p}x{p}, {p}x{q}; {q}x{p}, {q}x{q}]"),
            format!(
                "a {}x{}, b {}x{}, c {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            ),
        ));
    }
    let mut m = Matrix::zeros(p + q, p + q);
    m.view_mut((0, 0), (p, p)).copy_from(a);
    m.view_mut((0, p), (p, q)).copy_from(b);
    m.view_mut((p, 0), (q, p)).copy_from(&b.transpose());
    m.view_mut((p, p), (q, q)).copy_from(c);
    Ok(SymMatrix::symmetrized(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn log_base_serde() {
        assert_eq!(serde_json::to_string(&LogBase::Two).unwrap(), "\"2\"");
        assert_eq!(serde_json::to_string(&LogBase::Natural).unwrap(), "\"e\"");
        assert_eq!(serde_json::from_str::<LogBase>("2").unwrap(), LogBase::Two);
        assert_eq!(serde_json::from_str::<LogBase>("\"e\"").unwrap(), LogBase::Natural);
        assert!(serde_json::from_str::<LogBase>("10").is_err());
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&SymMatrix::identity(2)).unwrap();
        assert_eq!(l, Matrix::identity(2, 2));
    }

    #[test]
    fn cholesky_two_by_two() {
        let a = sym(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let l = cholesky(&a).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2f64.sqrt()]);
        assert!((&l - &expected).amax() < 1e-15);
        assert!((&l * l.transpose() - a.as_matrix()).amax() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = sym(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn symmetrizes_input() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.4, 1.0]);
        let s = SymMatrix::new(m).unwrap();
        assert_eq!(s[(0, 1)], s[(1, 0)]);
        assert!((s[(0, 1)] - 0.3).abs() < 1e-15);
        assert!(SymMatrix::new(Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn log_det_examples() {
        assert_eq!(log_det_pd(&SymMatrix::identity(3), LogBase::Two).unwrap(), 0.0);
        let v = log_det_pd(&SymMatrix::from_diagonal(&[2.0, 8.0]), LogBase::Two).unwrap();
        assert!((v - 16f64.log2()).abs() < 1e-14);
        let e = std::f64::consts::E;
        let v = log_det_pd(&SymMatrix::from_diagonal(&[e, e]), LogBase::Natural).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn schur_examples() {
        let s = schur_complement(&sym(&[&[2.0, 0.0], &[0.0, 3.0]]), 1).unwrap();
        assert_eq!(s[(0, 0)], 2.0);
        let s = schur_complement(&sym(&[&[2.0, 1.0], &[1.0, 1.0]]), 1).unwrap();
        assert!((s[(0, 0)] - 1.0).abs() < 1e-15);
        let s = schur_complement(&sym(&[&[1.0, 1.0], &[1.0, 1.0]]), 1).unwrap();
        assert_eq!(s[(0, 0)], 0.0);
        assert!(schur_complement(&sym(&[&[1.0, 1.0], &[1.0, 0.0]]), 1).is_err());
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((min_eigenvalue(&SymMatrix::identity(4)) - 1.0).abs() < 1e-14);
        assert!((min_eigenvalue(&SymMatrix::from_diagonal(&[5.0, -2.0])) + 2.0).abs() < 1e-14);
        assert!((min_eigenvalue(&sym(&[&[2.0, 1.0], &[1.0, 2.0]])) - 1.0).abs() < 1e-14);
        assert!(is_pd(&SymMatrix::identity(2), DEFAULT_PD_TOL));
        assert!(!is_pd(&SymMatrix::from_diagonal(&[1.0, 0.0]), DEFAULT_PD_TOL));
    }

    fn random_pd() -> impl Strategy<Value = SymMatrix> {
        (1usize..=10).prop_flat_map(|n| {
            (proptest::collection::vec(-2.0f64..2.0, n * n), 0.01f64..1.0).prop_map(move |(v, delta)| {
                let m = Matrix::from_row_slice(n, n, &v);
                SymMatrix::symmetrized(&m * m.transpose() + Matrix::identity(n, n) * delta)
            })
        })
    }

    proptest! {
        #[test]
        fn cholesky_reconstructs(a in random_pd()) {
            let l = cholesky(&a).unwrap();
            let err = (&l * l.transpose() - a.as_matrix()).amax();
            prop_assert!(err < 1e-10 * a.amax());
        }

        #[test]
        fn log_det_matches_eigenvalues(a in random_pd()) {
            let eig = SymmetricEigen::new(a.as_matrix().clone()).eigenvalues;
            let oracle: f64 = eig.iter().map(|v| v.ln()).sum();
            let v = log_det_pd(&a, LogBase::Natural).unwrap();
            prop_assert!((v - oracle).abs() <= 1e-8 * oracle.abs().max(1.0));
        }

        #[test]
        fn schur_of_pd_is_pd(a in random_pd()) {
            prop_assume!(a.dim() >= 2);
            let s = schur_complement(&a, a.dim() / 2).unwrap();
            prop_assert!(min_eigenvalue(&s) > 0.0);
        }
    }
}
