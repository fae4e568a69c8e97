//! Leakage upper bounds for log-concave data in terms of Gaussian surrogates.
//!
//! If `(S, Z)` is log-concave and `(S_N, Z_N)` is Gaussian with the same
//! moments, `I[S;Z] <= I[S_N;Z_N] + C_n` with
//! `C_n = (n/2) log(2 pi e c(n))`, `c(n) = e^2 n^2 / (4 sqrt(2) (n + 2))` and
//! `n = n_s + n_y`. Matching the maximum density instead of the moments
//! gives `I[S;Z] <= I[S*_N;Z*_N] + n`.
//!
//! The `+ n` slack of the second bound is taken in bits regardless of the
//! requested base; [`BoundReport::prop2_unit_note`] says so in every report.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussmat::LogBase;

/// A value of `C_6` in circulation that does not follow from the formula
/// (the formula gives about 19.9485 bits). Reported, never used.
pub const PUBLISHED_C6: f64 = 18.6204;

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(())
}

fn check_leakage(l: f64) -> Result<()> {
    if !(l >= 0.0) || !l.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "gaussian leakage must be finite and non-negative, got {l}"
        )));
    }
    Ok(())
}

/// `c(n) = e^2 n^2 / (4 sqrt(2) (n + 2))`.
pub fn c_of_n(n: usize) -> Result<f64> {
    check_n(n)?;
    let n = n as f64;
    Ok(std::f64::consts::E.powi(2) * n * n / (4.0 * std::f64::consts::SQRT_2 * (n + 2.0)))
}

/// `C_n = (n/2) log(2 pi e c(n))` in `base`.
pub fn capital_c_of_n(n: usize, base: LogBase) -> Result<f64> {
    let c = c_of_n(n)?;
    let nats = 0.5 * n as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E * c).ln();
    Ok(base.from_nats(nats))
}

/// `I[S_N;Z_N] + C_n`.
pub fn prop1_bound(gaussian_leakage: f64, n: usize, base: LogBase) -> Result<f64> {
    check_leakage(gaussian_leakage)?;
    Ok(gaussian_leakage + capital_c_of_n(n, base)?)
}

/// `I[S*_N;Z*_N] + n`.
pub fn prop2_bound(gaussian_star_leakage: f64, n: usize) -> Result<f64> {
    check_leakage(gaussian_star_leakage)?;
    check_n(n)?;
    Ok(gaussian_star_leakage + n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub log_base: LogBase,
    pub c_n: f64,
    pub capital_c_n: f64,
    pub gaussian_leakage: f64,
    pub prop1_bound: f64,
    /// Uses the Gaussian leakage as the matched-maximum-density leakage,
    /// which is exact for Laplace data.
    pub prop2_bound: f64,
    pub prop2_unit_note: &'static str,
    /// Present only for `n = 6`.
    pub published_c6: Option<PublishedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublishedValue {
    pub value: f64,
    pub formula_value_bits: f64,
    pub discrepancy: f64,
    pub note: String,
}

pub fn report(gaussian_leakage: f64, n: usize, base: LogBase) -> Result<BoundReport> {
    let published_c6 = if n == 6 {
        let formula = capital_c_of_n(6, LogBase::Two)?;
        Some(PublishedValue {
            value: PUBLISHED_C6,
            formula_value_bits: formula,
            discrepancy: formula - PUBLISHED_C6,
            note: format!(
                "a printed value C_6 = {PUBLISHED_C6} does not match the formula ({formula:.4} bits, {:.4} nats); \
                 the formula value is used",
                capital_c_of_n(6, LogBase::Natural)?
            ),
        })
    } else {
        None
    };
    Ok(BoundReport {
        n,
        log_base: base,
        c_n: c_of_n(n)?,
        capital_c_n: capital_c_of_n(n, base)?,
        gaussian_leakage,
        prop1_bound: prop1_bound(gaussian_leakage, n, base)?,
        prop2_bound: prop2_bound(gaussian_leakage, n)?,
        prop2_unit_note: "prop2 slack of 1 per coordinate is counted in bits",
        published_c6,
    })
}
