//! Independent re-check of a synthesis result against every constraint.
//!
//! Each check reads a distinct part of the result so that corrupting one
//! field trips exactly one check:
//!
//! | check                    | reads                                   |
//! |--------------------------|-----------------------------------------|
//! | `pi_psd`                 | `pi`                                    |
//! | `lmi_a_epigraph`         | `pi`, `sigma_z`, `g`                    |
//! | `lmi_b_noise_covariance` | `sigma_v`, `sigma_z`, `g`               |
//! | `lmi_c_distortion`       | `achieved_distortion`, `sigma_z`, `g`   |
//! | `leakage_agreement`      | `leakage`, `sigma_z`, `g`               |
//! | `epigraph_active`        | `pi`, `sigma_z`, `g`                    |

use serde::Serialize;

use super::{solver::SolverConfig, SynthesisResult, SynthesisSpec};
use crate::gaussmat::{self, block2, spd_inverse, SymMatrix};
use crate::model::{self, gaussian_leakage, posterior_covariance};

/// Relative slack on the distortion budget.
pub const DISTORTION_SLACK: f64 = 1e-6;
/// Absolute agreement required between stored and recomputed leakage.
pub const LEAKAGE_AGREEMENT: f64 = 1e-8;
/// Max-entry gap allowed between `Pi` and the posterior covariance, relative
/// to `max(1, |sigma_s|_max)`.
pub const EPIGRAPH_ACTIVITY: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub name: &'static str,
    /// Signed slack; non-negative when the check holds.
    pub margin: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub checks: Vec<CertificateCheck>,
    pub passed: bool,
}

impl Certificate {
    pub fn check(&self, name: &str) -> Option<&CertificateCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

fn check(name: &'static str, margin: f64, detail: String) -> CertificateCheck {
    CertificateCheck {
        name,
        margin,
        passed: margin >= 0.0,
        detail,
    }
}

fn fail(name: &'static str, detail: String) -> CertificateCheck {
    CertificateCheck {
        name,
        margin: f64::NEG_INFINITY,
        passed: false,
        detail,
    }
}

pub fn certify(spec: &SynthesisSpec, r: &SynthesisResult, cfg: &SolverConfig) -> Certificate {
    let p = &spec.prior;
    let tol = cfg.pd_tol;
    let cross = &r.g * &p.sigma_ys;
    let mut checks = Vec::new();

    let pi_min = gaussmat::min_eigenvalue(&r.pi);
    checks.push(check(
        "pi_psd",
        pi_min + tol * r.pi.scale(),
        format!("min eigenvalue {pi_min:.3e}"),
    ));

    let a_sigma_s = SymMatrix::symmetrized(p.sigma_s.as_matrix() - r.pi.as_matrix());
    checks.push(match block2(&a_sigma_s, &cross.transpose(), &r.sigma_z) {
        Ok(a) => {
            let m = gaussmat::min_eigenvalue(&a);
            check("lmi_a_epigraph", m + tol * a.scale(), format!("min eigenvalue {m:.3e}"))
        }
        Err(e) => fail("lmi_a_epigraph", e.to_string()),
    });

    let delta = cfg.lmi_b_margin * p.sigma_y.scale();
    checks.push(
        match spd_inverse(&p.sigma_y).and_then(|inv| block2(&r.sigma_z, &r.g, &inv)) {
            Ok(b) => {
                let b_min = gaussmat::min_eigenvalue(&b);
                let v_min = gaussmat::min_eigenvalue(&r.sigma_v);
                let implied =
                    SymMatrix::symmetrized(r.sigma_z.as_matrix() - &r.g * p.sigma_y.as_matrix() * r.g.transpose());
                let mismatch = (implied.as_matrix() - r.sigma_v.as_matrix()).amax();
                let consistency = 1e-8 * r.sigma_z.amax().max(1.0);
                let margin = (b_min - delta + tol * b.scale()).min(v_min).min(consistency - mismatch);
                let mut c = check(
                    "lmi_b_noise_covariance",
                    margin,
                    format!(
                        "block min eigenvalue {b_min:.3e} (margin {delta:.1e}), sigma_v min eigenvalue {v_min:.3e}, \
                     |sigma_v - (sigma_z - G sigma_y G^T)|_max {mismatch:.1e}"
                    ),
                );
                // sigma_v must be strictly positive definite
                c.passed = c.passed && v_min > 0.0;
                c
            }
            Err(e) => fail("lmi_b_noise_covariance", e.to_string()),
        },
    );

    checks.push(match spec.epsilon() {
        Some(eps) => match model::distortion_from_sigma_z(p, &r.g, &r.sigma_z, &spec.w) {
            Ok(d) => {
                let agreement = 1e-8 * eps.max(1.0) - (d - r.achieved_distortion).abs();
                let budget = eps * (1.0 + DISTORTION_SLACK) - r.achieved_distortion;
                check(
                    "lmi_c_distortion",
                    budget.min(agreement),
                    format!(
                        "achieved {:.6e} of budget {eps:.6e} (recomputed {d:.6e})",
                        r.achieved_distortion
                    ),
                )
            }
            Err(e) => fail("lmi_c_distortion", e.to_string()),
        },
        None => check(
            "lmi_c_distortion",
            f64::INFINITY,
            "unconstrained: no distortion block".into(),
        ),
    });

    checks.push(match gaussian_leakage(&p.sigma_s, &r.sigma_z, &cross, r.log_base) {
        Ok(l) => check(
            "leakage_agreement",
            LEAKAGE_AGREEMENT - (l - r.leakage).abs(),
            format!("stored {:.10e}, recomputed {l:.10e} ({})", r.leakage, r.log_base.unit()),
        ),
        Err(e) => fail("leakage_agreement", e.to_string()),
    });

    checks.push(match posterior_covariance(&p.sigma_s, &r.sigma_z, &cross) {
        Ok(post) => {
            let gap = (post.as_matrix() - r.pi.as_matrix()).amax();
            check(
                "epigraph_active",
                EPIGRAPH_ACTIVITY * p.sigma_s.amax().max(1.0) - gap,
                format!("|pi - posterior|_max {gap:.3e}"),
            )
        }
        Err(e) => fail("epigraph_active", e.to_string()),
    });

    let passed = checks.iter().all(|c| c.passed);
    Certificate { checks, passed }
}
