//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{random_mechanism, random_weight, Scalar};
use gaussmech::bounds::{self, c_of_n, capital_c_of_n};
use gaussmech::gaussmat::{cholesky, log_det_pd, min_eigenvalue, LogBase, Matrix};
use gaussmech::model::{self, assemble_joint, posterior_covariance};
use gaussmech::sdp::{certify, synthesize, tradeoff_curve, DistortionBudget, SolveStatus, SolverConfig, SynthesisSpec};
use gaussmech::sim::{self, random_prior, Family};

const AC1_SEEDS: [u64; 3] = [1, 2, 3];
const AC1_TOL_BITS: f64 = 1e-3;
const AC1_RUNTIME: Duration = Duration::from_secs(10);

const GRID: [f64; 6] = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
const AC2_TOL: f64 = 1e-6;
const AC2_RUNTIME: Duration = Duration::from_secs(30);
/// 3-dim instance used for the trade-off shape and the unconstrained limit.
const CURVE_INSTANCE: (f64, u64) = (1.0, 2);

const AC3_LEAKAGE: f64 = 1e-3;
const AC3_GAIN: f64 = 1e-3;

const AC4_SPECS: u64 = 20;
const AC4_DISTORTION_SLACK: f64 = 1e-6;
const AC4_EPIGRAPH: f64 = 1e-5;

/// 3-dim instance large enough that leakage stays positive at eps = 20.
const MC_INSTANCE: (f64, u64) = (10.0, 0);
const AC5_SAMPLES: usize = 100_000;
const AC5_SE: f64 = 3.0;
const AC5_RUNTIME: Duration = Duration::from_secs(20);

const AC6_C6: f64 = 5.87712;
const AC6_C6_TOL: f64 = 1e-4;
const AC6_CAP_C6: f64 = 19.948;
const AC6_CAP_C6_TOL: f64 = 1e-2;
const AC6_PUBLISHED: f64 = 18.6204;

const AC7_SAMPLES: usize = 100_000;
const AC7_RUNTIME: Duration = Duration::from_secs(60);

const AC8_CASES: u64 = 200;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn instance(scale: f64, seed: u64) -> SynthesisSpec {
    SynthesisSpec::new(
        random_prior(3, 3, scale, seed),
        Matrix::identity(3, 3),
        DistortionBudget::Unconstrained,
    )
    .unwrap()
}

fn with_budget(spec: &SynthesisSpec, budget: DistortionBudget) -> SynthesisSpec {
    SynthesisSpec { budget, ..spec.clone() }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn ac1() -> Check {
    let start = Instant::now();
    let cfg = SolverConfig::default();
    let mut worst: f64 = 0.0;
    for seed in AC1_SEEDS {
        let s = Scalar::random(seed);
        let r = synthesize(&s.spec(), &cfg).map_err(err)?;
        let (oracle, g, v) = s.oracle();
        let gap = (r.leakage - oracle).abs();
        worst = worst.max(gap);
        ensure(gap < AC1_TOL_BITS, || {
            format!(
                "seed {seed}: solver {:.6} vs oracle {oracle:.6} bits (oracle g {g:.4}, v {v:.4})",
                r.leakage
            )
        })?;
    }
    let t = start.elapsed();
    ensure(t < AC1_RUNTIME, || format!("runtime {t:?}"))?;
    Ok(format!(
        "max |solver - oracle| {worst:.2e} bits over {} specs, {t:.2?}",
        AC1_SEEDS.len()
    ))
}

fn ac2() -> Check {
    let start = Instant::now();
    let spec = instance(CURVE_INSTANCE.0, CURVE_INSTANCE.1);
    let curve = tradeoff_curve(&spec.prior, &spec.w, &GRID, &SolverConfig::default()).map_err(err)?;
    let mut l = Vec::new();
    for p in &curve.points {
        ensure(p.status == Some(SolveStatus::Optimal), || {
            format!("eps {}: {:?} {:?}", p.epsilon, p.status, p.error)
        })?;
        l.push(p.leakage.unwrap_or(f64::NAN));
    }
    let shown: Vec<String> = l.iter().map(|v| format!("{v:.4}")).collect();
    for k in 0..l.len() - 1 {
        ensure(l[k + 1] <= l[k] + AC2_TOL, || {
            format!("leakage rises between eps {} and {}: {shown:?}", GRID[k], GRID[k + 1])
        })?;
    }
    let second: Vec<f64> = l.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect();
    let slopes: Vec<f64> = (0..l.len() - 1)
        .map(|k| (l[k + 1] - l[k]) / (GRID[k + 1] - GRID[k]))
        .collect();
    let divided_ok = slopes.windows(2).all(|s| s[1] >= s[0] - AC2_TOL);
    for (k, d) in second.iter().enumerate() {
        ensure(*d >= -AC2_TOL, || {
            format!(
                "second difference {d:.3e} at eps {} (leakage {shown:?}; divided differences convex: {divided_ok})",
                GRID[k + 1]
            )
        })?;
    }
    let t = start.elapsed();
    ensure(t < AC2_RUNTIME, || format!("runtime {t:?}"))?;
    Ok(format!(
        "leakage {shown:?} bits, min second difference {:.2e}, divided differences convex: {divided_ok}, {t:.2?}",
        second.iter().cloned().fold(f64::INFINITY, f64::min)
    ))
}

fn ac3() -> Check {
    let spec = instance(CURVE_INSTANCE.0, CURVE_INSTANCE.1);
    let r = synthesize(&spec, &SolverConfig::default()).map_err(err)?;
    let gmax = r.g.amax();
    ensure(r.status == SolveStatus::Optimal, || format!("status {:?}", r.status))?;
    ensure(r.leakage < AC3_LEAKAGE && gmax < AC3_GAIN, || {
        format!("leakage {:.3e} bits, |G|_max {gmax:.3e}", r.leakage)
    })?;
    Ok(format!("leakage {:.2e} bits, |G|_max {gmax:.2e}", r.leakage))
}

fn ac4() -> Check {
    let cfg = SolverConfig::default();
    let mut worst_gap: f64 = 0.0;
    let mut min_sv = f64::INFINITY;
    for k in 0..AC4_SPECS {
        let (ns, ny) = (1 + (k % 5) as usize, 1 + ((k / 5 + k) % 5) as usize);
        let seed = 1000 + k;
        let prior = random_prior(ns, ny, 1.0 + (k % 3) as f64, seed);
        let w = random_weight(ny, seed);
        let q = w.transpose() * &w;
        let mean_term = (&w * &prior.mu_y).norm_squared();
        let threshold = (&q * prior.sigma_y.as_matrix()).trace() + mean_term;
        let eps = threshold * (0.05 + 0.85 * (k as f64 / AC4_SPECS as f64));
        let spec = SynthesisSpec::new(prior, w, DistortionBudget::Bounded(eps)).map_err(err)?;
        let r = synthesize(&spec, &cfg).map_err(|e| format!("spec {k} ({ns}x{ny}): {e}"))?;
        let sv = min_eigenvalue(&r.sigma_v);
        let post =
            posterior_covariance(&spec.prior.sigma_s, &r.sigma_z, &(&r.g * &spec.prior.sigma_ys)).map_err(err)?;
        let gap = (post.as_matrix() - r.pi.as_matrix()).amax();
        ensure(r.status == SolveStatus::Optimal, || {
            format!("spec {k}: status {:?}", r.status)
        })?;
        ensure(sv > 0.0, || format!("spec {k}: min eigenvalue of sigma_v {sv:.3e}"))?;
        ensure(r.achieved_distortion <= eps * (1.0 + AC4_DISTORTION_SLACK), || {
            format!("spec {k}: distortion {} > budget {eps}", r.achieved_distortion)
        })?;
        ensure(gap < AC4_EPIGRAPH, || {
            format!("spec {k}: |pi - posterior|_max {gap:.3e}")
        })?;
        let cert = certify(&spec, &r, &cfg);
        ensure(cert.passed, || {
            format!("spec {k}: certificate failed {:?}", cert.failed())
        })?;
        worst_gap = worst_gap.max(gap);
        min_sv = min_sv.min(sv);
    }
    Ok(format!(
        "{AC4_SPECS} specs optimal and certified, max |pi - posterior| {worst_gap:.1e}, min eig sigma_v {min_sv:.1e}"
    ))
}

fn ac5() -> Check {
    let start = Instant::now();
    let base = instance(MC_INSTANCE.0, MC_INSTANCE.1);
    let cfg = SolverConfig::default();
    let batch = sim::sample_prior(&base.prior, Family::Gaussian, AC5_SAMPLES, 5).map_err(err)?;
    let mut mses = Vec::new();
    let mut lines = Vec::new();
    for budget in [
        DistortionBudget::Bounded(1.0),
        DistortionBudget::Bounded(10.0),
        DistortionBudget::Unconstrained,
    ] {
        let spec = with_budget(&base, budget);
        let r = synthesize(&spec, &cfg).map_err(err)?;
        let mech = r.mechanism().map_err(err)?;
        let out = sim::apply_mechanism(&batch, &mech, 6).map_err(err)?;
        let d = sim::empirical_distortion(&out, &spec.w).map_err(err)?;
        let d_exact = model::distortion(&spec.prior, &mech, &spec.w).map_err(err)?;
        let joint = assemble_joint(&spec.prior, &mech).map_err(err)?;
        let (mse, _) = sim::adversary_mse(&out, &joint, &spec.prior).map_err(err)?;
        let mse_exact = model::mmse_error_cov(&joint).map_err(err)?.trace();
        let label = budget.epsilon().map_or("unconstrained".to_string(), |e| e.to_string());
        ensure(d.z_score(d_exact) < AC5_SE, || {
            format!(
                "eps {label}: distortion {:.4} +- {:.4} vs {d_exact:.4}",
                d.mean, d.std_error
            )
        })?;
        ensure(mse.z_score(mse_exact) < AC5_SE, || {
            format!(
                "eps {label}: mse {:.4} +- {:.4} vs {mse_exact:.4}",
                mse.mean, mse.std_error
            )
        })?;
        lines.push(format!("eps {label}: mse {:.4}", mse.mean));
        mses.push(mse.mean);
    }
    ensure(mses.windows(2).all(|m| m[1] > m[0]), || {
        format!("Z-based MSE not increasing: {lines:?}")
    })?;
    let t = start.elapsed();
    ensure(t < AC5_RUNTIME, || format!("runtime {t:?}"))?;
    Ok(format!("{}, {t:.2?}", lines.join("; ")))
}

fn ac6() -> Check {
    let c6 = c_of_n(6).map_err(err)?;
    let cap = capital_c_of_n(6, LogBase::Two).map_err(err)?;
    let report = bounds::report(0.0, 6, LogBase::Two).map_err(err)?;
    let published = report
        .published_c6
        .as_ref()
        .ok_or("report has no published C_6 entry")?;
    ensure(
        published.value == AC6_PUBLISHED && (report.prop1_bound - cap).abs() < 1e-12,
        || {
            format!(
                "report adopts {} instead of the formula value {cap}",
                report.prop1_bound
            )
        },
    )?;
    ensure((cap - AC6_CAP_C6).abs() <= AC6_CAP_C6_TOL, || {
        format!("C_6 = {cap:.6} bits, expected {AC6_CAP_C6} +- {AC6_CAP_C6_TOL}")
    })?;
    ensure((c6 - AC6_C6).abs() <= AC6_C6_TOL, || {
        format!(
            "c(6) = 9e^2/(8 sqrt 2) = {c6:.6}, expected {AC6_C6} +- {AC6_C6_TOL} (off by {:.2e}); \
             C_6 = {cap:.4} bits ok; printed {AC6_PUBLISHED} flagged",
            c6 - AC6_C6
        )
    })?;
    Ok(format!(
        "c(6) = {c6:.6}, C_6 = {cap:.4} bits, printed {AC6_PUBLISHED} flagged"
    ))
}

fn ac7() -> Check {
    let start = Instant::now();
    let base = instance(MC_INSTANCE.0, MC_INSTANCE.1);
    let cfg = SolverConfig::default();
    let n = base.prior.n_s() + base.prior.n_y();
    let cap = capital_c_of_n(n, LogBase::Two).map_err(err)?;
    let batch = sim::sample_prior(&base.prior, Family::Laplace, AC7_SAMPLES, 7).map_err(err)?;
    let mut plug = Vec::new();
    for eps in GRID {
        let spec = with_budget(&base, DistortionBudget::Bounded(eps));
        let r = synthesize(&spec, &cfg).map_err(err)?;
        let out = sim::apply_mechanism(&batch, &r.mechanism().map_err(err)?, 8).map_err(err)?;
        let l = sim::plugin_leakage(&out, LogBase::Two).map_err(err)?;
        ensure(l.is_finite() && l >= 0.0 && l <= r.leakage + cap, || {
            format!("eps {eps}: plug-in {l:.4} vs gaussian {:.4} + C_n {cap:.4}", r.leakage)
        })?;
        plug.push(l);
    }
    let shown: Vec<String> = plug.iter().map(|v| format!("{v:.4}")).collect();
    ensure(plug.windows(2).all(|p| p[1] < p[0]), || {
        format!("plug-in leakage not decreasing: {shown:?}")
    })?;
    let t = start.elapsed();
    ensure(t < AC7_RUNTIME, || format!("runtime {t:?}"))?;
    Ok(format!(
        "plug-in leakage {shown:?} bits, all below gaussian + {cap:.3}, {t:.2?}"
    ))
}

fn ac8() -> Check {
    for case in 0..AC8_CASES {
        let (ns, ny) = (1 + (case % 4) as usize, 1 + ((case / 4) % 4) as usize);
        let prior = random_prior(ns, ny, 1.0, case);
        let mech = random_mechanism(ny, case + 10_000);
        let joint = assemble_joint(&prior, &mech).map_err(err)?;
        let cov = joint.covariance().map_err(err)?;
        cholesky(&cov).map_err(|e| format!("case {case}: joint (Z, S) covariance not PD: {e}"))?;

        let back = model::sigma_v_from(&mech.g, &joint.sigma_z, &prior.sigma_y).map_err(err)?;
        let rt = (back.as_matrix() - mech.sigma_v.as_matrix()).amax();
        ensure(rt <= 1e-9 * mech.sigma_v.amax().max(1.0), || {
            format!("case {case}: sigma_v round trip off by {rt:.2e}")
        })?;

        let leak = model::mutual_information(&prior, &mech, LogBase::Natural).map_err(err)?;
        let err_cov = model::mmse_error_cov(&joint).map_err(err)?;
        let ident = 0.5
            * (log_det_pd(&prior.sigma_s, LogBase::Natural).map_err(err)?
                - log_det_pd(&err_cov, LogBase::Natural).map_err(err)?);
        ensure((leak - ident).abs() < 1e-9 * leak.abs().max(1.0), || {
            format!("case {case}: leakage {leak} vs log det ratio {ident}")
        })?;
    }
    let cfg = SolverConfig::default();
    let spec = SynthesisSpec::new(
        random_prior(2, 3, 1.0, 99),
        random_weight(3, 99),
        DistortionBudget::Bounded(1.0),
    )
    .map_err(err)?;
    let (a, b) = (
        synthesize(&spec, &cfg).map_err(err)?,
        synthesize(&spec, &cfg).map_err(err)?,
    );
    ensure(a == b, || "repeated synthesis differs".into())?;
    let p = &spec.prior;
    let s1 = sim::sample_prior(p, Family::Laplace, 1000, 3).map_err(err)?;
    let s2 = sim::sample_prior(p, Family::Laplace, 1000, 3).map_err(err)?;
    ensure(s1 == s2, || "repeated sampling differs".into())?;
    Ok(format!(
        "{AC8_CASES} random cases: joint PD, sigma_v round trip, leakage/MMSE identity; synthesis and sampling deterministic"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("scalar oracle equivalence", ac1),
        ("trade-off monotonicity and decay", ac2),
        ("unconstrained limit", ac3),
        ("certification suite", ac4),
        ("monte carlo agreement", ac5),
        ("bound constants", ac6),
        ("laplace plug-in leakage", ac7),
        ("property suites", ac8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("AC-{} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("AC-{} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
