//! Monte Carlo harness: sampling `(Y, S)`, pushing samples through a
//! mechanism and comparing empirical statistics against the closed forms.
//!
//! Two sample families share the prior's mean and covariance: jointly
//! Gaussian draws and a multivariate Laplace drawn as the Gaussian scale
//! mixture `mean + sqrt(w) L u` with `w ~ Exp(1)`, `u ~ N(0, I)`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussmat::{cholesky, LogBase, Matrix, SymMatrix, Vector};
use crate::model::{self, gaussian_leakage, JointZS, Mechanism, Prior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Laplace,
}

/// Row-per-sample arrays of `s`, `y` and (once a mechanism is applied) `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub s: Matrix,
    pub y: Matrix,
    pub z: Option<Matrix>,
    pub seed: u64,
    pub family: Family,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.s.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn z(&self) -> Result<&Matrix> {
        self.z
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("batch has no z column; apply a mechanism first".into()))
    }
}

/// Mean and standard error of a Monte Carlo average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    fn from_values(values: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for v in values {
            n += 1;
            let d = v - mean;
            mean += d / n as f64;
            m2 += d * (v - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Estimate {
            mean,
            std_error: (var / n.max(1) as f64).sqrt(),
        }
    }

    /// `|mean - target|` measured in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target).abs() / self.std_error
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SAMPLE_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// Draws `n_samples` rows of `(s, y)` from the prior's mean and covariance.
pub fn sample_prior(p: &Prior, family: Family, n_samples: usize, seed: u64) -> Result<SampleBatch> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let (ns, ny) = (p.n_s(), p.n_y());
    let l = cholesky(&p.joint_covariance()?).map_err(|e| e.relabel("joint covariance of (Y, S)"))?;
    let mean = p.joint_mean();
    let mut rng = rng_for(seed, SAMPLE_STREAM);
    let mut s = Matrix::zeros(n_samples, ns);
    let mut y = Matrix::zeros(n_samples, ny);
    let mut u = Vector::zeros(ns + ny);
    for r in 0..n_samples {
        for v in u.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let scale = match family {
            Family::Gaussian => 1.0,
            Family::Laplace => {
                let w: f64 = Exp1.sample(&mut rng);
                w.sqrt()
            }
        };
        let x = &mean + (&l * &u) * scale;
        for k in 0..ny {
            y[(r, k)] = x[k];
        }
        for k in 0..ns {
            s[(r, k)] = x[ny + k];
        }
    }
    Ok(SampleBatch {
        s,
        y,
        z: None,
        seed,
        family,
    })
}

/// `z_i = G y_i + v_i`, `v_i ~ N(0, sigma_v)` drawn from a stream separate
/// from the one that produced the batch.
pub fn apply_mechanism(batch: &SampleBatch, m: &Mechanism, seed: u64) -> Result<SampleBatch> {
    let ny = batch.y.ncols();
    if m.dim() != ny {
        return Err(Error::dims("mechanism vs batch y columns", ny, m.dim()));
    }
    let l = cholesky(&m.sigma_v).map_err(|e| e.relabel("sigma_v"))?;
    let mut rng = rng_for(seed, NOISE_STREAM);
    let mut z = &batch.y * m.g.transpose();
    let mut u = Vector::zeros(ny);
    for r in 0..batch.len() {
        for v in u.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let v = &l * &u;
        for k in 0..ny {
            z[(r, k)] += v[k];
        }
    }
    Ok(SampleBatch {
        z: Some(z),
        ..batch.clone()
    })
}

/// Sample mean of `||W (z_i - y_i)||^2`.
pub fn empirical_distortion(batch: &SampleBatch, w: &Matrix) -> Result<Estimate> {
    let z = batch.z()?;
    let ny = batch.y.ncols();
    if w.shape() != (ny, ny) {
        return Err(Error::dims(
            "W",
            format!("{ny}x{ny}"),
            format!("{}x{}", w.nrows(), w.ncols()),
        ));
    }
    let diff = (z - &batch.y) * w.transpose();
    Ok(Estimate::from_values(diff.row_iter().map(|r| r.norm_squared())))
}

/// Row-wise linear MMSE estimates of `s` from the rows of `obs`.
fn estimate_rows(obs: &Matrix, j: &JointZS) -> Result<Matrix> {
    if obs.ncols() != j.n_z() {
        return Err(Error::dims("observation columns", j.n_z(), obs.ncols()));
    }
    let gain = model::mmse_gain(j)?;
    let mu_z = j.mu_z().transpose();
    let mu_s = j.mu_s().transpose();
    let mut centered = obs.clone();
    for mut r in centered.row_iter_mut() {
        r -= &mu_z;
    }
    let mut est = centered * gain.transpose();
    for mut r in est.row_iter_mut() {
        r += &mu_s;
    }
    Ok(est)
}

/// Joint law of `(Y, S)` seen as an undistorted disclosure.
pub fn undistorted_joint(p: &Prior) -> JointZS {
    JointZS {
        mu_zs: p.joint_mean(),
        sigma_z: p.sigma_y.clone(),
        cross: p.sigma_ys.clone(),
        sigma_s: p.sigma_s.clone(),
    }
}

/// MMSE estimates `(s_hat from z, s_hat from y)` for every row.
pub fn adversary_estimates(batch: &SampleBatch, j: &JointZS, p: &Prior) -> Result<(Matrix, Matrix)> {
    let z = batch.z()?;
    Ok((estimate_rows(z, j)?, estimate_rows(&batch.y, &undistorted_joint(p))?))
}

/// Mean squared error of the MMSE adversary observing `z` and, for
/// reference, observing the undistorted `y`.
pub fn adversary_mse(batch: &SampleBatch, j: &JointZS, p: &Prior) -> Result<(Estimate, Estimate)> {
    if j.n_s() != batch.s.ncols() {
        return Err(Error::dims("joint n_s vs batch s columns", batch.s.ncols(), j.n_s()));
    }
    let (from_z, from_y) = adversary_estimates(batch, j, p)?;
    let err = |est: &Matrix| {
        let d = est - &batch.s;
        Estimate::from_values(d.row_iter().map(|r| r.norm_squared()).collect::<Vec<_>>().into_iter())
    };
    Ok((err(&from_z), err(&from_y)))
}

fn sample_covariance(x: &Matrix) -> SymMatrix {
    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let mut c = x.clone();
    for mut r in c.row_iter_mut() {
        r -= &mean;
    }
    SymMatrix::symmetrized(c.transpose() * &c / (n - 1.0))
}

/// Gaussian-formula leakage evaluated on the empirical covariance of
/// `(z, s)`.
///
/// For non-Gaussian batches this estimates the leakage of the moment-matched
/// Gaussian surrogate, not the true mutual information.
pub fn plugin_leakage(batch: &SampleBatch, base: LogBase) -> Result<f64> {
    let z = batch.z()?;
    let (ns, nz) = (batch.s.ncols(), z.ncols());
    let required = (ns + nz) * (ns + nz);
    if batch.len() <= required {
        return Err(Error::InsufficientSamples {
            required,
            found: batch.len(),
        });
    }
    let mut zs = Matrix::zeros(batch.len(), nz + ns);
    zs.view_mut((0, 0), (batch.len(), nz)).copy_from(z);
    zs.view_mut((0, nz), (batch.len(), ns)).copy_from(&batch.s);
    let c = sample_covariance(&zs);
    let sigma_z = SymMatrix::symmetrized(c.view((0, 0), (nz, nz)).into_owned());
    let sigma_s = SymMatrix::symmetrized(c.view((nz, nz), (ns, ns)).into_owned());
    let cross = c.view((0, nz), (nz, ns)).into_owned();
    gaussian_leakage(&sigma_s, &sigma_z, &cross, base).map_err(|e| e.relabel("sample covariance"))
}

/// Writes one CSV row per sample with columns `s_*, y_*, z_*` and, when
/// given, the adversary estimates `s_hat_y_*, s_hat_z_*`.
pub fn write_csv<W: Write>(batch: &SampleBatch, estimates: Option<(&Matrix, &Matrix)>, out: W) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv write failed: {e}"));
    let mut wtr = csv::Writer::from_writer(out);
    let (ns, ny) = (batch.s.ncols(), batch.y.ncols());
    let mut header: Vec<String> = (1..=ns).map(|i| format!("s_{i}")).collect();
    header.extend((1..=ny).map(|i| format!("y_{i}")));
    if batch.z.is_some() {
        header.extend((1..=ny).map(|i| format!("z_{i}")));
    }
    if estimates.is_some() {
        header.extend((1..=ns).map(|i| format!("s_hat_y_{i}")));
        header.extend((1..=ns).map(|i| format!("s_hat_z_{i}")));
    }
    wtr.write_record(&header).map_err(io)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for r in 0..batch.len() {
        row.clear();
        row.extend(batch.s.row(r).iter().map(|v| v.to_string()));
        row.extend(batch.y.row(r).iter().map(|v| v.to_string()));
        if let Some(z) = &batch.z {
            row.extend(z.row(r).iter().map(|v| v.to_string()));
        }
        if let Some((from_z, from_y)) = estimates {
            row.extend(from_y.row(r).iter().map(|v| v.to_string()));
            row.extend(from_z.row(r).iter().map(|v| v.to_string()));
        }
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush()
        .map_err(|e| Error::InvalidArgument(format!("csv write failed: {e}")))?;
    Ok(())
}

/// Random prior with joint covariance `scale * (M M^T / n + 0.1 I)`, `M`
/// standard normal, and means uniform in `[-sqrt(scale), sqrt(scale)]`.
pub fn random_prior(n_s: usize, n_y: usize, scale: f64, seed: u64) -> Prior {
    let n = n_s + n_y;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let joint = (&m * m.transpose() / n as f64 + Matrix::identity(n, n) * 0.1) * scale;
    let half = scale.sqrt();
    let unif = Uniform::new_inclusive(-half, half).expect("finite range");
    let mu = Vector::from_fn(n, |_, _| unif.sample(&mut rng));
    Prior {
        mu_s: mu.rows(n_y, n_s).into_owned(),
        sigma_s: SymMatrix::symmetrized(joint.view((n_y, n_y), (n_s, n_s)).into_owned()),
        mu_y: mu.rows(0, n_y).into_owned(),
        sigma_y: SymMatrix::symmetrized(joint.view((0, 0), (n_y, n_y)).into_owned()),
        sigma_ys: joint.view((0, n_y), (n_y, n_s)).into_owned(),
    }
}
