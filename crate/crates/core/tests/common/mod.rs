#![allow(dead_code)]

use gaussmech::gaussmat::{Matrix, SymMatrix, Vector};
use gaussmech::model::{Mechanism, Prior};
use gaussmech::sdp::{DistortionBudget, SynthesisSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct Scalar {
    pub ss: f64,
    pub sy: f64,
    pub sys: f64,
    pub mu_y: f64,
    pub w: f64,
    pub eps: f64,
}

impl Scalar {
    pub fn spec(&self) -> SynthesisSpec {
        let prior = Prior {
            mu_s: Vector::zeros(1),
            sigma_s: SymMatrix::from_diagonal(&[self.ss]),
            mu_y: Vector::from_element(1, self.mu_y),
            sigma_y: SymMatrix::from_diagonal(&[self.sy]),
            sigma_ys: Matrix::from_element(1, 1, self.sys),
        };
        SynthesisSpec::new(
            prior,
            Matrix::from_element(1, 1, self.w),
            DistortionBudget::Bounded(self.eps),
        )
        .unwrap()
    }

    /// Leakage in bits of `Z = g Y + V`, `V ~ N(0, v)`.
    pub fn leakage(&self, g: f64, v: f64) -> f64 {
        let rho2 = (g * self.sys).powi(2) / (self.ss * (g * g * self.sy + v));
        -0.5 * (1.0 - rho2).log2()
    }

    pub fn distortion(&self, g: f64, v: f64) -> f64 {
        self.w * self.w * ((g - 1.0).powi(2) * (self.sy + self.mu_y * self.mu_y) + v)
    }

    /// Brute-force minimum over `g in [-3, 3]`, `v in (0, 10]`: a coarse grid
    /// followed by two refinement passes around the incumbent.
    /// Returns `(leakage_bits, g, v)`.
    pub fn oracle(&self) -> (f64, f64, f64) {
        let (mut g_lo, mut g_hi, mut v_lo, mut v_hi) = (-3.0, 3.0, 0.0, 10.0);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for pass in 0..3 {
            let (ng, nv) = if pass == 0 { (241, 200) } else { (201, 201) };
            let dg = (g_hi - g_lo) / (ng - 1) as f64;
            let dv = (v_hi - v_lo) / (nv - 1) as f64;
            for i in 0..ng {
                let g = g_lo + dg * i as f64;
                for k in 0..nv {
                    let v = v_lo + dv * k as f64;
                    if v <= 0.0 || self.distortion(g, v) > self.eps {
                        continue;
                    }
                    let l = self.leakage(g, v);
                    if l < best.0 {
                        best = (l, g, v);
                    }
                }
            }
            g_lo = (best.1 - 2.0 * dg).max(-3.0);
            g_hi = (best.1 + 2.0 * dg).min(3.0);
            v_lo = (best.2 - 2.0 * dv).max(0.0);
            v_hi = (best.2 + 2.0 * dv).min(10.0);
        }
        best
    }

    /// Random non-degenerate instance whose budget sits below the
    /// zero-leakage threshold `w^2 (sigma_y + mu_y^2)`.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ss = rng.random_range(0.5..2.0);
        let sy = rng.random_range(0.5..2.0);
        let rho: f64 = rng.random_range(-0.9..0.9);
        let mu_y = rng.random_range(-1.0..1.0);
        let w = rng.random_range(0.5..1.5);
        let frac = rng.random_range(0.1..0.7);
        Scalar {
            ss,
            sy,
            sys: rho * (ss * sy).sqrt(),
            mu_y,
            w,
            eps: frac * w * w * (sy + mu_y * mu_y),
        }
    }
}

/// Random mechanism with a well-conditioned noise covariance.
pub fn random_mechanism(n: usize, seed: u64) -> Mechanism {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let sv = SymMatrix::new(&a * a.transpose() + Matrix::identity(n, n) * 0.1).unwrap();
    Mechanism::new(g, sv).unwrap()
}

/// Random weight close to the identity, not symmetric.
pub fn random_weight(n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(
        n,
        n,
        |i, j| if i == j { 1.0 } else { 0.0 } + rng.random_range(-0.15..0.15),
    )
}
