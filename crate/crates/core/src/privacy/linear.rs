//! Expected distance correlation between `X` and `XA` for a Gaussian map
//! `A: R^d -> R^h` with i.i.d. `N(0, σ²)` entries.
//!
//! With `u = X - X'`, `v = X - X''` and `a = E|Au|/|u|`, `b² = E|Au|²/|u|²`:
//! `E_A V²(X, XA) = a V²(X)` exactly, and `V²(XA) ≈ b² S1 + a² S2 - 2 S3'`
//! where `S3' = E_A E |Au||Av|`. The returned value is
//! `sqrt(a² (S1 + S2 - 2 S3) / (b² S1 + a² S2 - 2 S3'))`, which estimates the
//! ratio returned by [`crate::privacy::dcor`].

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::privacy::{gaussian_matrix, mean_se, pairwise_distances, SampleMatrix};

/// `(a, b)` for Gaussian `A` with `h` outputs: `a = σ√2 Γ((h+1)/2)/Γ(h/2)`,
/// `b = σ√h`.
pub fn norm_moments(h: usize, sigma: f64) -> (f64, f64) {
    let hf = h as f64;
    let a = sigma * 2f64.sqrt() * (ln_gamma((hf + 1.0) / 2.0) - ln_gamma(hf / 2.0)).exp();
    (a, sigma * hf.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearDcorTerms {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    /// `E_A E |Au||Av|`, Monte Carlo over `A`.
    pub s3_prime: f64,
    pub a: f64,
    pub b: f64,
}

impl LinearDcorTerms {
    pub fn value(&self) -> f64 {
        let num = self.a * self.a * (self.s1 + self.s2 - 2.0 * self.s3);
        let den = self.b * self.b * self.s1 + self.a * self.a * self.s2 - 2.0 * self.s3_prime;
        if den > 0.0 { (num / den).sqrt().min(1.0) } else { 0.0 }
    }

    /// The expression with `a²` on `S1`, `b²` on `S2` and the cross term
    /// `E_A E |u||Av| = a S3`; kept for comparison with [`Self::value`].
    pub fn swapped_value(&self) -> f64 {
        let num = self.a * self.a * (self.s1 + self.s2 - 2.0 * self.s3);
        let den = self.a * self.a * self.s1 + self.b * self.b * self.s2 - 2.0 * self.a * self.s3;
        if den > 0.0 { (num / den).sqrt() } else { f64::NAN }
    }
}

/// `S1 = mean d²`, `S2 = (mean d)²`, `S3 = mean_k (rowmean_k d)²`, the
/// V-statistic moments of a distance matrix.
fn moments(d: &[f64], n: usize) -> (f64, f64, f64) {
    let nn = (n * n) as f64;
    let s1 = d.iter().map(|v| v * v).sum::<f64>() / nn;
    let m = d.iter().sum::<f64>() / nn;
    let s3 = d.chunks(n).map(|r| (r.iter().sum::<f64>() / n as f64).powi(2)).sum::<f64>() / n as f64;
    (s1, m * m, s3)
}

pub fn linear_dcor_terms(x: &SampleMatrix, h: usize, sigma: f64, mc_samples: usize, seed: u64) -> Result<LinearDcorTerms> {
    let n = x.n();
    if n < 2 || h == 0 || mc_samples == 0 {
        return Err(Error::DegenerateData);
    }
    let dx = pairwise_distances(x);
    let (s1, s2, s3) = moments(&dx, n);
    let dcov = s1 + s2 - 2.0 * s3;
    if dcov.is_nan() || dcov <= 1e-12 * s1 {
        return Err(Error::DegenerateData);
    }
    let s3_prime = (0..mc_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
            let a = gaussian_matrix(x.d(), h, sigma, &mut rng);
            let dy = pairwise_distances(&x.project(&a, h).expect("shape"));
            moments(&dy, n).2
        })
        .sum::<f64>()
        / mc_samples as f64;
    let (a, b) = norm_moments(h, sigma);
    Ok(LinearDcorTerms { s1, s2, s3, s3_prime, a, b })
}

pub fn expected_dcor_linear(x: &SampleMatrix, h: usize, sigma: f64, mc_samples: usize, seed: u64) -> Result<f64> {
    Ok(linear_dcor_terms(x, h, sigma, mc_samples, seed)?.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GEstimate {
    pub theta: f64,
    pub mean: f64,
    pub std_err: f64,
}

/// Monte Carlo `g(θ) = E_A |Ax||Ay|` for unit `x, y` at angle `θ`. By
/// rotation invariance only two columns of `A` matter; the same draws are
/// used for every `θ`.
pub fn g_theta_mc(d: usize, h: usize, sigma: f64, thetas: &[f64], samples: usize, seed: u64) -> Result<Vec<GEstimate>> {
    if d < 2 || h == 0 || samples < 2 {
        return Err(Error::Config("g(θ) needs d >= 2, h >= 1 and at least 2 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut vals = vec![Vec::with_capacity(samples); thetas.len()];
    for _ in 0..samples {
        let a0: Vec<f64> = (0..h).map(|_| normal.sample(&mut rng)).collect();
        let a1: Vec<f64> = (0..h).map(|_| normal.sample(&mut rng)).collect();
        for (t, &theta) in thetas.iter().enumerate() {
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            let (mut nx, mut ny) = (0.0, 0.0);
            for (p, q) in a0.iter().zip(&a1) {
                nx += (c * p + s * q).powi(2);
                ny += (c * p - s * q).powi(2);
            }
            vals[t].push((nx * ny).sqrt());
        }
    }
    Ok(thetas
        .iter()
        .zip(vals)
        .map(|(&theta, v)| {
            let (mean, std_err) = mean_se(&v);
            GEstimate { theta, mean, std_err }
        })
        .collect())
}

fn interpolate(table: &[GEstimate], theta: f64) -> f64 {
    let t = theta.min(std::f64::consts::PI - theta).clamp(0.0, FRAC_PI_2);
    match table.iter().position(|g| g.theta >= t) {
        Some(0) => table[0].mean,
        Some(i) => {
            let (lo, hi) = (&table[i - 1], &table[i]);
            lo.mean + (hi.mean - lo.mean) * (t - lo.theta) / (hi.theta - lo.theta)
        }
        None => table.last().map_or(0.0, |g| g.mean),
    }
}

/// `S3'` through `g`: the mean over all index triples of
/// `g(θ_klm) |x_k - x_l||x_k - x_m|`, with `g` linearly interpolated from a
/// table sorted by angle on `[0, π/2]`. `O(n³)`.
pub fn s3_prime_via_g(x: &SampleMatrix, table: &[GEstimate]) -> f64 {
    let n = x.n();
    let d = pairwise_distances(x);
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut acc = 0.0;
            for l in 0..n {
                let u = d[k * n + l];
                if u == 0.0 {
                    continue;
                }
                for m in 0..n {
                    let v = d[k * n + m];
                    if v == 0.0 {
                        continue;
                    }
                    let w = d[l * n + m];
                    let cos = ((u * u + v * v - w * w) / (2.0 * u * v)).clamp(-1.0, 1.0);
                    acc += interpolate(table, cos.acos()) * u * v;
                }
            }
            acc
        })
        .sum();
    total / (n * n * n) as f64
}
