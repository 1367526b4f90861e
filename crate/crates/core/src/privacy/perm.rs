//! Permutation error vectors and distance correlation of permuted hidden
//! representations.
//!
//! A permuted vector splits into its element-wise mean `M(x)` and an error
//! vector `e = π[x] - M(x)` orthogonal to `1`. For unit `y ⊥ 1`, exact
//! counting over all permutations gives `E[e·y] = 0` and
//! `Var[e·y] = |e|² / (n - 1)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::privacy::{DcorEstimate, DcorReference, SampleMatrix};

pub const MAX_ENUMERATION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PermMode {
    Enumerate,
    Sample(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationStats {
    /// `M(x)`, every entry the mean of `x`.
    pub mean_vector: Vec<f64>,
    /// `|x - M(x)|`, shared by every permutation.
    pub error_norm: f64,
    pub mean: f64,
    pub variance: f64,
    pub permutations: u64,
    /// `|e|² / (n - 1)`.
    pub exact_variance: f64,
    /// `|e|² / n`.
    pub approx_variance: f64,
}

/// `π[x] - M(x)` where `π[x]_i = x[perm_i]`.
pub fn error_vector(x: &[f64], perm: &[usize]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    perm.iter().map(|&i| x[i] - m).collect()
}

/// Calls `f` on every permutation of `0..n` (Heap's algorithm).
fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

pub fn perm_error_stats(x: &[f64], y: &[f64], mode: PermMode, seed: u64) -> Result<PermutationStats> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    if n < 2 {
        return Err(Error::Data("need at least two entries".into()));
    }
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 || y.iter().sum::<f64>().abs() > 1e-9 {
        return Err(Error::Data("y must be a unit vector orthogonal to the all-ones vector".into()));
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let e2: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    let proj = |perm: &[usize]| perm.iter().zip(y).map(|(&i, yi)| (x[i] - m) * yi).sum::<f64>();

    let mut vals = Vec::new();
    match mode {
        PermMode::Enumerate => {
            if n > MAX_ENUMERATION {
                return Err(Error::TooLargeForEnumeration(n));
            }
            for_each_permutation(n, |p| vals.push(proj(p)));
        }
        PermMode::Sample(k) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p: Vec<usize> = (0..n).collect();
            for _ in 0..k {
                p.shuffle(&mut rng);
                vals.push(proj(&p));
            }
        }
    }
    let cnt = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / cnt;
    let variance = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cnt;
    Ok(PermutationStats {
        mean_vector: vec![m; n],
        error_norm: e2.sqrt(),
        mean,
        variance,
        permutations: vals.len() as u64,
        exact_variance: e2 / (n - 1) as f64,
        approx_variance: e2 / n as f64,
    })
}

/// A random unit vector orthogonal to `1`.
pub fn random_unit_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let m = v.iter().sum::<f64>() / n as f64;
    v.iter_mut().for_each(|x| *x -= m);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Permutes consecutive groups of `batch` rows the way the permutation
/// protocol does: each group is flattened row-major and shuffled as one
/// vector.
pub fn permute_hidden<R: Rng + ?Sized>(y: &SampleMatrix, batch: usize, rng: &mut R) -> SampleMatrix {
    let mut data = y.data().to_vec();
    for chunk in data.chunks_mut(batch.max(1) * y.d().max(1)) {
        chunk.shuffle(rng);
    }
    SampleMatrix::new(y.n(), y.d(), data).expect("same shape")
}

/// Mean of `dcor(X, π[XA])` over `repeats` fresh permutations, with `A` a
/// row-major `d x h` matrix.
pub fn dcor_permuted_hidden(x: &SampleMatrix, a: &[f64], h: usize, repeats: usize, batch: usize, seed: u64) -> Result<DcorEstimate> {
    let y = x.project(a, h)?;
    let reference = DcorReference::new(x);
    let vals: Vec<f64> = (0..repeats.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            reference.against(&permute_hidden(&y, batch, &mut rng))
        })
        .collect::<Result<_>>()?;
    Ok(DcorEstimate::from_repeats(&vals, x.n()))
}
