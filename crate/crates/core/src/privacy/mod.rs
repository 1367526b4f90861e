//! Leakage analysis for permuted activations: distance correlation,
//! expected distance correlation under random linear maps, permutation
//! error-vector statistics, simulated data, the flipping sign test and the
//! histogram attack.

pub mod attack;
pub mod dcor;
pub mod flip;
pub mod linear;
pub mod perm;
pub mod sim;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use attack::{attack_demo, distance_histogram, emd, histogram_attack, two_clusters, AttackOutcome, DEFAULT_BINS};
pub use dcor::{dcor, dcor_bias_corrected, double_center, pairwise_distances, CenteredDistanceMatrix, DcorEstimate, DcorReference};
pub use flip::{flipping_distribution_test, FlipStats};
pub use linear::{expected_dcor_linear, g_theta_mc, linear_dcor_terms, norm_moments, s3_prime_via_g, GEstimate, LinearDcorTerms};
pub use perm::{dcor_permuted_hidden, perm_error_stats, permute_hidden, random_unit_orthogonal, PermMode, PermutationStats};
pub use sim::{ordering_experiment, simulate_distribution, DistributionKind, OrderingResult};

/// `n` samples of dimension `d`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::LengthMismatch(n * d, data.len()));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::LengthMismatch(d, bad.len()));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// `self · w` for a row-major `d x h` matrix `w`.
    pub fn project(&self, w: &[f64], h: usize) -> Result<SampleMatrix> {
        if w.len() != self.d * h {
            return Err(Error::LengthMismatch(self.d * h, w.len()));
        }
        let mut out = vec![0.0; self.n * h];
        out.par_chunks_mut(h.max(1)).enumerate().for_each(|(i, o)| {
            for (t, &xv) in self.row(i).iter().enumerate() {
                for (ov, &wv) in o.iter_mut().zip(&w[t * h..(t + 1) * h]) {
                    *ov += xv * wv;
                }
            }
        });
        SampleMatrix::new(self.n, h, out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SampleMatrix {
        SampleMatrix { n: self.n, d: self.d, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// Row-major `rows x cols` matrix with i.i.d. `N(0, std^2)` entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(0.0, std).expect("finite std");
    (0..rows * cols).map(|_| normal.sample(rng)).collect()
}

/// Mean and standard error of the mean.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
