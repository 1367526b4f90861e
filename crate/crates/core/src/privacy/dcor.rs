//! Empirical distance correlation from doubly-centred distance matrices.
//!
//! [`dcor`] returns `V²(X,Y) / sqrt(V²(X,X) V²(Y,Y))`, the ratio of squared
//! distance covariances. Much of the statistics literature calls the square
//! root of that ratio the distance correlation; [`DcorEstimate::sqrt`] gives it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::privacy::{mean_se, SampleMatrix};

/// Euclidean distances between all rows, row-major `n x n`.
pub fn pairwise_distances(x: &SampleMatrix) -> Vec<f64> {
    let n = x.n();
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n.max(1)).enumerate().for_each(|(k, row)| {
        let xk = x.row(k);
        for (l, o) in row.iter_mut().enumerate() {
            if l != k {
                *o = xk.iter().zip(x.row(l)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            }
        }
    });
    out
}

/// `A_kl = d_kl - rowmean_k - colmean_l + grandmean`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredDistanceMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl CenteredDistanceMatrix {
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.data[k * self.n + l]
    }

    /// `(1/n²) Σ A_kl B_kl`.
    pub fn dcov2(&self, other: &CenteredDistanceMatrix) -> f64 {
        let s: f64 = self.data.par_iter().zip(&other.data).map(|(a, b)| a * b).sum();
        s / (self.n * self.n) as f64
    }
}

pub fn double_center(d: &[f64], n: usize) -> CenteredDistanceMatrix {
    assert_eq!(d.len(), n * n, "distance matrix must be n x n");
    let nf = n as f64;
    let row: Vec<f64> = d.chunks(n.max(1)).map(|r| r.iter().sum::<f64>() / nf).collect();
    let mut col = vec![0.0; n];
    for r in d.chunks(n.max(1)) {
        col.iter_mut().zip(r).for_each(|(c, v)| *c += v);
    }
    col.iter_mut().for_each(|c| *c /= nf);
    let grand = row.iter().sum::<f64>() / nf;
    let mut data = d.to_vec();
    data.par_chunks_mut(n.max(1)).enumerate().for_each(|(k, r)| {
        for (l, v) in r.iter_mut().enumerate() {
            *v += grand - row[k] - col[l];
        }
    });
    CenteredDistanceMatrix { n, data }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcorEstimate {
    pub value: f64,
    pub n: usize,
    pub repeats: usize,
    /// Standard error of `value` over repeats; zero for a single evaluation.
    pub std_err: f64,
}

impl DcorEstimate {
    pub fn single(value: f64, n: usize) -> Self {
        Self { value, n, repeats: 1, std_err: 0.0 }
    }

    pub fn from_repeats(values: &[f64], n: usize) -> Self {
        let (value, std_err) = mean_se(values);
        Self { value, n, repeats: values.len(), std_err }
    }

    /// Square root of the ratio, the other common convention.
    pub fn sqrt(&self) -> f64 {
        self.value.max(0.0).sqrt()
    }

    /// Normal-approximation 95% interval.
    pub fn ci95(&self) -> (f64, f64) {
        (self.value - 1.96 * self.std_err, self.value + 1.96 * self.std_err)
    }
}

fn ratio(vxy: f64, vx: f64, vy: f64) -> f64 {
    let den = (vx * vy).sqrt();
    if den.is_nan() || den <= 0.0 || den.is_infinite() {
        return 0.0;
    }
    (vxy / den).clamp(0.0, 1.0)
}

/// Centred distances of a fixed sample, reused against many `Y`.
#[derive(Debug, Clone)]
pub struct DcorReference {
    centered: CenteredDistanceMatrix,
    v2: f64,
}

impl DcorReference {
    pub fn new(x: &SampleMatrix) -> Self {
        let centered = double_center(&pairwise_distances(x), x.n());
        let v2 = centered.dcov2(&centered);
        Self { centered, v2 }
    }

    pub fn n(&self) -> usize {
        self.centered.n
    }

    pub fn against(&self, y: &SampleMatrix) -> Result<f64> {
        if y.n() != self.n() {
            return Err(Error::LengthMismatch(self.n(), y.n()));
        }
        Ok(self.against_distances(&pairwise_distances(y)))
    }

    pub fn against_distances(&self, dy: &[f64]) -> f64 {
        let b = double_center(dy, self.n());
        ratio(self.centered.dcov2(&b), self.v2, b.dcov2(&b))
    }
}

pub fn dcor(x: &SampleMatrix, y: &SampleMatrix) -> Result<DcorEstimate> {
    if x.n() != y.n() {
        return Err(Error::LengthMismatch(x.n(), y.n()));
    }
    Ok(DcorEstimate::single(DcorReference::new(x).against(y)?, x.n()))
}

fn u_center(d: &[f64], n: usize) -> Vec<f64> {
    let nf = n as f64;
    let rows: Vec<f64> = d.chunks(n).map(|r| r.iter().sum()).collect();
    let total: f64 = rows.iter().sum();
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(k, r)| {
        for (l, v) in r.iter_mut().enumerate() {
            if k != l {
                *v = d[k * n + l] - rows[k] / (nf - 2.0) - rows[l] / (nf - 2.0) + total / ((nf - 1.0) * (nf - 2.0));
            }
        }
    });
    out
}

/// Bias-corrected ratio built from U-centred distances. Unlike [`dcor`] it
/// is centred on zero for independent samples and may come out negative.
/// Needs `n > 3`.
pub fn dcor_bias_corrected(x: &SampleMatrix, y: &SampleMatrix) -> Result<f64> {
    if x.n() != y.n() {
        return Err(Error::LengthMismatch(x.n(), y.n()));
    }
    if x.n() <= 3 {
        return Err(Error::Data("bias-corrected distance correlation needs more than 3 samples".into()));
    }
    Ok(bias_corrected_from_distances(&pairwise_distances(x), &pairwise_distances(y), x.n()))
}

pub fn bias_corrected_from_distances(dx: &[f64], dy: &[f64], n: usize) -> f64 {
    let a = u_center(dx, n);
    let b = u_center(dy, n);
    let dot = |p: &[f64], q: &[f64]| p.par_iter().zip(q).map(|(u, v)| u * v).sum::<f64>();
    let (ab, aa, bb) = (dot(&a, &b), dot(&a, &a), dot(&b, &b));
    let den = (aa * bb).sqrt();
    if den > 0.0 { ab / den } else { 0.0 }
}
