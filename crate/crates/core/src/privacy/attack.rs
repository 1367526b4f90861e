//! Histogram attack: match a leaked hidden representation to auxiliary
//! samples by comparing histograms of pairwise distances.
//!
//! Distances are divided by their mean before binning so that the unknown
//! scale of the projection cancels. Histograms cover `[0, HIST_RANGE)` in
//! normalised units; larger distances land in the last bin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::privacy::{gaussian_matrix, pairwise_distances, permute_hidden, SampleMatrix};

pub const DEFAULT_BINS: usize = 50;
pub const HIST_RANGE: f64 = 3.0;

/// Normalised histogram of `row` without entry `skip`.
pub fn distance_histogram(row: &[f64], skip: usize, bins: usize) -> Vec<f64> {
    let mut hist = vec![0.0; bins];
    let others = row.len().saturating_sub(1);
    if others == 0 || bins == 0 {
        return hist;
    }
    let mean = row.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, v)| v).sum::<f64>() / others as f64;
    let width = HIST_RANGE / bins as f64;
    for (i, &v) in row.iter().enumerate() {
        if i == skip {
            continue;
        }
        let t = if mean > 0.0 { v / mean } else { 0.0 };
        hist[((t / width) as usize).min(bins - 1)] += 1.0 / others as f64;
    }
    hist
}

/// Earth mover's distance between two histograms on the same bins: the L1
/// distance between their CDFs times the bin width.
pub fn emd(p: &[f64], q: &[f64], width: f64) -> f64 {
    let (mut cp, mut cq, mut acc) = (0.0, 0.0, 0.0);
    for (a, b) in p.iter().zip(q) {
        cp += a;
        cq += b;
        acc += (cp - cq).abs();
    }
    acc * width
}

fn histograms(x: &SampleMatrix, bins: usize) -> Vec<Vec<f64>> {
    let n = x.n();
    let d = pairwise_distances(x);
    (0..n).into_par_iter().map(|k| distance_histogram(&d[k * n..(k + 1) * n], k, bins)).collect()
}

/// Top-`k` auxiliary indices per leaked row, most similar first.
pub fn histogram_attack(leaked: &SampleMatrix, aux: &SampleMatrix, bins: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if aux.n() < 2 || aux.n() < k {
        return Err(Error::EmptyAux);
    }
    if leaked.n() < 2 || bins == 0 {
        return Err(Error::Data("need at least two leaked rows and one bin".into()));
    }
    let width = HIST_RANGE / bins as f64;
    let ha = histograms(aux, bins);
    let hl = histograms(leaked, bins);
    Ok(hl
        .par_iter()
        .map(|t| {
            let mut scored: Vec<(f64, usize)> = ha.iter().enumerate().map(|(i, h)| (emd(t, h, width), i)).collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            scored.into_iter().take(k).map(|(_, i)| i).collect()
        })
        .collect())
}

/// Two unit-variance Gaussian clusters whose centres are `CLUSTER_GAP`
/// apart. Label 1 has weight `MINORITY_WEIGHT`, so a point's distance
/// histogram depends on its cluster.
pub fn two_clusters(n: usize, d: usize, seed: u64) -> (SampleMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = CLUSTER_GAP / 2.0 / (d as f64).sqrt();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = usize::from(rng.random_bool(MINORITY_WEIGHT));
        let centre = if c == 0 { shift } else { -shift };
        data.extend((0..d).map(|_| centre + rng.sample::<f64, _>(StandardNormal)));
        labels.push(c);
    }
    (SampleMatrix::new(n, d, data).expect("shape"), labels)
}

pub const CLUSTER_GAP: f64 = 10.0;
pub const MINORITY_WEIGHT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    /// Fraction of top-`k` candidates sharing the target's cluster.
    pub same_cluster_rate: f64,
    /// The same fraction for uniformly random candidates.
    pub chance: f64,
    pub targets: usize,
    pub k: usize,
}

/// Runs the attack on [`two_clusters`] data projected `d -> h` by a
/// Gaussian map. `batch = None` leaks the projection as is; `Some(b)`
/// permutes groups of `b` rows the way the permutation protocol does.
pub fn attack_demo(n_target: usize, n_aux: usize, d: usize, h: usize, batch: Option<usize>, k: usize, seed: u64) -> Result<AttackOutcome> {
    let (xt, lt) = two_clusters(n_target, d, seed);
    let (xa, la) = two_clusters(n_aux, d, seed.wrapping_add(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let a = gaussian_matrix(d, h, 1.0 / (d as f64).sqrt(), &mut rng);
    let mut leaked = xt.project(&a, h)?;
    if let Some(b) = batch {
        leaked = permute_hidden(&leaked, b, &mut rng);
    }
    let top = histogram_attack(&leaked, &xa, DEFAULT_BINS, k)?;
    let hits: usize = top.iter().zip(&lt).map(|(c, &l)| c.iter().filter(|&&i| la[i] == l).count()).sum();
    let aux_ones = la.iter().filter(|&&l| l == 1).count() as f64 / n_aux as f64;
    let chance = lt.iter().map(|&l| if l == 1 { aux_ones } else { 1.0 - aux_ones }).sum::<f64>() / n_target as f64;
    Ok(AttackOutcome { same_cluster_rate: hits as f64 / (n_target * k) as f64, chance, targets: n_target, k })
}
