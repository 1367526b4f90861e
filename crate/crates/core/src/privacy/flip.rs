//! Sign statistics of randomly flipped predictions as seen by `P2`.

use serde::{Deserialize, Serialize};

use crate::sharing::{gen_mask, CommonPrg};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipStats {
    pub trials: u64,
    pub negatives: u64,
    pub fraction: f64,
    /// Binomial standard error at `p = 1/2`.
    pub std_err: f64,
}

/// Flips `values` with `rounds` fresh masks drawn exactly as the
/// permutation protocol draws them and counts negative results. Zero
/// counts as non-negative.
pub fn flipping_distribution_test(values: &[f64], rounds: usize, seed: u64) -> FlipStats {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut prg = CommonPrg::new(key);
    let mut negatives = 0u64;
    for _ in 0..rounds {
        let mask = gen_mask(&mut prg, values.len());
        negatives += values.iter().zip(&mask).filter(|&(&v, &m)| (if m { -v } else { v }) < 0.0).count() as u64;
    }
    let trials = (rounds * values.len()) as u64;
    let fraction = if trials == 0 { 0.0 } else { negatives as f64 / trials as f64 };
    FlipStats { trials, negatives, fraction, std_err: 0.5 / (trials.max(1) as f64).sqrt() }
}
