//! Fully connected networks: shared inference and SGD training, plus a
//! float reference that follows the same steps in double precision.

pub mod data;
pub mod plain;
pub mod shared;
pub mod workload;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::ElementwiseFn;

pub use plain::PlainNet;
pub use shared::{nn_backprop, nn_infer, reveal_net, share_net, train_shared, ForwardCache, SharedLayer, SharedNet};

/// Layer activation. `Identity` skips the permutation protocol entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    pub fn elementwise(self) -> Option<ElementwiseFn> {
        match self {
            Activation::Relu => Some(ElementwiseFn::Relu),
            Activation::Sigmoid => Some(ElementwiseFn::Sigmoid),
            Activation::Tanh => Some(ElementwiseFn::Tanh),
            Activation::Identity => None,
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        self.elementwise().map_or(x, |f| f.apply(x))
    }

    /// Derivative expressed through the pre-activation `z` and activation `a`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => ElementwiseFn::ReluDeriv.apply(z),
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

/// Network shape, written like `20-16-relu-1-sigmoid`: the input width
/// followed by `width-activation` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub input: usize,
    pub layers: Vec<(usize, Activation)>,
}

impl Arch {
    pub fn new(input: usize, layers: Vec<(usize, Activation)>) -> Result<Self> {
        if input == 0 || layers.is_empty() || layers.iter().any(|&(w, _)| w == 0) {
            return Err(Error::Config("architecture needs a positive input width and at least one non-empty layer".into()));
        }
        Ok(Self { input, layers })
    }

    /// `(fan_in, fan_out, activation)` per layer.
    pub fn dims(&self) -> Vec<(usize, usize, Activation)> {
        let mut prev = self.input;
        self.layers
            .iter()
            .map(|&(w, a)| {
                let d = (prev, w, a);
                prev = w;
                d
            })
            .collect()
    }

    pub fn output(&self) -> usize {
        self.layers.last().map(|l| l.0).unwrap_or(self.input)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.input)?;
        for (w, a) in &self.layers {
            write!(f, "-{w}-{}", a.name())?;
        }
        Ok(())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('-').collect();
        if parts.len() < 3 || parts.len().is_multiple_of(2) {
            return Err(Error::Config(format!("bad architecture {s:?}")));
        }
        let num = |t: &str| t.parse::<usize>().map_err(|_| Error::Config(format!("bad width {t:?} in {s:?}")));
        let input = num(parts[0])?;
        let layers = parts[1..].chunks(2).map(|c| Ok((num(c[0])?, c[1].parse()?))).collect::<Result<Vec<_>>>()?;
        Arch::new(input, layers)
    }
}

/// Public training hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be non-negative, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mini-batch order for one epoch, shared by the shared and float runs.
pub fn batch_order(n: usize, batch: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    idx.shuffle(&mut rng);
    idx.chunks(batch).map(|c| c.to_vec()).collect()
}

/// Fraction of rows where `pred >= 0.5` agrees with `label >= 0.5`.
pub fn accuracy(pred: &[f64], labels: &[f64]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let ok = pred.iter().zip(labels).filter(|(&p, &y)| (p >= 0.5) == (y >= 0.5)).count();
    ok as f64 / pred.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arch_round_trip() {
        let a: Arch = "20-16-relu-1-sigmoid".parse().unwrap();
        assert_eq!(a.input, 20);
        assert_eq!(a.layers, vec![(16, Activation::Relu), (1, Activation::Sigmoid)]);
        assert_eq!(a.to_string(), "20-16-relu-1-sigmoid");
        assert_eq!(a.dims(), vec![(20, 16, Activation::Relu), (16, 1, Activation::Sigmoid)]);
        assert!("20".parse::<Arch>().is_err());
        assert!("20-16".parse::<Arch>().is_err());
        assert!("20-0-relu".parse::<Arch>().is_err());
        assert!("20-4-swish".parse::<Arch>().is_err());
    }

    #[test]
    fn batches_cover_all_rows() {
        let b = batch_order(10, 4, 1, 0);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(b, batch_order(10, 4, 1, 0));
        assert_ne!(b, batch_order(10, 4, 1, 1));
    }

    #[test]
    fn accuracy_counts() {
        assert_eq!(accuracy(&[0.9, 0.2, 0.6], &[1.0, 0.0, 0.0]), 2.0 / 3.0);
    }
}
