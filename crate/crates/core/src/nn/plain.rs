//! Double-precision reference network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::nn::{batch_order, Activation, Arch, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlainLayer {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Row-major `fan_in x fan_out`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub act: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlainNet {
    pub layers: Vec<PlainLayer>,
}

fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for t in 0..k {
            let av = a[i * k + t];
            for j in 0..n {
                out[i * n + j] += av * b[t * n + j];
            }
        }
    }
    out
}

/// Per-layer values from a forward pass: `a[0]` is the input.
#[derive(Debug, Clone)]
pub struct PlainCache {
    pub z: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
}

impl PlainNet {
    /// Weights `N(0, 1/fan_in)`, biases zero.
    pub fn init(arch: &Arch, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .dims()
            .into_iter()
            .map(|(fan_in, fan_out, act)| {
                let normal = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).expect("valid std");
                PlainLayer { fan_in, fan_out, w: (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect(), b: vec![0.0; fan_out], act }
            })
            .collect();
        Self { layers }
    }

    pub fn arch(&self) -> Arch {
        Arch { input: self.layers[0].fan_in, layers: self.layers.iter().map(|l| (l.fan_out, l.act)).collect() }
    }

    pub fn forward(&self, x: &[f64], rows: usize) -> PlainCache {
        let mut cache = PlainCache { z: Vec::new(), a: vec![x.to_vec()] };
        for l in &self.layers {
            let mut z = matmul(cache.a.last().unwrap(), &l.w, rows, l.fan_in, l.fan_out);
            for (i, v) in z.iter_mut().enumerate() {
                *v += l.b[i % l.fan_out];
            }
            let a = z.iter().map(|&v| l.act.apply(v)).collect();
            cache.z.push(z);
            cache.a.push(a);
        }
        cache
    }

    pub fn predict(&self, x: &[f64], rows: usize) -> Vec<f64> {
        self.forward(x, rows).a.pop().unwrap()
    }

    /// Mean over rows of the summed squared error.
    pub fn loss(&self, x: &[f64], y: &[f64], rows: usize) -> f64 {
        let p = self.predict(x, rows);
        p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / rows as f64
    }

    /// Parameter gradients of [`PlainNet::loss`], as `(dW, db)` per layer.
    pub fn gradients(&self, x: &[f64], y: &[f64], rows: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        let cache = self.forward(x, rows);
        let out = cache.a.last().unwrap();
        let mut g: Vec<f64> = out.iter().zip(y).map(|(a, b)| 2.0 * (a - b) / rows as f64).collect();
        let mut grads = vec![(Vec::new(), Vec::new()); self.layers.len()];
        for (i, l) in self.layers.iter().enumerate().rev() {
            for (k, gv) in g.iter_mut().enumerate() {
                *gv *= l.act.derivative(cache.z[i][k], cache.a[i + 1][k]);
            }
            let a_prev = &cache.a[i];
            let mut dw = vec![0.0; l.fan_in * l.fan_out];
            for r in 0..rows {
                for p in 0..l.fan_in {
                    let av = a_prev[r * l.fan_in + p];
                    for q in 0..l.fan_out {
                        dw[p * l.fan_out + q] += av * g[r * l.fan_out + q];
                    }
                }
            }
            let mut db = vec![0.0; l.fan_out];
            for r in 0..rows {
                for q in 0..l.fan_out {
                    db[q] += g[r * l.fan_out + q];
                }
            }
            if i > 0 {
                let mut gp = vec![0.0; rows * l.fan_in];
                for r in 0..rows {
                    for p in 0..l.fan_in {
                        gp[r * l.fan_in + p] = (0..l.fan_out).map(|q| g[r * l.fan_out + q] * l.w[p * l.fan_out + q]).sum();
                    }
                }
                g = gp;
            }
            grads[i] = (dw, db);
        }
        grads
    }

    /// One SGD step on a batch.
    pub fn sgd_step(&mut self, x: &[f64], y: &[f64], rows: usize, lr: f64) {
        let grads = self.gradients(x, y, rows);
        for (l, (dw, db)) in self.layers.iter_mut().zip(grads) {
            l.w.iter_mut().zip(dw).for_each(|(w, d)| *w -= lr * d);
            l.b.iter_mut().zip(db).for_each(|(b, d)| *b -= lr * d);
        }
    }

    /// Trains with the same batch order the shared run uses.
    /// `after_epoch` sees the epoch index and the current network.
    pub fn train(&mut self, x: &[f64], y: &[f64], rows: usize, cfg: &TrainConfig, mut after_epoch: impl FnMut(usize, &PlainNet)) {
        let d = self.layers[0].fan_in;
        let o = self.layers.last().unwrap().fan_out;
        for epoch in 0..cfg.epochs {
            for batch in batch_order(rows, cfg.batch_size, cfg.seed, epoch) {
                let bx: Vec<f64> = batch.iter().flat_map(|&r| x[r * d..(r + 1) * d].iter().copied()).collect();
                let by: Vec<f64> = batch.iter().flat_map(|&r| y[r * o..(r + 1) * o].iter().copied()).collect();
                self.sgd_step(&bx, &by, batch.len(), cfg.lr);
            }
            after_epoch(epoch, self);
        }
    }

    /// All parameters flattened layer by layer (`W` then `b`).
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(&l.b).copied()).collect()
    }

    pub fn set_flat_params(&mut self, v: &[f64]) {
        let mut it = v.iter().copied();
        for l in &mut self.layers {
            l.w.iter_mut().chain(l.b.iter_mut()).for_each(|p| *p = it.next().expect("enough parameters"));
        }
    }
}
