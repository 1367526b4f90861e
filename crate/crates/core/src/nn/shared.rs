//! Secret-shared inference and backpropagation.

use crate::error::{Error, Result};
use crate::nn::{batch_order, Activation, Arch, PlainNet, TrainConfig};
use crate::nn::plain::PlainLayer;
use crate::protocols::{
    cap, matmul_shared, mul_public_int, mul_public_real, mul_shared, public_sub, select_rows, share_reals, sub_shared, sum_axis, transpose_local,
    ElementwiseFn,
};
use crate::runtime::party::Party;
use crate::sharing::{PartyId, SharedTensor};

#[derive(Debug, Clone)]
pub struct SharedLayer {
    /// `fan_in x fan_out`.
    pub w: SharedTensor,
    pub b: SharedTensor,
    pub act: Activation,
}

#[derive(Debug, Clone)]
pub struct SharedNet {
    pub layers: Vec<SharedLayer>,
}

impl SharedNet {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn arch(&self) -> Arch {
        Arch { input: self.layers[0].w.shape()[0], layers: self.layers.iter().map(|l| (l.w.shape()[1], l.act)).collect() }
    }
}

/// Shares a float network held by `owner`. Other parties pass `None`.
pub fn share_net(p: &mut Party, owner: PartyId, net: Option<&PlainNet>, arch: &Arch) -> Result<SharedNet> {
    let mine = p.role() == owner;
    if mine && net.is_none() {
        return Err(Error::Protocol(format!("{owner} owns the model but has none")));
    }
    let mut layers = Vec::new();
    for (i, (fan_in, fan_out, act)) in arch.dims().into_iter().enumerate() {
        let l = net.filter(|_| mine).map(|n| &n.layers[i]);
        if let Some(l) = l {
            if (l.fan_in, l.fan_out) != (fan_in, fan_out) {
                return Err(Error::ShapeMismatch { expected: vec![fan_in, fan_out], found: vec![l.fan_in, l.fan_out] });
            }
        }
        let w = share_reals(p, owner, l.map(|l| l.w.as_slice()), &[fan_in, fan_out])?;
        let b = share_reals(p, owner, l.map(|l| l.b.as_slice()), &[fan_out])?;
        layers.push(SharedLayer { w, b, act });
    }
    Ok(SharedNet { layers })
}

/// Opens every parameter to all parties.
pub fn reveal_net(p: &mut Party, net: &SharedNet) -> Result<PlainNet> {
    let mut layers = Vec::new();
    for l in &net.layers {
        let w = p.reveal(&l.w)?;
        let b = p.reveal(&l.b)?;
        layers.push(PlainLayer { fan_in: l.w.shape()[0], fan_out: l.w.shape()[1], w, b, act: l.act });
    }
    Ok(PlainNet { layers })
}

/// Pre-activations `z[i]` and activations `a[i]` (`a[0]` is the input).
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub z: Vec<SharedTensor>,
    pub a: Vec<SharedTensor>,
}

impl ForwardCache {
    pub fn output(&self) -> &SharedTensor {
        self.a.last().expect("non-empty cache")
    }
}

/// Forward pass. The bias add is fused into the matrix product; flipping is
/// enabled only on the last layer and only for flip-compatible activations.
pub fn nn_infer(p: &mut Party, x: &SharedTensor, net: &SharedNet) -> Result<ForwardCache> {
    let first = net.layers.first().ok_or_else(|| Error::Config("network has no layers".into()))?;
    if x.shape().len() != 2 || x.shape()[1] != first.w.shape()[0] {
        return Err(Error::ShapeMismatch { expected: vec![x.shape().first().copied().unwrap_or(0), first.w.shape()[0]], found: x.shape().to_vec() });
    }
    let last = net.layers.len() - 1;
    let mut cache = ForwardCache { z: Vec::new(), a: vec![x.clone()] };
    p.scope("nn_infer", |p| {
        for (i, l) in net.layers.iter().enumerate() {
            let z = matmul_shared(p, cache.a.last().unwrap(), &l.w, Some(&l.b))?;
            let a = match l.act.elementwise() {
                Some(f) => cap(p, &z, f, i == last && f.flip_compatible())?,
                None => z.clone(),
            };
            cache.z.push(z);
            cache.a.push(a);
        }
        Ok(())
    })?;
    Ok(cache)
}

/// One SGD step on squared error, averaged over the batch. Returns the
/// updated network.
pub fn nn_backprop(p: &mut Party, x: &SharedTensor, y: &SharedTensor, net: &SharedNet, lr: f64) -> Result<SharedNet> {
    let cache = nn_infer(p, x, net)?;
    if y.shape() != cache.output().shape() {
        return Err(Error::ShapeMismatch { expected: cache.output().shape().to_vec(), found: y.shape().to_vec() });
    }
    let rows = x.shape()[0];
    p.scope("nn_backprop", |p| {
        let diff = sub_shared(p, cache.output(), y)?;
        let g2 = mul_public_int(p, &diff, 2)?;
        let mut g = mul_public_real(p, &g2, 1.0 / rows as f64)?;
        let mut updated = net.layers.clone();
        for (i, l) in net.layers.iter().enumerate().rev() {
            let a = &cache.a[i + 1];
            g = match l.act {
                Activation::Relu => {
                    let d = cap(p, &cache.z[i], ElementwiseFn::ReluDeriv, false)?;
                    mul_shared(p, &g, &d)?
                }
                Activation::Sigmoid => {
                    let om = public_sub(p, &[1.0], a)?;
                    let d = mul_shared(p, a, &om)?;
                    mul_shared(p, &g, &d)?
                }
                Activation::Tanh => {
                    let sq = mul_shared(p, a, a)?;
                    let d = public_sub(p, &[1.0], &sq)?;
                    mul_shared(p, &g, &d)?
                }
                Activation::Identity => g,
            };
            let at = transpose_local(p, &cache.a[i])?;
            let gw = matmul_shared(p, &at, &g, None)?;
            let gb = sum_axis(p, &g, 0)?;
            if i > 0 {
                let wt = transpose_local(p, &l.w)?;
                g = matmul_shared(p, &g, &wt, None)?;
            }
            let dw = mul_public_real(p, &gw, lr)?;
            let db = mul_public_real(p, &gb, lr)?;
            updated[i].w = sub_shared(p, &l.w, &dw)?;
            updated[i].b = sub_shared(p, &l.b, &db)?;
        }
        Ok(SharedNet { layers: updated })
    })
}

/// Mini-batch SGD over a dataset already shared as `x_all: n x d` and
/// `y_all: n x out`. `after_epoch` runs on every engine after each epoch.
pub fn train_shared(
    p: &mut Party,
    x_all: &SharedTensor,
    y_all: &SharedTensor,
    mut net: SharedNet,
    cfg: &TrainConfig,
    mut after_epoch: impl FnMut(&mut Party, usize, &SharedNet) -> Result<()>,
) -> Result<SharedNet> {
    cfg.validate()?;
    let n = x_all.shape()[0];
    for epoch in 0..cfg.epochs {
        for batch in batch_order(n, cfg.batch_size, cfg.seed, epoch) {
            let bx = select_rows(p, x_all, &batch)?;
            let by = select_rows(p, y_all, &batch)?;
            net = nn_backprop(p, &bx, &by, &net, cfg.lr)?;
        }
        after_epoch(p, epoch, &net)?;
    }
    Ok(net)
}
