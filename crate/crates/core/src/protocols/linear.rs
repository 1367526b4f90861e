//! Local linear operations. None of these communicate, except that a
//! pending input is settled first.

use crate::error::{Error, Result};
use crate::protocols::clip::clip_truncate;
use crate::ring::{FixedPointConfig, RingElement};
use crate::runtime::party::Party;
use crate::sharing::{PartyId, SharedTensor};

fn same_shape(x: &SharedTensor, y: &SharedTensor) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch { expected: x.shape().to_vec(), found: y.shape().to_vec() });
    }
    Ok(())
}

/// Settles the inputs, then applies `f` to the holder's share data.
fn local_map(
    p: &mut Party,
    xs: &[&SharedTensor],
    shape: Vec<usize>,
    f: impl FnOnce(PartyId, &[SharedTensor]) -> Vec<RingElement>,
) -> Result<SharedTensor> {
    let xs = p.settle(xs)?;
    let id = p.fresh_id();
    let data = if p.is_holder() { f(p.role(), &xs) } else { Vec::new() };
    let t = p.make_tensor(id, shape, data)?;
    p.observe(&t);
    Ok(t)
}

/// Broadcasts a public real vector to `n` ring elements.
fn encode_public(fp: &FixedPointConfig, c: &[f64], n: usize) -> Result<Vec<RingElement>> {
    match c.len() {
        1 => Ok(vec![fp.encode(c[0])?; n]),
        m if m == n => fp.encode_slice(c),
        m => Err(Error::LengthMismatch(n, m)),
    }
}

pub fn add_shared(p: &mut Party, x: &SharedTensor, y: &SharedTensor) -> Result<SharedTensor> {
    same_shape(x, y)?;
    local_map(p, &[x, y], x.shape().to_vec(), |_, s| s[0].data().iter().zip(s[1].data()).map(|(&a, &b)| a + b).collect())
}

pub fn sub_shared(p: &mut Party, x: &SharedTensor, y: &SharedTensor) -> Result<SharedTensor> {
    same_shape(x, y)?;
    local_map(p, &[x, y], x.shape().to_vec(), |_, s| s[0].data().iter().zip(s[1].data()).map(|(&a, &b)| a - b).collect())
}

pub fn neg_shared(p: &mut Party, x: &SharedTensor) -> Result<SharedTensor> {
    local_map(p, &[x], x.shape().to_vec(), |_, s| s[0].data().iter().map(|&a| -a).collect())
}

/// `x + c` for a public `c` (scalar or same length); only `P0` adds.
pub fn add_public(p: &mut Party, x: &SharedTensor, c: &[f64]) -> Result<SharedTensor> {
    let enc = encode_public(&p.fp(), c, x.numel())?;
    local_map(p, &[x], x.shape().to_vec(), |role, s| match role {
        PartyId::P0 => s[0].data().iter().zip(&enc).map(|(&a, &b)| a + b).collect(),
        _ => s[0].data().to_vec(),
    })
}

/// `c - x` for a public `c` (scalar or same length).
pub fn public_sub(p: &mut Party, c: &[f64], x: &SharedTensor) -> Result<SharedTensor> {
    let enc = encode_public(&p.fp(), c, x.numel())?;
    local_map(p, &[x], x.shape().to_vec(), |role, s| match role {
        PartyId::P0 => s[0].data().iter().zip(&enc).map(|(&a, &b)| b - a).collect(),
        _ => s[0].data().iter().map(|&a| -a).collect(),
    })
}

/// Adds a shared bias of length `H` to every row of a `B x H` tensor.
pub fn add_bias(p: &mut Party, x: &SharedTensor, b: &SharedTensor) -> Result<SharedTensor> {
    let h = *x.shape().last().ok_or(Error::BadAxis { axis: 0, ndim: 0 })?;
    if b.numel() != h {
        return Err(Error::ShapeMismatch { expected: vec![h], found: b.shape().to_vec() });
    }
    local_map(p, &[x, b], x.shape().to_vec(), |_, s| {
        let bias = s[1].data();
        s[0].data().iter().enumerate().map(|(i, &a)| a + bias[i % h]).collect()
    })
}

/// Multiplication by a public integer: exact, no truncation.
pub fn mul_public_int(p: &mut Party, x: &SharedTensor, k: i64) -> Result<SharedTensor> {
    let k = RingElement::from_signed(k);
    local_map(p, &[x], x.shape().to_vec(), |_, s| s[0].data().iter().map(|&a| a * k).collect())
}

/// Multiplication by a public real scalar: encode, multiply, clip, truncate.
pub fn mul_public_real(p: &mut Party, x: &SharedTensor, c: f64) -> Result<SharedTensor> {
    mul_public_reals(p, x, &[c])
}

/// Element-wise multiplication by public reals (scalar or same length).
pub fn mul_public_reals(p: &mut Party, x: &SharedTensor, c: &[f64]) -> Result<SharedTensor> {
    let enc = encode_public(&p.fp(), c, x.numel())?;
    let x = p.settle(&[x])?.pop().unwrap();
    p.scope("mul_public", |p| {
        let id = p.fresh_id();
        let data = if p.is_holder() { x.data().iter().zip(&enc).map(|(&a, &b)| a * b).collect() } else { Vec::new() };
        clip_truncate(p, id, x.shape().to_vec(), data)
    })
}

/// Transpose of a 2-D tensor.
pub fn transpose_local(p: &mut Party, x: &SharedTensor) -> Result<SharedTensor> {
    let &[r, c] = x.shape() else {
        return Err(Error::BadAxis { axis: 1, ndim: x.shape().len() });
    };
    local_map(p, &[x], vec![c, r], |_, s| {
        let d = s[0].data();
        let mut out = vec![RingElement::ZERO; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = d[i * c + j];
            }
        }
        out
    })
}

/// Sums over `axis`, dropping it from the shape.
pub fn sum_axis(p: &mut Party, x: &SharedTensor, axis: usize) -> Result<SharedTensor> {
    let shape = x.shape().to_vec();
    if axis >= shape.len() {
        return Err(Error::BadAxis { axis, ndim: shape.len() });
    }
    let outer: usize = shape[..axis].iter().product();
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out_shape = shape.clone();
    out_shape.remove(axis);
    local_map(p, &[x], out_shape, |_, s| {
        let d = s[0].data();
        let mut out = vec![RingElement::ZERO; outer * inner];
        for o in 0..outer {
            for k in 0..len {
                let base = (o * len + k) * inner;
                for i in 0..inner {
                    out[o * inner + i] += d[base + i];
                }
            }
        }
        out
    })
}

/// Gathers rows (first-axis slices) of `x`.
pub fn select_rows(p: &mut Party, x: &SharedTensor, rows: &[usize]) -> Result<SharedTensor> {
    let shape = x.shape().to_vec();
    let Some((&n, rest)) = shape.split_first() else {
        return Err(Error::BadAxis { axis: 0, ndim: 0 });
    };
    if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
        return Err(Error::Protocol(format!("row {bad} out of range for {n} rows")));
    }
    let stride: usize = rest.iter().product();
    let mut out_shape = vec![rows.len()];
    out_shape.extend_from_slice(rest);
    local_map(p, &[x], out_shape, |_, s| {
        let d = s[0].data();
        rows.iter().flat_map(|&r| d[r * stride..(r + 1) * stride].iter().copied()).collect()
    })
}

pub fn reshape(p: &mut Party, x: &SharedTensor, shape: &[usize]) -> Result<SharedTensor> {
    if shape.iter().product::<usize>() != x.numel() {
        return Err(Error::ShapeMismatch { expected: x.shape().to_vec(), found: shape.to_vec() });
    }
    local_map(p, &[x], shape.to_vec(), |_, s| s[0].data().to_vec())
}
