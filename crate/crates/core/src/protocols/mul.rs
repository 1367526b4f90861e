//! Beaver multiplication, element-wise and matrix.
//!
//! `P2` deals the triple: `P1`'s shares come from the `(P1,P2)` PRG and
//! `P0`'s arrive in one offline message. `P0` and `P1` then open `x - u` and
//! `y - v` to each other. If an operand still waits on clip indices, `P0`'s
//! opening carries them and `P1` answers only after reading it; otherwise
//! the two openings travel in parallel.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::protocols::clip::clip_truncate;
use crate::ring::{ring_matmul, RingElement};
use crate::runtime::party::Party;
use crate::runtime::wire::{decode_tensors, encode_tensor, MsgType};
use crate::sharing::{dealer_gen_triple, p1_triple_shares, triple_shapes, PartyId, SharedTensor, TripleKind};

pub fn mul_shared(p: &mut Party, x: &SharedTensor, y: &SharedTensor) -> Result<SharedTensor> {
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch { expected: x.shape().to_vec(), found: y.shape().to_vec() });
    }
    p.scope("mul", |p| beaver(p, x, y, None, TripleKind::Elementwise))
}

/// `X * W (+ b)` for `X: B x D`, `W: D x H`, optional shared bias of length
/// `H`. The bias is folded in at scale `2^(2p)`, so each output element is
/// truncated exactly once.
pub fn matmul_shared(p: &mut Party, x: &SharedTensor, w: &SharedTensor, bias: Option<&SharedTensor>) -> Result<SharedTensor> {
    let (&[_, d], &[d2, h]) = (x.shape(), w.shape()) else {
        return Err(Error::ShapeMismatch { expected: x.shape().to_vec(), found: w.shape().to_vec() });
    };
    if d != d2 {
        return Err(Error::ShapeMismatch { expected: vec![d, h], found: w.shape().to_vec() });
    }
    if let Some(b) = bias {
        if b.numel() != h {
            return Err(Error::ShapeMismatch { expected: vec![h], found: b.shape().to_vec() });
        }
    }
    p.scope("matmul", |p| beaver(p, x, w, bias, TripleKind::MatMul))
}

fn product(kind: TripleKind, a: &[RingElement], b: &[RingElement], sa: &[usize], sb: &[usize]) -> Vec<RingElement> {
    match kind {
        TripleKind::Elementwise => a.iter().zip(b).map(|(&u, &v)| u * v).collect(),
        TripleKind::MatMul => ring_matmul(a, b, sa[0], sa[1], sb[1]),
    }
}

fn add_into(acc: &mut [RingElement], t: &[RingElement]) {
    acc.par_iter_mut().zip(t).for_each(|(a, &b)| *a += b);
}

fn beaver(p: &mut Party, x: &SharedTensor, y: &SharedTensor, bias: Option<&SharedTensor>, kind: TripleKind) -> Result<SharedTensor> {
    let shapes = triple_shapes(x.shape(), y.shape(), kind)?;
    let triple_id = p.fresh_id();
    let out_id = p.fresh_id();
    let bias = match bias {
        Some(b) => Some(p.settle(&[b])?.pop().unwrap()),
        None => None,
    };

    let triple = match p.role() {
        PartyId::P2 => {
            let (prg, rng) = p.dealer_parts()?;
            let dealt = dealer_gen_triple(x.shape(), y.shape(), kind, prg, rng)?;
            let mut payload = Vec::new();
            for k in 0..3 {
                encode_tensor(&dealt.shapes[k], &dealt.p0[k], &mut payload);
            }
            p.send_offline(PartyId::P0, MsgType::TripleShare, triple_id, payload)?;
            return clip_truncate(p, out_id, shapes[2].clone(), Vec::new());
        }
        PartyId::P1 => p1_triple_shares(&shapes, p.prg12()?),
        PartyId::P0 => {
            let msg = p.recv(PartyId::P2, MsgType::TripleShare)?;
            let parts = decode_tensors(&msg.payload)?;
            if parts.len() != 3 || (0..3).any(|k| parts[k].0 != shapes[k]) {
                return Err(Error::Protocol("malformed triple".into()));
            }
            let mut it = parts.into_iter().map(|(_, d)| d);
            [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
        }
    };
    let [u, v, w] = triple;

    let masked = |x: &SharedTensor, y: &SharedTensor| -> (Vec<RingElement>, Vec<RingElement>) {
        let e = x.data().iter().zip(&u).map(|(&a, &b)| a - b).collect();
        let f = y.data().iter().zip(&v).map(|(&a, &b)| a - b).collect();
        (e, f)
    };
    let payload = |e: &[RingElement], f: &[RingElement]| {
        let mut out = Vec::new();
        encode_tensor(x.shape(), e, &mut out);
        encode_tensor(y.shape(), f, &mut out);
        out
    };
    let other = if p.role() == PartyId::P0 { PartyId::P1 } else { PartyId::P0 };
    let p1_waits = p.role() == PartyId::P1 && (p.clip_outstanding(x) || p.clip_outstanding(y));

    let recv_open = |p: &mut Party| -> Result<(Vec<RingElement>, Vec<RingElement>)> {
        let msg = p.recv(other, MsgType::OpenValue)?;
        let mut parts = decode_tensors(&msg.payload)?;
        if parts.len() != 2 || parts[0].0 != x.shape() || parts[1].0 != y.shape() {
            return Err(Error::Protocol("malformed opening".into()));
        }
        let f = parts.pop().unwrap().1;
        let e = parts.pop().unwrap().1;
        Ok((e, f))
    };

    let ((e_mine, f_mine), (e_other, f_other)) = if p1_waits {
        let theirs = recv_open(p)?;
        let xr = p.resolve_local(x)?;
        let yr = p.resolve_local(y)?;
        let mine = masked(&xr, &yr);
        p.send(other, MsgType::OpenValue, out_id, payload(&mine.0, &mine.1))?;
        (mine, theirs)
    } else {
        let xr = p.resolve_local(x)?;
        let yr = p.resolve_local(y)?;
        let mine = masked(&xr, &yr);
        p.send(other, MsgType::OpenValue, out_id, payload(&mine.0, &mine.1))?;
        let theirs = recv_open(p)?;
        (mine, theirs)
    };
    let e: Vec<RingElement> = e_mine.iter().zip(&e_other).map(|(&a, &b)| a + b).collect();
    let f: Vec<RingElement> = f_mine.iter().zip(&f_other).map(|(&a, &b)| a + b).collect();

    let (sx, sy) = (x.shape(), y.shape());
    let mut z = w;
    add_into(&mut z, &product(kind, &e, &v, sx, sy));
    add_into(&mut z, &product(kind, &u, &f, sx, sy));
    if p.role() == PartyId::P0 {
        add_into(&mut z, &product(kind, &e, &f, sx, sy));
    }
    if let Some(b) = bias {
        let h = b.numel();
        let scale = RingElement(1u64 << p.fp().frac_bits());
        let bd = b.data();
        z.par_iter_mut().enumerate().for_each(|(i, a)| *a += bd[i % h] * scale);
    }
    clip_truncate(p, out_id, shapes[2].clone(), z)
}
