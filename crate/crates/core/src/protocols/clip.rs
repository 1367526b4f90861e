//! ShareClip and share truncation.
//!
//! `P0` inspects only its own share. Elements whose signed value is at least
//! `2^62` move `2^62` from `P0` to `P1`; elements below `-2^62` move it the
//! other way. Afterwards `P0`'s share lies in `[-2^62, 2^62)` and each party
//! can truncate its share locally with at most one unit of error.

use crate::error::Result;
use crate::ring::RingElement;
use crate::runtime::config::ClipMode;
use crate::runtime::party::Party;
use crate::runtime::wire::ClipBlock;
use crate::sharing::{PartyId, PendingClip, SharedTensor, TensorId};

/// Indices where `P0`'s share was moved down (`overflow`) or up
/// (`underflow`) by `2^62`.
pub type ClipAdjustment = ClipBlock;

/// `2^(L-2)` with `L = 64`.
pub const CLIP_BOUND: u64 = 1 << 62;

/// Overflow and underflow indices of `P0`'s share.
pub fn clip_adjustment(tensor_id: TensorId, share0: &[RingElement]) -> ClipBlock {
    let bound = CLIP_BOUND as i64;
    let mut block = ClipBlock { tensor_id, ..Default::default() };
    for (i, s) in share0.iter().enumerate() {
        let v = s.signed();
        if v >= bound {
            block.overflow.push(i as u64);
        } else if v < -bound {
            block.underflow.push(i as u64);
        }
    }
    block
}

pub fn apply_clip_p0(share: &mut [RingElement], block: &ClipBlock) {
    for &i in &block.overflow {
        share[i as usize] -= RingElement(CLIP_BOUND);
    }
    for &i in &block.underflow {
        share[i as usize] += RingElement(CLIP_BOUND);
    }
}

pub fn apply_clip_p1(share: &mut [RingElement], block: &ClipBlock) {
    for &i in &block.overflow {
        share[i as usize] += RingElement(CLIP_BOUND);
    }
    for &i in &block.underflow {
        share[i as usize] -= RingElement(CLIP_BOUND);
    }
}

/// Per-share rounding division by `2^frac_bits` on the signed view.
pub fn truncate_share(share: &[RingElement], frac_bits: u32) -> Vec<RingElement> {
    share.iter().map(|s| s.shift_round(frac_bits)).collect()
}

/// `P1`'s resolution of a pending share once its indices are known.
pub fn resolve_p1(share: &[RingElement], block: &ClipBlock, frac_bits: u32) -> Vec<RingElement> {
    let mut s = share.to_vec();
    apply_clip_p1(&mut s, block);
    truncate_share(&s, frac_bits)
}

/// ShareClip on both shares at once, for analysis and testing.
pub fn share_clip_pair(s0: &[RingElement], s1: &[RingElement]) -> (Vec<RingElement>, Vec<RingElement>, ClipBlock) {
    let block = clip_adjustment(0, s0);
    let mut a = s0.to_vec();
    let mut b = s1.to_vec();
    apply_clip_p0(&mut a, &block);
    apply_clip_p1(&mut b, &block);
    (a, b, block)
}

/// Clip followed by per-share truncation, returning the two new shares.
pub fn truncate_shared_pair(s0: &[RingElement], s1: &[RingElement], frac_bits: u32) -> (Vec<RingElement>, Vec<RingElement>) {
    let (a, b, _) = share_clip_pair(s0, s1);
    (truncate_share(&a, frac_bits), truncate_share(&b, frac_bits))
}

/// Baseline without clipping: logical right shift of each raw share.
/// Kept to demonstrate the wrap-around failure that clipping prevents.
pub fn naive_shift_pair(s0: &[RingElement], s1: &[RingElement], frac_bits: u32) -> (Vec<RingElement>, Vec<RingElement>) {
    let f = |s: &[RingElement]| s.iter().map(|r| RingElement(r.0 >> frac_bits)).collect();
    (f(s0), f(s1))
}

/// Clips and truncates a freshly computed product share held at scale
/// `2^(2p)`. In piggyback mode `P1`'s result stays pending until `P0`'s
/// indices arrive with a later flight.
pub fn clip_truncate(p: &mut Party, id: TensorId, shape: Vec<usize>, mut data: Vec<RingElement>) -> Result<SharedTensor> {
    let frac_bits = p.fp().frac_bits();
    let pending = (p.clip_mode() == ClipMode::Piggyback).then_some(PendingClip { frac_bits });
    let t = match p.role() {
        PartyId::P0 => {
            let block = clip_adjustment(id, &data);
            apply_clip_p0(&mut data, &block);
            p.emit_clip(block)?;
            SharedTensor::new(PartyId::P0, id, shape, truncate_share(&data, frac_bits))?.with_pending(pending)
        }
        PartyId::P1 => match pending {
            Some(_) => SharedTensor::new(PartyId::P1, id, shape, data)?.with_pending(pending),
            None => {
                let block = p.await_clip(id)?;
                SharedTensor::new(PartyId::P1, id, shape, resolve_p1(&data, &block, frac_bits))?
            }
        },
        PartyId::P2 => SharedTensor::placeholder(id, shape).with_pending(pending),
    };
    p.observe(&t);
    Ok(t)
}
