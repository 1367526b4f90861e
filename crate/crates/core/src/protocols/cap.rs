//! Compute-after-permutation.
//!
//! `P0` and `P1` draw a common flip mask (when flipping) and then a common
//! permutation from their shared PRG, permute their shares and send them to
//! `P2`. `P2` sees only the permuted, possibly sign-flipped plaintext,
//! evaluates the function, and reshares: `P1`'s share is the next block of
//! the `(P1,P2)` PRG, so only `P0` receives a message.

use crate::error::{Error, Result};
use crate::protocols::ElementwiseFn;
use crate::ring::RingElement;
use crate::runtime::party::Party;
use crate::runtime::wire::MsgType;
use crate::sharing::{gen_mask, gen_permutation, PartyId, SharedTensor};

pub fn cap(p: &mut Party, z: &SharedTensor, f: ElementwiseFn, flipping: bool) -> Result<SharedTensor> {
    if flipping && !f.flip_compatible() {
        return Err(Error::FlipIncompatible(f));
    }
    p.scope("cap", |p| {
        let z = p.settle(&[z])?.pop().unwrap();
        let n = z.numel();
        let shape = z.shape().to_vec();
        let perm_id = p.fresh_id();
        let out_id = p.fresh_id();
        let fp = p.fp();

        if p.role() == PartyId::P2 {
            let a = p.recv_tensor(PartyId::P0, MsgType::PermutedShares, perm_id, &[n])?;
            let b = p.recv_tensor(PartyId::P1, MsgType::PermutedShares, perm_id, &[n])?;
            let y: Vec<RingElement> = a
                .into_iter()
                .zip(b)
                .map(|(u, v)| fp.encode(f.apply(fp.decode(u + v))))
                .collect::<Result<_>>()?;
            let r = p.prg12()?.next_ring(n);
            let d: Vec<RingElement> = y.into_iter().zip(r).map(|(y, r)| y - r).collect();
            p.send_tensor(PartyId::P0, MsgType::ReshareResult, out_id, &[n], &d)?;
            return Ok(SharedTensor::placeholder(out_id, shape));
        }

        let mask = if flipping { gen_mask(p.prg01()?, n) } else { vec![false; n] };
        let perm = gen_permutation(p.prg01()?, n);
        let flipped: Vec<RingElement> = z.data().iter().zip(&mask).map(|(&s, &m)| if m { -s } else { s }).collect();
        p.send_tensor(PartyId::P2, MsgType::PermutedShares, perm_id, &[n], &perm.apply(&flipped))?;

        let y_perm = match p.role() {
            PartyId::P0 => p.recv_tensor(PartyId::P2, MsgType::ReshareResult, out_id, &[n])?,
            _ => p.prg12()?.next_ring(n),
        };
        let mut y = perm.apply_inverse(&y_perm);
        let one = fp.encode(1.0)?;
        for (yi, &m) in y.iter_mut().zip(&mask) {
            if m {
                *yi = match (f, p.role()) {
                    (ElementwiseFn::Sigmoid, PartyId::P0) => one - *yi,
                    _ => -*yi,
                };
            }
        }
        let t = SharedTensor::new(p.role(), out_id, shape, y)?;
        p.observe(&t);
        Ok(t)
    })
}
