//! Additive shares, pairwise common PRGs and the triple dealer.
//!
//! A value `x` is split as `<x>_0 + <x>_1 = x` over `Z_{2^64}` between `P0`
//! and `P1`. `P2` never holds shares of data; it deals multiplication triples
//! and evaluates element-wise functions on permuted values.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::{ring_matmul, PlainFixedTensor, RingElement};

/// One of the three computing parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartyId {
    P0,
    P1,
    P2,
}

impl PartyId {
    pub const ALL: [PartyId; 3] = [PartyId::P0, PartyId::P1, PartyId::P2];

    pub fn index(self) -> usize {
        match self {
            PartyId::P0 => 0,
            PartyId::P1 => 1,
            PartyId::P2 => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// True for the two parties that hold data shares.
    pub fn is_share_holder(self) -> bool {
        self != PartyId::P2
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.index())
    }
}

impl FromStr for PartyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p0" => Ok(PartyId::P0),
            "p1" => Ok(PartyId::P1),
            "p2" => Ok(PartyId::P2),
            other => Err(Error::Config(format!("unknown role {other:?}"))),
        }
    }
}

/// Session-unique tensor identifier. All parties allocate ids in the same
/// order, so a given id names the same logical tensor everywhere.
pub type TensorId = u64;

/// Marks a product share whose truncation waits on `P0`'s clip indices.
///
/// On `P0` the share is already clipped and truncated; the marker only says the
/// indices still have to reach `P1`. On `P1` the data is the untruncated share.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingClip {
    pub frac_bits: u32,
}

/// One party's additive share of a tensor.
///
/// `P2` carries shape-only placeholders (empty `data`) so all three engines
/// can run the same program text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedTensor {
    shape: Vec<usize>,
    data: Vec<RingElement>,
    owner: PartyId,
    id: TensorId,
    pending_clip: Option<PendingClip>,
}

impl SharedTensor {
    pub fn new(owner: PartyId, id: TensorId, shape: Vec<usize>, data: Vec<RingElement>) -> Result<Self> {
        let n: usize = shape.iter().product();
        let ok = if owner.is_share_holder() {
            data.len() == n
        } else {
            data.is_empty()
        };
        if !ok {
            return Err(Error::ShapeMismatch {
                expected: shape,
                found: vec![data.len()],
            });
        }
        Ok(Self {
            shape,
            data,
            owner,
            id,
            pending_clip: None,
        })
    }

    /// Shape-only view held by `P2`.
    pub fn placeholder(id: TensorId, shape: Vec<usize>) -> Self {
        Self {
            shape,
            data: Vec::new(),
            owner: PartyId::P2,
            id,
            pending_clip: None,
        }
    }

    pub(crate) fn with_pending(mut self, pending: Option<PendingClip>) -> Self {
        self.pending_clip = pending;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[RingElement] {
        &self.data
    }

    pub fn owner(&self) -> PartyId {
        self.owner
    }

    pub fn id(&self) -> TensorId {
        self.id
    }

    pub fn pending_clip(&self) -> Option<PendingClip> {
        self.pending_clip
    }

    pub fn is_pending(&self) -> bool {
        self.pending_clip.is_some()
    }

    /// Number of logical elements (independent of owner).
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn into_data(self) -> Vec<RingElement> {
        self.data
    }
}

/// Splits `x` as `<x>_0 = r`, `<x>_1 = x - r` with `r` uniform.
pub fn share_plain<R: RngCore>(x: &PlainFixedTensor, id: TensorId, rng: &mut R) -> (SharedTensor, SharedTensor) {
    let mask: Vec<RingElement> = (0..x.len()).map(|_| RingElement(rng.next_u64())).collect();
    share_plain_with_mask(x, id, &mask)
}

/// Deterministic variant of [`share_plain`] with the mask supplied.
pub fn share_plain_with_mask(x: &PlainFixedTensor, id: TensorId, mask: &[RingElement]) -> (SharedTensor, SharedTensor) {
    assert_eq!(mask.len(), x.len(), "mask length must match tensor length");
    let s1: Vec<RingElement> = x.data().iter().zip(mask).map(|(&v, &r)| v - r).collect();
    let shape = x.shape().to_vec();
    (
        SharedTensor::new(PartyId::P0, id, shape.clone(), mask.to_vec()).expect("shape checked"),
        SharedTensor::new(PartyId::P1, id, shape, s1).expect("shape checked"),
    )
}

/// Sums `P0`'s and `P1`'s shares element-wise.
pub fn reconstruct(a: &SharedTensor, b: &SharedTensor) -> Result<PlainFixedTensor> {
    if a.owner != PartyId::P0 {
        return Err(Error::WrongOwner {
            expected: PartyId::P0,
            found: a.owner,
        });
    }
    if b.owner != PartyId::P1 {
        return Err(Error::WrongOwner {
            expected: PartyId::P1,
            found: b.owner,
        });
    }
    if a.id != b.id {
        return Err(Error::IdMismatch(a.id, b.id));
    }
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch {
            expected: a.shape.clone(),
            found: b.shape.clone(),
        });
    }
    if b.is_pending() {
        return Err(Error::Protocol(format!("tensor {} has an unresolved clip", b.id)));
    }
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| x + y).collect();
    PlainFixedTensor::new(a.shape.clone(), data)
}

/// Keyed ChaCha20 stream shared by a pair of parties.
///
/// Both endpoints start from the same `(seed, counter)` and draw the same
/// number of words at the same protocol steps, so their streams agree.
#[derive(Clone)]
pub struct CommonPrg {
    seed: [u8; 32],
    counter: u64,
    rng: ChaCha20Rng,
}

impl fmt::Debug for CommonPrg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CommonPrg").field("counter", &self.counter).finish_non_exhaustive()
    }
}

impl CommonPrg {
    pub fn new(seed: [u8; 32]) -> Self {
        Self::at(seed, 0)
    }

    /// Stream positioned after `counter` 64-bit words.
    pub fn at(seed: [u8; 32], counter: u64) -> Self {
        let mut rng = ChaCha20Rng::from_seed(seed);
        rng.set_word_pos(counter as u128 * 2);
        Self { seed, counter, rng }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn seed(&self) -> &[u8; 32] {
        &self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.rng.next_u64()
    }

    pub fn next_u64s(&mut self, n: usize) -> Vec<u64> {
        (0..n).map(|_| self.next_u64()).collect()
    }

    pub fn next_ring(&mut self, n: usize) -> Vec<RingElement> {
        (0..n).map(|_| RingElement(self.next_u64())).collect()
    }

    /// Uniform integer in `0..bound` by rejection sampling.
    pub fn uniform_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        // Reject the low 2^64 mod bound values so the residues are equiprobable.
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let v = self.next_u64();
            if v >= threshold {
                return v % bound;
            }
        }
    }
}

/// Draws `n` words from a common PRG.
pub fn prg_next_u64s(prg: &mut CommonPrg, n: usize) -> Vec<u64> {
    prg.next_u64s(n)
}

/// A permutation `pi` of `0..n`. Applying it maps `z` to `z'` with
/// `z'[i] = z[pi[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn from_vec(v: Vec<usize>) -> Option<Self> {
        let mut seen = vec![false; v.len()];
        for &i in &v {
            if i >= v.len() || std::mem::replace(&mut seen[i], true) {
                return None;
            }
        }
        Some(Permutation(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Permutation(inv)
    }

    pub fn apply<T: Copy>(&self, z: &[T]) -> Vec<T> {
        assert_eq!(z.len(), self.0.len());
        self.0.iter().map(|&j| z[j]).collect()
    }

    /// Undoes [`Permutation::apply`].
    pub fn apply_inverse<T: Copy + Default>(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.0.len());
        let mut out = vec![T::default(); y.len()];
        for (i, &j) in self.0.iter().enumerate() {
            out[j] = y[i];
        }
        out
    }

    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation(other.0.iter().map(|&j| self.0[j]).collect())
    }
}

/// Durstenfeld shuffle driven by the common PRG.
pub fn gen_permutation(prg: &mut CommonPrg, n: usize) -> Permutation {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = prg.uniform_below(i as u64 + 1) as usize;
        p.swap(i, j);
    }
    Permutation(p)
}

/// `n` unbiased bits, 64 per PRG word, least significant bit first.
pub fn gen_mask(prg: &mut CommonPrg, n: usize) -> Vec<bool> {
    let words = prg.next_u64s(n.div_ceil(64));
    (0..n).map(|i| (words[i / 64] >> (i % 64)) & 1 == 1).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripleKind {
    Elementwise,
    MatMul,
}

/// Shapes of `(u, v, w)` for a triple serving `x op y`.
pub fn triple_shapes(shape_x: &[usize], shape_y: &[usize], kind: TripleKind) -> Result<[Vec<usize>; 3]> {
    match kind {
        TripleKind::Elementwise => {
            if shape_x != shape_y {
                return Err(Error::ShapeMismatch {
                    expected: shape_x.to_vec(),
                    found: shape_y.to_vec(),
                });
            }
            Ok([shape_x.to_vec(), shape_y.to_vec(), shape_x.to_vec()])
        }
        TripleKind::MatMul => {
            if shape_x.len() != 2 || shape_y.len() != 2 || shape_x[1] != shape_y[0] {
                return Err(Error::ShapeMismatch {
                    expected: shape_x.to_vec(),
                    found: shape_y.to_vec(),
                });
            }
            Ok([shape_x.to_vec(), shape_y.to_vec(), vec![shape_x[0], shape_y[1]]])
        }
    }
}

/// One party's shares of a Beaver triple.
#[derive(Debug, Clone)]
pub struct BeaverTriple {
    pub u: SharedTensor,
    pub v: SharedTensor,
    pub w: SharedTensor,
}

/// What the dealer produces: `P0`'s shares (to be sent) and the plain
/// triple. `P1`'s shares are never materialized by the dealer beyond the PRG
/// draws that `P1` repeats locally.
#[derive(Debug, Clone)]
pub struct DealtTriple {
    pub shapes: [Vec<usize>; 3],
    pub p0: [Vec<RingElement>; 3],
    pub plain: [Vec<RingElement>; 3],
}

/// Dealer side: `u`, `v` uniform from the dealer's private randomness,
/// `w = u*v`; `P1`'s shares come from the `(P1,P2)` PRG in the order
/// `u`, `v`, `w`, and `P0` receives the differences.
pub fn dealer_gen_triple<R: RngCore>(
    shape_x: &[usize],
    shape_y: &[usize],
    kind: TripleKind,
    prg12: &mut CommonPrg,
    rng: &mut R,
) -> Result<DealtTriple> {
    let shapes = triple_shapes(shape_x, shape_y, kind)?;
    let nu: usize = shapes[0].iter().product();
    let nv: usize = shapes[1].iter().product();
    let u: Vec<RingElement> = (0..nu).map(|_| RingElement(rng.next_u64())).collect();
    let v: Vec<RingElement> = (0..nv).map(|_| RingElement(rng.next_u64())).collect();
    let w = match kind {
        TripleKind::Elementwise => u.iter().zip(&v).map(|(&a, &b)| a * b).collect(),
        TripleKind::MatMul => ring_matmul(&u, &v, shapes[0][0], shapes[0][1], shapes[1][1]),
    };
    Ok(dealer_split(shapes, [u, v, w], prg12))
}

/// Splits a given plain triple; used by the dealer and by tests that force
/// `u` and `v`.
pub fn dealer_split(shapes: [Vec<usize>; 3], plain: [Vec<RingElement>; 3], prg12: &mut CommonPrg) -> DealtTriple {
    let p0 = std::array::from_fn(|k| {
        let s1 = prg12.next_ring(plain[k].len());
        plain[k].iter().zip(s1).map(|(&x, r)| x - r).collect()
    });
    DealtTriple { shapes, p0, plain }
}

/// `P1` side: regenerates its triple shares from the common PRG.
pub fn p1_triple_shares(shapes: &[Vec<usize>; 3], prg12: &mut CommonPrg) -> [Vec<RingElement>; 3] {
    std::array::from_fn(|k| prg12.next_ring(shapes[k].iter().product()))
}
