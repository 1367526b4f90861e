//! Fixed-point encoding and wrapping arithmetic on `Z_{2^64}`.
//!
//! Reals are scaled by `2^p` and rounded half away from zero; negative values
//! live in the upper half of the ring (two's complement). Every arithmetic
//! operation wraps modulo `2^64`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ring bit width. Fixed.
pub const RING_BITS: u32 = 64;

/// Default number of fractional bits.
pub const DEFAULT_FRAC_BITS: u32 = 23;

/// Largest accepted number of fractional bits.
pub const MAX_FRAC_BITS: u32 = 40;

/// Fixed-point parameters: `L = 64` ring bits and `p` fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    frac_bits: u32,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            frac_bits: DEFAULT_FRAC_BITS,
        }
    }
}

impl FixedPointConfig {
    pub fn new(frac_bits: u32) -> Result<Self> {
        if !(1..=MAX_FRAC_BITS).contains(&frac_bits) {
            return Err(Error::Config(format!(
                "fractional bits must be in 1..={MAX_FRAC_BITS}, got {frac_bits}"
            )));
        }
        Ok(Self { frac_bits })
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// `2^p` as a real.
    pub fn scale(&self) -> f64 {
        (1u64 << self.frac_bits) as f64
    }

    /// One unit in the last place, `2^-p`.
    pub fn ulp(&self) -> f64 {
        1.0 / self.scale()
    }

    /// Magnitude bound `2^(L-2-p)` on encodable reals.
    pub fn value_bound(&self) -> f64 {
        (1u64 << (RING_BITS - 2 - self.frac_bits)) as f64
    }

    /// Encodes a real as `round(x * 2^p)`, embedded in two's complement.
    pub fn encode(&self, x: f64) -> Result<RingElement> {
        if !x.is_finite() || x.abs() >= self.value_bound() {
            return Err(Error::OutOfRange(x));
        }
        // f64::round rounds half away from zero.
        let scaled = (x * self.scale()).round() as i64;
        Ok(RingElement::from_signed(scaled))
    }

    pub fn encode_slice(&self, xs: &[f64]) -> Result<Vec<RingElement>> {
        xs.iter().map(|&x| self.encode(x)).collect()
    }

    pub fn decode(&self, r: RingElement) -> f64 {
        r.signed() as f64 / self.scale()
    }

    pub fn decode_slice(&self, rs: &[RingElement]) -> Vec<f64> {
        rs.iter().map(|&r| self.decode(r)).collect()
    }

    /// Rescales a `2^2p` product back to `2^p`: `round(signed(r) / 2^p)`.
    pub fn truncate(&self, r: RingElement) -> RingElement {
        r.shift_round(self.frac_bits)
    }
}

/// An element of `Z_{2^64}`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(transparent)]
pub struct RingElement(pub u64);

impl fmt::Debug for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R({})", self.0)
    }
}

impl RingElement {
    pub const ZERO: RingElement = RingElement(0);
    pub const ONE: RingElement = RingElement(1);

    pub fn from_signed(v: i64) -> Self {
        RingElement(v as u64)
    }

    /// Two's-complement view: `raw` if `raw < 2^63`, else `raw - 2^64`.
    pub fn signed(self) -> i64 {
        self.0 as i64
    }

    /// Signed division by `2^bits`, rounding half away from zero.
    pub fn shift_round(self, bits: u32) -> Self {
        if bits == 0 {
            return self;
        }
        let v = self.signed() as i128;
        let half = 1i128 << (bits - 1);
        let q = if v >= 0 {
            (v + half) >> bits
        } else {
            -((-v + half) >> bits)
        };
        RingElement(q as i64 as u64)
    }
}

impl Add for RingElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        RingElement(self.0.wrapping_add(rhs.0))
    }
}

impl Sub for RingElement {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        RingElement(self.0.wrapping_sub(rhs.0))
    }
}

impl Mul for RingElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        RingElement(self.0.wrapping_mul(rhs.0))
    }
}

impl Neg for RingElement {
    type Output = Self;
    fn neg(self) -> Self {
        RingElement(self.0.wrapping_neg())
    }
}

impl AddAssign for RingElement {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for RingElement {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

pub fn ring_add(a: RingElement, b: RingElement) -> RingElement {
    a + b
}

pub fn ring_sub(a: RingElement, b: RingElement) -> RingElement {
    a - b
}

pub fn ring_mul(a: RingElement, b: RingElement) -> RingElement {
    a * b
}

/// Ring matrix product of row-major `a` (m x k) and `b` (k x n).
pub fn ring_matmul(a: &[RingElement], b: &[RingElement], m: usize, k: usize, n: usize) -> Vec<RingElement> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0u64; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for t in 0..k {
            let av = a[i * k + t].0;
            if av == 0 {
                continue;
            }
            let brow = &b[t * n..(t + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o = o.wrapping_add(av.wrapping_mul(bv.0));
            }
        }
    }
    out.into_iter().map(RingElement).collect()
}

/// Row-major plaintext tensor of ring elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainFixedTensor {
    shape: Vec<usize>,
    data: Vec<RingElement>,
}

impl PlainFixedTensor {
    pub fn new(shape: Vec<usize>, data: Vec<RingElement>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(Error::ShapeMismatch {
                expected: shape,
                found: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![RingElement::ZERO; n],
        }
    }

    pub fn from_reals(shape: Vec<usize>, xs: &[f64], fp: &FixedPointConfig) -> Result<Self> {
        Self::new(shape, fp.encode_slice(xs)?)
    }

    pub fn to_reals(&self, fp: &FixedPointConfig) -> Vec<f64> {
        fp.decode_slice(&self.data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[RingElement] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn into_parts(self) -> (Vec<usize>, Vec<RingElement>) {
        (self.shape, self.data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p23() -> FixedPointConfig {
        FixedPointConfig::default()
    }

    #[test]
    fn encode_known_values() {
        let fp = p23();
        assert_eq!(fp.encode(1.0).unwrap().0, 8_388_608);
        assert_eq!(fp.encode(0.0).unwrap().0, 0);
        assert_eq!(fp.encode(-1.0).unwrap().0, 18_446_744_073_701_163_008);
    }

    #[test]
    fn decode_known_values() {
        let fp = p23();
        assert_eq!(fp.decode(RingElement(8_388_608)), 1.0);
        assert_eq!(fp.decode(RingElement(0u64.wrapping_sub(1 << 23))), -1.0);
        let x = 0.337;
        assert!((fp.decode(fp.encode(x).unwrap()) - x).abs() <= 2f64.powi(-24));
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let fp = p23();
        assert!(matches!(fp.encode(2f64.powi(39)), Err(Error::OutOfRange(_))));
        assert!(fp.encode(f64::NAN).is_err());
        assert!(fp.encode(2f64.powi(39) - 1.0).is_ok());
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        let fp = FixedPointConfig::new(1).unwrap();
        assert_eq!(fp.encode(0.25).unwrap().signed(), 1);
        assert_eq!(fp.encode(-0.25).unwrap().signed(), -1);
        assert_eq!(RingElement::from_signed(3).shift_round(1).signed(), 2);
        assert_eq!(RingElement::from_signed(-3).shift_round(1).signed(), -2);
    }

    #[test]
    fn config_bounds() {
        assert!(FixedPointConfig::new(0).is_err());
        assert!(FixedPointConfig::new(41).is_err());
        assert_eq!(p23().value_bound(), 2f64.powi(39));
    }

    #[test]
    fn wrapping_arithmetic() {
        let half = RingElement(1 << 63);
        assert_eq!(ring_add(half, half), RingElement::ZERO);
        assert_eq!(ring_sub(RingElement(0), RingElement(1)).0, u64::MAX);
        let fp = p23();
        let prod = ring_mul(RingElement(3 << 23), RingElement(2 << 23));
        assert_eq!(fp.truncate(prod), fp.encode(6.0).unwrap());
    }

    #[test]
    fn truncate_plain_examples() {
        let fp20 = FixedPointConfig::new(20).unwrap();
        assert_eq!(fp20.truncate(RingElement(1 << 21)).0, 2);
        assert_eq!(fp20.truncate(RingElement::ZERO).0, 0);
        // 1.5 at scale 2^0 rounds to 2
        let fp = p23();
        assert_eq!(fp.truncate(RingElement(3 << 22)).0, 2);
    }

    #[test]
    fn round_trip_bulk() {
        use rand::{Rng, SeedableRng};
        let fp = p23();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let tol = 2f64.powi(-24) + 1e-12;
        for _ in 0..100_000 {
            let x: f64 = rng.random_range(-65536.0..65536.0);
            let r = fp.encode(x).unwrap();
            assert!((fp.decode(r) - x).abs() <= tol);
            assert_eq!(r.signed(), (x * fp.scale()).round() as i64);
        }
    }

    proptest! {
        #[test]
        fn homomorphic_add(x in -1.0e5f64..1.0e5, y in -1.0e5f64..1.0e5) {
            let fp = p23();
            let lhs = fp.encode(x).unwrap() + fp.encode(y).unwrap();
            let rhs = fp.encode(x + y).unwrap();
            prop_assert!((lhs - rhs).signed().abs() <= 1);
        }

        #[test]
        fn homomorphic_mul(x in -200.0f64..200.0, y in -200.0f64..200.0) {
            let fp = p23();
            let prod = fp.truncate(fp.encode(x).unwrap() * fp.encode(y).unwrap());
            let want = fp.encode(x * y).unwrap();
            // Encoding errors of both factors scale with the other factor.
            let slack = 1 + ((x.abs() + y.abs()) / 2.0).ceil() as i64;
            prop_assert!((prod - want).signed().abs() <= slack);
            // Relative to the decoded operands the product is exact up to rounding.
            let (ex, ey) = (fp.encode(x).unwrap(), fp.encode(y).unwrap());
            let exact = fp.encode(fp.decode(ex) * fp.decode(ey)).unwrap();
            prop_assert!((prod - exact).signed().abs() <= 1);
        }
    }
}
