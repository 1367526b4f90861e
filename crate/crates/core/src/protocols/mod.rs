//! Secure operations on shared tensors.
//!
//! Every function here is called by all three engines with the same
//! arguments (shapes, public values); `P2` passes placeholders.

pub mod cap;
pub mod clip;
pub mod linear;
pub mod mul;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::{PlainFixedTensor, RingElement};
use crate::runtime::party::Party;
use crate::runtime::wire::MsgType;
use crate::sharing::{PartyId, SharedTensor};

pub use cap::cap;
pub use clip::{clip_adjustment, share_clip_pair, truncate_shared_pair, ClipAdjustment};
pub use linear::{
    add_bias, add_public, add_shared, mul_public_int, mul_public_real, mul_public_reals, neg_shared, public_sub, reshape, select_rows, sub_shared,
    sum_axis, transpose_local,
};
pub use mul::{matmul_shared, mul_shared};

/// Element-wise functions evaluated by `P2` on permuted data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementwiseFn {
    Relu,
    Sigmoid,
    Tanh,
    /// Step function `x > 0`, the derivative of ReLU.
    ReluDeriv,
}

impl ElementwiseFn {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ElementwiseFn::Relu => x.max(0.0),
            ElementwiseFn::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            ElementwiseFn::Tanh => x.tanh(),
            ElementwiseFn::ReluDeriv => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether `f(-x)` is recoverable from `f(x)` by a public linear map.
    pub fn flip_compatible(self) -> bool {
        matches!(self, ElementwiseFn::Sigmoid | ElementwiseFn::Tanh)
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementwiseFn::Relu => "relu",
            ElementwiseFn::Sigmoid => "sigmoid",
            ElementwiseFn::Tanh => "tanh",
            ElementwiseFn::ReluDeriv => "relu-deriv",
        }
    }
}

impl fmt::Display for ElementwiseFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementwiseFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(ElementwiseFn::Relu),
            "sigmoid" => Ok(ElementwiseFn::Sigmoid),
            "tanh" => Ok(ElementwiseFn::Tanh),
            "relu-deriv" | "reluderiv" => Ok(ElementwiseFn::ReluDeriv),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

/// Secret-shares an input known to `owner`.
///
/// When a holder owns the data the other holder's share is drawn from the
/// `(P0,P1)` PRG and nothing is sent. Data owned by `P2` is masked with the
/// `(P1,P2)` PRG and only the difference goes to `P0`.
pub fn share_input(p: &mut Party, owner: PartyId, x: Option<&PlainFixedTensor>, shape: &[usize]) -> Result<SharedTensor> {
    let id = p.fresh_id();
    let n: usize = shape.iter().product();
    let me = p.role();
    let plain = || -> Result<&[RingElement]> {
        let x = x.ok_or_else(|| Error::Protocol(format!("{me} owns the input but has no data")))?;
        if x.shape() != shape {
            return Err(Error::ShapeMismatch { expected: shape.to_vec(), found: x.shape().to_vec() });
        }
        Ok(x.data())
    };
    p.scope("share_input", |p| {
        let data = match (owner, me) {
            (PartyId::P2, PartyId::P2) => {
                let r = p.prg12()?.next_ring(n);
                let d: Vec<RingElement> = plain()?.iter().zip(r).map(|(&v, r)| v - r).collect();
                p.send_tensor(PartyId::P0, MsgType::TensorShares, id, shape, &d)?;
                Vec::new()
            }
            (PartyId::P2, PartyId::P1) => p.prg12()?.next_ring(n),
            (PartyId::P2, PartyId::P0) => p.recv_tensor(PartyId::P2, MsgType::TensorShares, id, shape)?,
            (_, PartyId::P2) => Vec::new(),
            (o, m) if o == m => {
                let r = p.prg01()?.next_ring(n);
                plain()?.iter().zip(r).map(|(&v, r)| v - r).collect()
            }
            _ => p.prg01()?.next_ring(n),
        };
        let t = p.make_tensor(id, shape.to_vec(), data)?;
        p.observe(&t);
        Ok(t)
    })
}

/// [`share_input`] for real-valued data, encoded with the session's
/// fixed-point configuration.
pub fn share_reals(p: &mut Party, owner: PartyId, xs: Option<&[f64]>, shape: &[usize]) -> Result<SharedTensor> {
    let plain = match xs {
        Some(v) if p.role() == owner => Some(PlainFixedTensor::from_reals(shape.to_vec(), v, &p.fp())?),
        _ => None,
    };
    share_input(p, owner, plain.as_ref(), shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{run_local, SessionConfig};

    #[test]
    fn elementwise_fns() {
        assert_eq!(ElementwiseFn::Relu.apply(-1.5), 0.0);
        assert_eq!(ElementwiseFn::Sigmoid.apply(0.0), 0.5);
        assert_eq!(ElementwiseFn::ReluDeriv.apply(0.0), 0.0);
        assert_eq!(ElementwiseFn::ReluDeriv.apply(1e-9), 1.0);
        assert!(!ElementwiseFn::Relu.flip_compatible());
        assert!(ElementwiseFn::Tanh.flip_compatible());
        for f in [ElementwiseFn::Relu, ElementwiseFn::Sigmoid, ElementwiseFn::Tanh, ElementwiseFn::ReluDeriv] {
            assert_eq!(f.name().parse::<ElementwiseFn>().unwrap(), f);
        }
    }

    #[test]
    fn input_sharing_by_each_owner() {
        let cfg = SessionConfig::deterministic(11);
        let xs = [1.25, -3.5, 0.0, 7.0];
        for owner in PartyId::ALL {
            let out = run_local(&cfg, |p| {
                let x = share_reals(p, owner, Some(&xs), &[2, 2])?;
                p.reveal(&x)
            })
            .unwrap();
            for o in &out.outputs {
                assert_eq!(o, &xs.to_vec());
            }
            let share = out.accounting.ops.iter().find(|o| o.name == "share_input").unwrap();
            let bits = share.traffic.total().payload_bits;
            if owner == PartyId::P2 {
                assert_eq!(bits, 4 * 64);
                assert_eq!(share.traffic.combined(PartyId::P2, PartyId::P1).raw_bytes, 0);
            } else {
                assert_eq!(bits, 0);
            }
        }
    }

    #[test]
    fn missing_owner_data_is_an_error() {
        let cfg = SessionConfig::deterministic(12);
        let r = run_local(&cfg, |p| share_reals(p, PartyId::P0, None, &[2]).map(|_| ()));
        assert!(r.is_err());
    }
}
