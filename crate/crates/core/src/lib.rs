//! Three-party secret-shared computation over `Z_{2^64}`: fixed-point ring
//! arithmetic, additive sharing with Beaver multiplication and ShareClip
//! truncation, compute-after-permutation for element-wise activations,
//! shared neural networks, and tools for measuring what the permuted
//! activations leak.

pub mod error;
pub mod nn;
pub mod privacy;
pub mod protocols;
pub mod ring;
pub mod runtime;
pub mod sharing;

pub use error::{Error, Result};
pub use protocols::ElementwiseFn;
pub use ring::{FixedPointConfig, PlainFixedTensor, RingElement};
pub use runtime::{run_local, ClipMode, Party, SessionConfig};
pub use sharing::{PartyId, SharedTensor, TensorId};
