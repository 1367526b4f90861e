use std::io;

use thiserror::Error;

use crate::protocols::ElementwiseFn;
use crate::sharing::PartyId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {0} is outside the encodable fixed-point range")]
    OutOfRange(f64),
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor id mismatch: {0} vs {1}")]
    IdMismatch(u64, u64),
    #[error("share owned by {found} where {expected} was expected")]
    WrongOwner { expected: PartyId, found: PartyId },
    #[error("axis {axis} out of range for {ndim}-d tensor")]
    BadAxis { axis: usize, ndim: usize },
    #[error("link to {0} closed")]
    LinkClosed(PartyId),
    #[error("malformed message: {0}")]
    Decode(String),
    #[error("unexpected message: {0}")]
    Protocol(String),
    #[error("random flipping is not defined for {0:?}")]
    FlipIncompatible(ElementwiseFn),
    #[error("sample count mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("enumeration of {0}! permutations is not supported (n <= 8)")]
    TooLargeForEnumeration(usize),
    #[error("data has zero distance variance")]
    DegenerateData,
    #[error("auxiliary sample set is empty or smaller than k")]
    EmptyAux,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
