//! Binary message format.
//!
//! ```text
//! magic "SSRP" | version u8 = 1 | msg_type u8 | session_id u32 LE
//! | tensor_id u64 LE | payload_len u64 LE | payload
//! ```
//!
//! Tensor payloads are `ndim u8 | dims u64 LE * ndim | elements u64 LE`,
//! row-major; a payload may hold several tensors back to back. When bit 7 of
//! `msg_type` is set the payload starts with a clip list (see [`ClipBlock`]).

use crate::error::{Error, Result};
use crate::ring::RingElement;
use crate::sharing::TensorId;

pub const MAGIC: [u8; 4] = *b"SSRP";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 26;

/// Set on `msg_type` when a clip list precedes the regular payload.
pub const CLIP_PREFIX_FLAG: u8 = 0x80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    TensorShares = 1,
    ClipIndices = 2,
    TripleShare = 3,
    PermutedShares = 4,
    ReshareResult = 5,
    OpenValue = 6,
    Control = 7,
}

impl MsgType {
    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            1 => MsgType::TensorShares,
            2 => MsgType::ClipIndices,
            3 => MsgType::TripleShare,
            4 => MsgType::PermutedShares,
            5 => MsgType::ReshareResult,
            6 => MsgType::OpenValue,
            7 => MsgType::Control,
            other => return Err(Error::Decode(format!("unknown message type {other}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub msg_type: MsgType,
    pub session_id: u32,
    pub tensor_id: TensorId,
    /// Clip list carried ahead of the payload, if any.
    pub clips: Vec<ClipBlock>,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn new(msg_type: MsgType, session_id: u32, tensor_id: TensorId, payload: Vec<u8>) -> Self {
        Self {
            msg_type,
            session_id,
            tensor_id,
            clips: Vec::new(),
            payload,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut body = Vec::new();
        let mut code = self.msg_type as u8;
        if !self.clips.is_empty() {
            code |= CLIP_PREFIX_FLAG;
            encode_clip_list(&self.clips, &mut body);
        }
        body.extend_from_slice(&self.payload);
        let mut out = Vec::with_capacity(HEADER_LEN + body.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(code);
        out.extend_from_slice(&self.session_id.to_le_bytes());
        out.extend_from_slice(&self.tensor_id.to_le_bytes());
        out.extend_from_slice(&(body.len() as u64).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }

    /// Parses the fixed header, returning `(code, session, tensor, payload_len)`.
    pub fn decode_header(h: &[u8]) -> Result<(u8, u32, TensorId, u64)> {
        if h.len() < HEADER_LEN {
            return Err(Error::Decode("short header".into()));
        }
        if h[0..4] != MAGIC {
            return Err(Error::Decode("bad magic".into()));
        }
        if h[4] != VERSION {
            return Err(Error::Decode(format!("unsupported version {}", h[4])));
        }
        let session = u32::from_le_bytes(h[6..10].try_into().unwrap());
        let tensor = u64::from_le_bytes(h[10..18].try_into().unwrap());
        let len = u64::from_le_bytes(h[18..26].try_into().unwrap());
        Ok((h[5], session, tensor, len))
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (code, session_id, tensor_id, len) = Self::decode_header(bytes)?;
        let body = &bytes[HEADER_LEN..];
        if body.len() as u64 != len {
            return Err(Error::Decode(format!("payload length {} != declared {len}", body.len())));
        }
        let msg_type = MsgType::from_code(code & !CLIP_PREFIX_FLAG)?;
        let mut cur = Cursor::new(body);
        let clips = if code & CLIP_PREFIX_FLAG != 0 {
            decode_clip_list(&mut cur)?
        } else {
            Vec::new()
        };
        Ok(Self {
            msg_type,
            session_id,
            tensor_id,
            clips,
            payload: cur.rest().to_vec(),
        })
    }

    /// Bits that count toward protocol traffic: 64 per tensor element and per
    /// clip index. Headers and shape metadata are excluded.
    pub fn payload_bits(&self) -> u64 {
        let idx: usize = self.clips.iter().map(ClipBlock::index_count).sum();
        let elems = if self.msg_type == MsgType::ClipIndices {
            decode_clip_list(&mut Cursor::new(&self.payload))
                .map(|l| l.iter().map(ClipBlock::index_count).sum())
                .unwrap_or(0)
        } else if self.msg_type == MsgType::Control {
            0
        } else {
            tensor_element_count(&self.payload).unwrap_or(0)
        };
        64 * (idx + elems) as u64
    }
}

/// Indices where `P0`'s share was shifted down (`overflow`) or up
/// (`underflow`) by `2^62`, for one tensor.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClipBlock {
    pub tensor_id: TensorId,
    pub overflow: Vec<u64>,
    pub underflow: Vec<u64>,
}

impl ClipBlock {
    pub fn index_count(&self) -> usize {
        self.overflow.len() + self.underflow.len()
    }
}

/// `n_blocks u64 | (tensor_id u64 | n_over u64 | n_under u64 | indices u64*)*`
pub fn encode_clip_list(blocks: &[ClipBlock], out: &mut Vec<u8>) {
    out.extend_from_slice(&(blocks.len() as u64).to_le_bytes());
    for b in blocks {
        out.extend_from_slice(&b.tensor_id.to_le_bytes());
        out.extend_from_slice(&(b.overflow.len() as u64).to_le_bytes());
        out.extend_from_slice(&(b.underflow.len() as u64).to_le_bytes());
        for i in b.overflow.iter().chain(&b.underflow) {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
}

pub fn decode_clip_list(cur: &mut Cursor<'_>) -> Result<Vec<ClipBlock>> {
    let n = cur.u64()? as usize;
    let mut blocks = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let tensor_id = cur.u64()?;
        let n_over = cur.u64()? as usize;
        let n_under = cur.u64()? as usize;
        let overflow = (0..n_over).map(|_| cur.u64()).collect::<Result<_>>()?;
        let underflow = (0..n_under).map(|_| cur.u64()).collect::<Result<_>>()?;
        blocks.push(ClipBlock {
            tensor_id,
            overflow,
            underflow,
        });
    }
    Ok(blocks)
}

pub fn encode_tensor(shape: &[usize], data: &[RingElement], out: &mut Vec<u8>) {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    out.push(shape.len() as u8);
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.reserve(data.len() * 8);
    for r in data {
        out.extend_from_slice(&r.0.to_le_bytes());
    }
}

pub fn tensor_payload(shape: &[usize], data: &[RingElement]) -> Vec<u8> {
    let mut out = Vec::new();
    encode_tensor(shape, data, &mut out);
    out
}

/// Decodes every tensor in a payload.
pub fn decode_tensors(payload: &[u8]) -> Result<Vec<(Vec<usize>, Vec<RingElement>)>> {
    let mut cur = Cursor::new(payload);
    let mut out = Vec::new();
    while !cur.is_empty() {
        out.push(decode_tensor(&mut cur)?);
    }
    Ok(out)
}

pub fn decode_tensor(cur: &mut Cursor<'_>) -> Result<(Vec<usize>, Vec<RingElement>)> {
    let ndim = cur.u8()? as usize;
    let shape: Vec<usize> = (0..ndim).map(|_| cur.u64().map(|d| d as usize)).collect::<Result<_>>()?;
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Decode("tensor size overflow".into()))?;
    if cur.remaining() < n.saturating_mul(8) {
        return Err(Error::Decode(format!("tensor needs {n} elements, {} bytes left", cur.remaining())));
    }
    let data = (0..n).map(|_| cur.u64().map(RingElement)).collect::<Result<_>>()?;
    Ok((shape, data))
}

fn tensor_element_count(payload: &[u8]) -> Result<usize> {
    let mut cur = Cursor::new(payload);
    let mut total = 0usize;
    while !cur.is_empty() {
        let ndim = cur.u8()? as usize;
        let mut n = 1usize;
        for _ in 0..ndim {
            n = n.saturating_mul(cur.u64()? as usize);
        }
        if cur.remaining() < n.saturating_mul(8) {
            return Err(Error::Decode("truncated tensor".into()));
        }
        cur.pos += n * 8;
        total += n;
    }
    Ok(total)
}

pub struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    pub fn rest(&self) -> &'a [u8] {
        &self.buf[self.pos..]
    }

    pub fn u8(&mut self) -> Result<u8> {
        let b = *self.buf.get(self.pos).ok_or_else(|| Error::Decode("unexpected end of payload".into()))?;
        self.pos += 1;
        Ok(b)
    }

    pub fn u64(&mut self) -> Result<u64> {
        let end = self.pos + 8;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::Decode("unexpected end of payload".into()))?;
        self.pos = end;
        Ok(u64::from_le_bytes(bytes.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_bit_exact() {
        let msg = Message::new(MsgType::TensorShares, 0x0403_0201, 0x0807_0605_0403_0201, vec![0xAA]);
        let b = msg.encode();
        assert_eq!(&b[0..4], b"SSRP");
        assert_eq!(b[4], 1);
        assert_eq!(b[5], 1);
        assert_eq!(&b[6..10], &[1, 2, 3, 4]);
        assert_eq!(&b[10..18], &[1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(&b[18..26], &1u64.to_le_bytes());
        assert_eq!(b[26], 0xAA);
        assert_eq!(b.len(), HEADER_LEN + 1);
    }

    #[test]
    fn tensor_payload_layout() {
        let p = tensor_payload(&[3], &[RingElement(1), RingElement(2), RingElement(u64::MAX)]);
        assert_eq!(p[0], 1);
        assert_eq!(&p[1..9], &3u64.to_le_bytes());
        assert_eq!(&p[9..17], &1u64.to_le_bytes());
        assert_eq!(&p[25..33], &u64::MAX.to_le_bytes());
        let msg = Message::new(MsgType::TensorShares, 1, 9, p);
        assert_eq!(msg.payload_bits(), 192);
        assert_eq!(msg.encode().len(), HEADER_LEN + 1 + 8 + 24);
    }

    #[test]
    fn clip_prefix_counts_indices_only() {
        let mut msg = Message::new(MsgType::OpenValue, 1, 2, tensor_payload(&[2], &[RingElement(5), RingElement(6)]));
        msg.clips.push(ClipBlock {
            tensor_id: 7,
            overflow: vec![0, 3],
            underflow: vec![1],
        });
        let bytes = msg.encode();
        assert_eq!(bytes[5], MsgType::OpenValue as u8 | CLIP_PREFIX_FLAG);
        let back = Message::decode(&bytes).unwrap();
        assert_eq!(back, msg);
        assert_eq!(back.payload_bits(), 64 * 5);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Message::decode(b"nope").is_err());
        let mut b = Message::new(MsgType::Control, 1, 1, vec![]).encode();
        b[0] = b'X';
        assert!(Message::decode(&b).is_err());
        let mut b = Message::new(MsgType::Control, 1, 1, vec![]).encode();
        b[5] = 42;
        assert!(Message::decode(&b).is_err());
        let mut b = Message::new(MsgType::Control, 1, 1, vec![1, 2]).encode();
        b.pop();
        assert!(Message::decode(&b).is_err());
        assert!(decode_tensors(&[1, 5, 0, 0, 0, 0, 0, 0, 0, 1]).is_err());
    }

    proptest! {
        #[test]
        fn message_round_trip(
            code in 1u8..=7,
            session in any::<u32>(),
            tid in any::<u64>(),
            elems in proptest::collection::vec(any::<u64>(), 0..20),
            over in proptest::collection::vec(any::<u64>(), 0..4),
        ) {
            let data: Vec<RingElement> = elems.into_iter().map(RingElement).collect();
            let mut msg = Message::new(MsgType::from_code(code).unwrap(), session, tid, tensor_payload(&[data.len()], &data));
            if !over.is_empty() {
                msg.clips.push(ClipBlock { tensor_id: tid, overflow: over, underflow: vec![] });
            }
            let back = Message::decode(&msg.encode()).unwrap();
            prop_assert_eq!(&back, &msg);
            let tensors = decode_tensors(&back.payload).unwrap();
            prop_assert_eq!(&tensors[0].1, &data);
        }
    }
}
