//! The party engine: one per role, driving protocol code over a transport.
//!
//! All three engines run the same program. Data-dependent branches only ever
//! depend on values every engine agrees on (shapes, pending-clip markers and
//! the shared clip delivery state), so sends and receives always pair up.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::protocols::clip::resolve_p1;
use crate::ring::{FixedPointConfig, PlainFixedTensor};
use crate::runtime::accounting::{AccountSnapshot, Accounting};
use crate::runtime::config::{ClipMode, SessionConfig};
use crate::runtime::shadow::Shadow;
use crate::runtime::transport::{Frame, Transport};
use crate::runtime::wire::{decode_tensor, encode_clip_list, tensor_payload, ClipBlock, Cursor, Message, MsgType};
use crate::sharing::{CommonPrg, PartyId, SharedTensor, TensorId};

pub struct Party {
    role: PartyId,
    session_id: u32,
    fp: FixedPointConfig,
    clip_mode: ClipMode,
    transport: Box<dyn Transport>,
    prg01: Option<CommonPrg>,
    prg12: Option<CommonPrg>,
    rng: ChaCha20Rng,
    next_id: TensorId,
    acct: Accounting,
    clip_queue: Vec<ClipBlock>,
    clip_queued_ids: HashSet<TensorId>,
    clip_received: HashMap<TensorId, ClipBlock>,
    shadow: Option<Arc<Shadow>>,
}

impl std::fmt::Debug for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Party").field("role", &self.role).field("session_id", &self.session_id).finish_non_exhaustive()
    }
}

impl Party {
    pub fn new(role: PartyId, cfg: &SessionConfig, transport: Box<dyn Transport>) -> Result<Self> {
        let fp = cfg.fixed_point()?;
        let prg01 = matches!(role, PartyId::P0 | PartyId::P1).then(|| cfg.seed_p0p1()).transpose()?.map(CommonPrg::new);
        let prg12 = matches!(role, PartyId::P1 | PartyId::P2).then(|| cfg.seed_p1p2()).transpose()?.map(CommonPrg::new);
        let rng = match cfg.private_seed(role)? {
            Some(s) => ChaCha20Rng::from_seed(s),
            None => ChaCha20Rng::from_os_rng(),
        };
        Ok(Self {
            role,
            session_id: cfg.session_id,
            fp,
            clip_mode: cfg.clip_mode,
            transport,
            prg01,
            prg12,
            rng,
            next_id: 1,
            acct: Accounting::new(),
            clip_queue: Vec::new(),
            clip_queued_ids: HashSet::new(),
            clip_received: HashMap::new(),
            shadow: None,
        })
    }

    pub fn with_shadow(mut self, shadow: Arc<Shadow>) -> Self {
        self.shadow = Some(shadow);
        self
    }

    pub fn role(&self) -> PartyId {
        self.role
    }

    pub fn session_id(&self) -> u32 {
        self.session_id
    }

    pub fn fp(&self) -> FixedPointConfig {
        self.fp
    }

    pub fn clip_mode(&self) -> ClipMode {
        self.clip_mode
    }

    pub fn is_holder(&self) -> bool {
        self.role.is_share_holder()
    }

    /// Allocates the next tensor id. Every engine calls this at the same
    /// program points, so ids agree across parties.
    pub fn fresh_id(&mut self) -> TensorId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn prg01(&mut self) -> Result<&mut CommonPrg> {
        let role = self.role;
        self.prg01.as_mut().ok_or_else(|| Error::Protocol(format!("{role} holds no (P0,P1) PRG")))
    }

    pub fn prg12(&mut self) -> Result<&mut CommonPrg> {
        let role = self.role;
        self.prg12.as_mut().ok_or_else(|| Error::Protocol(format!("{role} holds no (P1,P2) PRG")))
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    /// The dealer's `(P1,P2)` PRG and private randomness, borrowed together.
    pub fn dealer_parts(&mut self) -> Result<(&mut CommonPrg, &mut ChaCha20Rng)> {
        let role = self.role;
        let prg = self.prg12.as_mut().ok_or_else(|| Error::Protocol(format!("{role} holds no (P1,P2) PRG")))?;
        Ok((prg, &mut self.rng))
    }

    /// Builds this party's view of a freshly computed tensor.
    pub fn make_tensor(&self, id: TensorId, shape: Vec<usize>, data: Vec<crate::ring::RingElement>) -> Result<SharedTensor> {
        if self.is_holder() {
            SharedTensor::new(self.role, id, shape, data)
        } else {
            Ok(SharedTensor::placeholder(id, shape))
        }
    }

    pub fn accounting(&self) -> AccountSnapshot {
        self.acct.snapshot()
    }

    /// Runs `f` as a named protocol scope for round and traffic accounting.
    pub fn scope<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        self.acct.open(name);
        let out = f(self);
        self.acct.close();
        out
    }

    fn send_inner(&mut self, to: PartyId, mut msg: Message, offline: bool) -> Result<()> {
        if self.role == PartyId::P0
            && to == PartyId::P1
            && self.clip_mode == ClipMode::Piggyback
            && msg.msg_type != MsgType::ClipIndices
            && !self.clip_queue.is_empty()
        {
            msg.clips = std::mem::take(&mut self.clip_queue);
            self.clip_queued_ids.clear();
        }
        let bytes = msg.encode();
        let depths = self.acct.on_send(self.role, to, msg.payload_bits(), bytes.len() as u64, offline);
        log::trace!("{} -> {to}: {:?} tensor {} ({} bytes)", self.role, msg.msg_type, msg.tensor_id, bytes.len());
        self.transport.send(to, Frame { bytes, depths })
    }

    /// Sends one online flight. Any queued clip indices ride along when the
    /// flight goes from `P0` to `P1`.
    pub fn send(&mut self, to: PartyId, msg_type: MsgType, tensor_id: TensorId, payload: Vec<u8>) -> Result<()> {
        let msg = Message::new(msg_type, self.session_id, tensor_id, payload);
        self.send_inner(to, msg, false)
    }

    /// Sends a flight tagged as offline (correlated randomness).
    pub fn send_offline(&mut self, to: PartyId, msg_type: MsgType, tensor_id: TensorId, payload: Vec<u8>) -> Result<()> {
        let msg = Message::new(msg_type, self.session_id, tensor_id, payload);
        self.send_inner(to, msg, true)
    }

    pub fn recv(&mut self, from: PartyId, expected: MsgType) -> Result<Message> {
        let frame = self.transport.recv(from)?;
        let msg = Message::decode(&frame.bytes)?;
        if msg.session_id != self.session_id {
            return Err(Error::Protocol(format!("session mismatch: got {} expected {}", msg.session_id, self.session_id)));
        }
        if msg.msg_type != expected {
            return Err(Error::Protocol(format!("{}: expected {expected:?} from {from}, got {:?}", self.role, msg.msg_type)));
        }
        self.acct.on_recv(&frame.depths);
        if self.role == PartyId::P1 && from == PartyId::P0 {
            for b in &msg.clips {
                self.clip_received.insert(b.tensor_id, b.clone());
            }
        }
        Ok(msg)
    }

    /// Sends one tensor in a message of the given type.
    pub fn send_tensor(&mut self, to: PartyId, msg_type: MsgType, tensor_id: TensorId, shape: &[usize], data: &[crate::ring::RingElement]) -> Result<()> {
        self.send(to, msg_type, tensor_id, tensor_payload(shape, data))
    }

    /// Receives one tensor, checking id and element count.
    pub fn recv_tensor(&mut self, from: PartyId, msg_type: MsgType, tensor_id: TensorId, shape: &[usize]) -> Result<Vec<crate::ring::RingElement>> {
        let msg = self.recv(from, msg_type)?;
        if msg.tensor_id != tensor_id {
            return Err(Error::IdMismatch(tensor_id, msg.tensor_id));
        }
        let mut cur = Cursor::new(&msg.payload);
        let (s, data) = decode_tensor(&mut cur)?;
        if s != shape {
            return Err(Error::ShapeMismatch { expected: shape.to_vec(), found: s });
        }
        Ok(data)
    }

    /// `P0` side of clip bookkeeping: queue (piggyback) or send now (eager).
    pub(crate) fn emit_clip(&mut self, block: ClipBlock) -> Result<()> {
        debug_assert_eq!(self.role, PartyId::P0);
        match self.clip_mode {
            ClipMode::Piggyback => {
                self.clip_queued_ids.insert(block.tensor_id);
                self.clip_queue.push(block);
                Ok(())
            }
            ClipMode::Eager => {
                let mut payload = Vec::new();
                encode_clip_list(std::slice::from_ref(&block), &mut payload);
                let msg = Message::new(MsgType::ClipIndices, self.session_id, block.tensor_id, payload);
                self.send_inner(PartyId::P1, msg, false)
            }
        }
    }

    /// `P1` side of an eager clip: receive the dedicated flight now.
    pub(crate) fn await_clip(&mut self, tensor_id: TensorId) -> Result<ClipBlock> {
        debug_assert_eq!(self.role, PartyId::P1);
        self.recv_clip_flight()?;
        self.clip_received
            .remove(&tensor_id)
            .ok_or_else(|| Error::Protocol(format!("no clip indices for tensor {tensor_id}")))
    }

    fn recv_clip_flight(&mut self) -> Result<()> {
        let msg = self.recv(PartyId::P0, MsgType::ClipIndices)?;
        let blocks = crate::runtime::wire::decode_clip_list(&mut Cursor::new(&msg.payload))?;
        for b in blocks {
            self.clip_received.insert(b.tensor_id, b);
        }
        Ok(())
    }

    /// Whether `x`'s clip indices have not yet been sent to (`P0`) or
    /// received by (`P1`) `P1`. Both holders always agree.
    pub fn clip_outstanding(&self, x: &SharedTensor) -> bool {
        if !x.is_pending() {
            return false;
        }
        match self.role {
            PartyId::P0 => self.clip_queued_ids.contains(&x.id()),
            PartyId::P1 => !self.clip_received.contains_key(&x.id()),
            PartyId::P2 => false,
        }
    }

    /// Resolves a pending tensor using indices already at hand.
    /// Only valid when `clip_outstanding(x)` is false.
    pub fn resolve_local(&mut self, x: &SharedTensor) -> Result<SharedTensor> {
        let Some(pc) = x.pending_clip() else {
            return Ok(x.clone());
        };
        match self.role {
            PartyId::P1 => {
                let block = self
                    .clip_received
                    .get(&x.id())
                    .ok_or_else(|| Error::Protocol(format!("clip indices for tensor {} not received", x.id())))?;
                let data = resolve_p1(x.data(), block, pc.frac_bits);
                let t = SharedTensor::new(PartyId::P1, x.id(), x.shape().to_vec(), data)?;
                self.observe(&t);
                Ok(t)
            }
            _ => Ok(x.clone().with_pending(None)),
        }
    }

    /// Makes every tensor in `xs` usable by `P1`, flushing outstanding clip
    /// indices in one dedicated `P0 -> P1` flight if any are still queued.
    ///
    /// A `settle` scope is recorded whenever any input is pending, which every
    /// engine can tell, so the accounting stays aligned across parties.
    pub fn settle(&mut self, xs: &[&SharedTensor]) -> Result<Vec<SharedTensor>> {
        if !xs.iter().any(|x| x.is_pending()) {
            return Ok(xs.iter().map(|&x| x.clone()).collect());
        }
        self.scope("settle", |p| {
            if xs.iter().any(|x| p.clip_outstanding(x)) {
                match p.role {
                    PartyId::P0 => p.flush_clips()?,
                    PartyId::P1 => p.recv_clip_flight()?,
                    PartyId::P2 => {}
                }
            }
            xs.iter().map(|x| p.resolve_local(x)).collect()
        })
    }

    fn flush_clips(&mut self) -> Result<()> {
        let blocks = std::mem::take(&mut self.clip_queue);
        self.clip_queued_ids.clear();
        let mut payload = Vec::new();
        encode_clip_list(&blocks, &mut payload);
        let id = blocks.first().map(|b| b.tensor_id).unwrap_or(0);
        let msg = Message::new(MsgType::ClipIndices, self.session_id, id, payload);
        self.send_inner(PartyId::P1, msg, false)
    }

    /// Records a share with the debug shadow, if enabled.
    pub fn observe(&self, x: &SharedTensor) {
        if let Some(s) = &self.shadow {
            if self.is_holder() && !(self.role == PartyId::P1 && x.is_pending()) {
                s.observe(self.role, x, &self.fp);
            }
        }
    }

    /// Opens `x` to every party in `to`. Holders send their shares; each
    /// recipient returns the plaintext, everyone else `None`.
    pub fn open_to(&mut self, x: &SharedTensor, to: &[PartyId]) -> Result<Option<PlainFixedTensor>> {
        let x = self.settle(&[x])?.pop().unwrap();
        self.scope("open", |p| {
            let shape = x.shape().to_vec();
            if p.is_holder() {
                for &r in to {
                    if r != p.role {
                        p.send_tensor(r, MsgType::OpenValue, x.id(), &shape, x.data())?;
                    }
                }
            }
            if !to.contains(&p.role) {
                return Ok(None);
            }
            let data = match p.role {
                PartyId::P2 => {
                    let a = p.recv_tensor(PartyId::P0, MsgType::OpenValue, x.id(), &shape)?;
                    let b = p.recv_tensor(PartyId::P1, MsgType::OpenValue, x.id(), &shape)?;
                    a.into_iter().zip(b).map(|(u, v)| u + v).collect()
                }
                me => {
                    let other = if me == PartyId::P0 { PartyId::P1 } else { PartyId::P0 };
                    let o = p.recv_tensor(other, MsgType::OpenValue, x.id(), &shape)?;
                    x.data().iter().zip(o).map(|(&u, v)| u + v).collect()
                }
            };
            Ok(Some(PlainFixedTensor::new(shape, data)?))
        })
    }

    /// Opens `x` to all three parties and decodes it.
    pub fn reveal(&mut self, x: &SharedTensor) -> Result<Vec<f64>> {
        let t = self.open_to(x, &PartyId::ALL)?.expect("all parties receive");
        Ok(t.to_reals(&self.fp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::session::run_local;

    #[test]
    fn ids_agree_across_parties() {
        let cfg = SessionConfig::deterministic(3);
        let out = run_local(&cfg, |p| Ok((p.fresh_id(), p.fresh_id()))).unwrap();
        assert!(out.outputs.iter().all(|&ids| ids == (1, 2)));
    }

    #[test]
    fn prg_ownership() {
        let cfg = SessionConfig::deterministic(3);
        let out = run_local(&cfg, |p| Ok((p.prg01().is_ok(), p.prg12().is_ok()))).unwrap();
        assert_eq!(out.outputs, [(true, false), (true, true), (false, true)]);
    }

    #[test]
    fn open_to_p2_is_one_round_two_flights() {
        let cfg = SessionConfig::deterministic(4);
        let out = run_local(&cfg, |p| {
            let x = crate::protocols::share_reals(p, PartyId::P0, Some(&[1.5, -2.0, 0.25]), &[3])?;
            p.open_to(&x, &[PartyId::P2])
        })
        .unwrap();
        let fp = cfg.fixed_point().unwrap();
        assert_eq!(out.outputs[2].as_ref().unwrap().to_reals(&fp), vec![1.5, -2.0, 0.25]);
        assert!(out.outputs[0].is_none());
        let open = out.accounting.ops.iter().find(|o| o.name == "open").unwrap();
        assert_eq!(open.rounds, 1);
        assert_eq!(open.traffic.total().payload_bits, 2 * 3 * 64);
        assert_eq!(open.traffic.total().flights, 2);
    }

    #[test]
    fn mutual_open_is_one_round() {
        let cfg = SessionConfig::deterministic(5);
        let out = run_local(&cfg, |p| {
            let x = crate::protocols::share_reals(p, PartyId::P1, Some(&[4.0; 5]), &[5])?;
            p.open_to(&x, &[PartyId::P0, PartyId::P1])
        })
        .unwrap();
        let open = out.accounting.ops.iter().find(|o| o.name == "open").unwrap();
        assert_eq!(open.rounds, 1);
        assert_eq!(open.traffic.total().payload_bits, 2 * 5 * 64);
    }
}
