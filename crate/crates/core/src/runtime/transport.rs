//! Point-to-point links between the three engines.
//!
//! Every directed link is FIFO. The in-process mesh uses channels; the TCP
//! transport uses one duplex connection per party pair with a reader thread
//! feeding a per-link mailbox, so a blocked `recv` never stalls the peer's
//! writes.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::runtime::wire::{Message, MsgType, HEADER_LEN};
use crate::sharing::PartyId;

/// Encoded message plus the causal depth vector used for round counting.
/// Depths travel out of band and are never part of the wire bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub bytes: Vec<u8>,
    pub depths: Vec<u32>,
}

pub trait Transport: Send {
    fn send(&mut self, to: PartyId, frame: Frame) -> Result<()>;
    fn recv(&mut self, from: PartyId) -> Result<Frame>;
}

/// Dense index of the directed link `from -> to` in `0..6`.
pub fn link_index(from: PartyId, to: PartyId) -> usize {
    assert_ne!(from, to, "no self links");
    let (f, t) = (from.index(), to.index());
    f * 2 + if t > f { t - 1 } else { t }
}

pub fn link_from_index(i: usize) -> (PartyId, PartyId) {
    let f = i / 2;
    let r = i % 2;
    let t = if r < f { r } else { r + 1 };
    (PartyId::from_index(f).unwrap(), PartyId::from_index(t).unwrap())
}

/// Per-link record of every frame sent, in send order.
#[derive(Debug, Default)]
pub struct Transcript {
    links: Mutex<[Vec<Vec<u8>>; 6]>,
}

impl Transcript {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    fn record(&self, from: PartyId, to: PartyId, bytes: &[u8]) {
        self.links.lock().unwrap()[link_index(from, to)].push(bytes.to_vec());
    }

    pub fn link(&self, from: PartyId, to: PartyId) -> Vec<Vec<u8>> {
        self.links.lock().unwrap()[link_index(from, to)].clone()
    }

    pub fn snapshot(&self) -> [Vec<Vec<u8>>; 6] {
        self.links.lock().unwrap().clone()
    }
}

pub struct LocalTransport {
    me: PartyId,
    tx: [Option<Sender<Frame>>; 3],
    rx: [Option<Receiver<Frame>>; 3],
    transcript: Option<Arc<Transcript>>,
}

/// Fully connected in-process mesh for the three roles, indexed by role.
pub fn local_mesh(transcript: Option<Arc<Transcript>>) -> [LocalTransport; 3] {
    let mut tx: [[Option<Sender<Frame>>; 3]; 3] = Default::default();
    let mut rx: [[Option<Receiver<Frame>>; 3]; 3] = Default::default();
    for from in 0..3 {
        for to in 0..3 {
            if from != to {
                let (s, r) = channel();
                tx[from][to] = Some(s);
                rx[to][from] = Some(r);
            }
        }
    }
    let mut tx = tx.into_iter();
    let mut rx = rx.into_iter();
    std::array::from_fn(|i| LocalTransport {
        me: PartyId::from_index(i).unwrap(),
        tx: tx.next().unwrap(),
        rx: rx.next().unwrap(),
        transcript: transcript.clone(),
    })
}

impl Transport for LocalTransport {
    fn send(&mut self, to: PartyId, frame: Frame) -> Result<()> {
        if let Some(t) = &self.transcript {
            t.record(self.me, to, &frame.bytes);
        }
        self.tx[to.index()]
            .as_ref()
            .ok_or(Error::LinkClosed(to))?
            .send(frame)
            .map_err(|_| Error::LinkClosed(to))
    }

    fn recv(&mut self, from: PartyId) -> Result<Frame> {
        self.rx[from.index()]
            .as_ref()
            .ok_or(Error::LinkClosed(from))?
            .recv()
            .map_err(|_| Error::LinkClosed(from))
    }
}

pub struct TcpTransport {
    me: PartyId,
    writers: [Option<TcpStream>; 3],
    inbox: [Option<Receiver<Result<Vec<u8>>>>; 3],
}

fn read_frame(stream: &mut TcpStream) -> Result<Option<Vec<u8>>> {
    let mut header = [0u8; HEADER_LEN];
    match stream.read_exact(&mut header) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let (_, _, _, len) = Message::decode_header(&header)?;
    let mut buf = header.to_vec();
    buf.resize(HEADER_LEN + len as usize, 0);
    stream.read_exact(&mut buf[HEADER_LEN..])?;
    Ok(Some(buf))
}

fn spawn_reader(mut stream: TcpStream, peer: PartyId) -> Receiver<Result<Vec<u8>>> {
    let (tx, rx) = channel();
    thread::Builder::new()
        .name(format!("reader-{peer}"))
        .spawn(move || loop {
            match read_frame(&mut stream) {
                Ok(Some(f)) => {
                    if tx.send(Ok(f)).is_err() {
                        return;
                    }
                }
                Ok(None) => return,
                Err(e) => {
                    let _ = tx.send(Err(e));
                    return;
                }
            }
        })
        .expect("spawn reader thread");
    rx
}

fn hello(me: PartyId, session_id: u32) -> Vec<u8> {
    Message::new(MsgType::Control, session_id, 0, vec![me.index() as u8]).encode()
}

impl TcpTransport {
    /// Establishes the pairwise connections. Lower roles listen, higher roles
    /// connect, retrying until `timeout` elapses.
    pub fn connect(me: PartyId, addrs: &[SocketAddr; 3], session_id: u32, timeout: Duration) -> Result<Self> {
        let deadline = Instant::now() + timeout;
        let mut streams: [Option<TcpStream>; 3] = Default::default();

        let higher: Vec<PartyId> = PartyId::ALL.iter().copied().filter(|p| p.index() > me.index()).collect();
        let listener = if higher.is_empty() {
            None
        } else {
            Some(TcpListener::bind(addrs[me.index()])?)
        };

        for peer in PartyId::ALL.iter().copied().filter(|p| p.index() < me.index()) {
            let mut s = loop {
                match TcpStream::connect(addrs[peer.index()]) {
                    Ok(s) => break s,
                    Err(e) if Instant::now() < deadline => {
                        log::debug!("{me}: connect to {peer} failed ({e}), retrying");
                        thread::sleep(Duration::from_millis(50));
                    }
                    Err(e) => return Err(e.into()),
                }
            };
            s.set_nodelay(true)?;
            s.write_all(&hello(me, session_id))?;
            streams[peer.index()] = Some(s);
        }

        if let Some(listener) = listener {
            listener.set_nonblocking(true)?;
            let mut pending = higher.len();
            while pending > 0 {
                match listener.accept() {
                    Ok((mut s, _)) => {
                        s.set_nonblocking(false)?;
                        s.set_nodelay(true)?;
                        let frame = read_frame(&mut s)?.ok_or_else(|| Error::Protocol("peer closed during handshake".into()))?;
                        let msg = Message::decode(&frame)?;
                        if msg.msg_type != MsgType::Control || msg.session_id != session_id || msg.payload.len() != 1 {
                            return Err(Error::Protocol("bad handshake".into()));
                        }
                        let peer = PartyId::from_index(msg.payload[0] as usize)
                            .filter(|p| p.index() > me.index())
                            .ok_or_else(|| Error::Protocol("handshake from unexpected role".into()))?;
                        if streams[peer.index()].replace(s).is_some() {
                            return Err(Error::Protocol(format!("duplicate connection from {peer}")));
                        }
                        pending -= 1;
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        if Instant::now() >= deadline {
                            return Err(Error::Protocol(format!("{me}: timed out waiting for peers")));
                        }
                        thread::sleep(Duration::from_millis(20));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }

        let mut writers: [Option<TcpStream>; 3] = Default::default();
        let mut inbox: [Option<Receiver<Result<Vec<u8>>>>; 3] = Default::default();
        for (i, s) in streams.into_iter().enumerate() {
            if let Some(s) = s {
                let peer = PartyId::from_index(i).unwrap();
                inbox[i] = Some(spawn_reader(s.try_clone()?, peer));
                writers[i] = Some(s);
            }
        }
        Ok(Self { me, writers, inbox })
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, to: PartyId, frame: Frame) -> Result<()> {
        let w = self.writers[to.index()].as_mut().ok_or(Error::LinkClosed(to))?;
        w.write_all(&frame.bytes).map_err(|_| Error::LinkClosed(to))
    }

    fn recv(&mut self, from: PartyId) -> Result<Frame> {
        let rx = self.inbox[from.index()].as_ref().ok_or(Error::LinkClosed(from))?;
        match rx.recv() {
            Ok(Ok(bytes)) => Ok(Frame { bytes, depths: Vec::new() }),
            Ok(Err(e)) => Err(e),
            Err(_) => Err(Error::LinkClosed(from)),
        }
    }
}

impl Drop for TcpTransport {
    fn drop(&mut self) {
        for w in self.writers.iter().flatten() {
            let _ = w.shutdown(std::net::Shutdown::Write);
        }
        log::debug!("{}: transport closed", self.me);
    }
}
