//! Per-link traffic and round accounting.
//!
//! Each engine records only its outgoing traffic, so merging the three
//! engine-local views never double counts. Rounds are measured per protocol
//! scope as the length of the longest chain of causally dependent flights.

use serde::Serialize;

use crate::runtime::transport::{link_from_index, link_index};
use crate::sharing::PartyId;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LinkStats {
    pub payload_bits: u64,
    pub raw_bytes: u64,
    pub flights: u64,
}

impl LinkStats {
    pub fn add(&mut self, other: &LinkStats) {
        self.payload_bits += other.payload_bits;
        self.raw_bytes += other.raw_bytes;
        self.flights += other.flights;
    }

    fn sub(&self, earlier: &LinkStats) -> LinkStats {
        LinkStats {
            payload_bits: self.payload_bits - earlier.payload_bits,
            raw_bytes: self.raw_bytes - earlier.raw_bytes,
            flights: self.flights - earlier.flights,
        }
    }
}

/// Online and offline (triple dealing) traffic on the six directed links.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LinkTable {
    pub online: [LinkStats; 6],
    pub offline: [LinkStats; 6],
}

impl LinkTable {
    pub fn record(&mut self, from: PartyId, to: PartyId, payload_bits: u64, raw_bytes: u64, offline: bool) {
        let side = if offline { &mut self.offline } else { &mut self.online };
        let s = &mut side[link_index(from, to)];
        s.payload_bits += payload_bits;
        s.raw_bytes += raw_bytes;
        s.flights += 1;
    }

    pub fn merge(&mut self, other: &LinkTable) {
        for i in 0..6 {
            self.online[i].add(&other.online[i]);
            self.offline[i].add(&other.offline[i]);
        }
    }

    fn delta(&self, earlier: &LinkTable) -> LinkTable {
        LinkTable {
            online: std::array::from_fn(|i| self.online[i].sub(&earlier.online[i])),
            offline: std::array::from_fn(|i| self.offline[i].sub(&earlier.offline[i])),
        }
    }

    pub fn link(&self, from: PartyId, to: PartyId) -> (LinkStats, LinkStats) {
        let i = link_index(from, to);
        (self.online[i], self.offline[i])
    }

    /// Online plus offline traffic on one directed link.
    pub fn combined(&self, from: PartyId, to: PartyId) -> LinkStats {
        let (mut a, b) = self.link(from, to);
        a.add(&b);
        a
    }

    pub fn total_online(&self) -> LinkStats {
        let mut t = LinkStats::default();
        self.online.iter().for_each(|s| t.add(s));
        t
    }

    pub fn total_offline(&self) -> LinkStats {
        let mut t = LinkStats::default();
        self.offline.iter().for_each(|s| t.add(s));
        t
    }

    pub fn total(&self) -> LinkStats {
        let mut t = self.total_online();
        t.add(&self.total_offline());
        t
    }
}

/// One closed protocol scope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OpRecord {
    pub name: String,
    pub level: usize,
    pub traffic: LinkTable,
    pub rounds: u32,
}

#[derive(Debug)]
struct OpenScope {
    name: String,
    clock: u32,
    max_send: u32,
    start: LinkTable,
}

/// Engine-local accounting state.
#[derive(Debug)]
pub struct Accounting {
    links: LinkTable,
    stack: Vec<OpenScope>,
    ops: Vec<OpRecord>,
}

impl Default for Accounting {
    fn default() -> Self {
        Self::new()
    }
}

impl Accounting {
    pub fn new() -> Self {
        Self {
            links: LinkTable::default(),
            stack: vec![OpenScope { name: "session".into(), clock: 0, max_send: 0, start: LinkTable::default() }],
            ops: Vec::new(),
        }
    }

    pub fn open(&mut self, name: &str) {
        self.stack.push(OpenScope { name: name.to_string(), clock: 0, max_send: 0, start: self.links });
    }

    pub fn close(&mut self) {
        assert!(self.stack.len() > 1, "unbalanced accounting scope");
        let s = self.stack.pop().unwrap();
        self.ops.push(OpRecord {
            name: s.name,
            level: self.stack.len(),
            traffic: self.links.delta(&s.start),
            rounds: s.max_send,
        });
    }

    /// Records an outgoing flight and returns the depth vector to attach.
    /// Offline flights carry depth zero and never extend a round chain.
    pub fn on_send(&mut self, from: PartyId, to: PartyId, payload_bits: u64, raw_bytes: u64, offline: bool) -> Vec<u32> {
        self.links.record(from, to, payload_bits, raw_bytes, offline);
        if offline {
            return vec![0; self.stack.len()];
        }
        self.stack
            .iter_mut()
            .map(|s| {
                let d = s.clock + 1;
                s.max_send = s.max_send.max(d);
                d
            })
            .collect()
    }

    pub fn on_recv(&mut self, depths: &[u32]) {
        for (s, &d) in self.stack.iter_mut().zip(depths) {
            s.clock = s.clock.max(d);
        }
    }

    pub fn snapshot(&self) -> AccountSnapshot {
        AccountSnapshot { links: self.links, rounds: self.stack[0].max_send, ops: self.ops.clone() }
    }
}

/// Engine-local view, merged across parties by [`merge_snapshots`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AccountSnapshot {
    pub links: LinkTable,
    pub rounds: u32,
    pub ops: Vec<OpRecord>,
}

/// Combines the per-engine views. Every engine runs the same program, so op
/// records line up by position.
pub fn merge_snapshots(views: &[AccountSnapshot]) -> AccountSnapshot {
    let mut out = AccountSnapshot::default();
    for v in views {
        out.links.merge(&v.links);
        out.rounds = out.rounds.max(v.rounds);
    }
    let n = views.iter().map(|v| v.ops.len()).max().unwrap_or(0);
    for i in 0..n {
        let mut rec: Option<OpRecord> = None;
        for v in views {
            if let Some(op) = v.ops.get(i) {
                match &mut rec {
                    None => rec = Some(op.clone()),
                    Some(r) => {
                        debug_assert_eq!(r.name, op.name, "engines diverged");
                        r.traffic.merge(&op.traffic);
                        r.rounds = r.rounds.max(op.rounds);
                    }
                }
            }
        }
        out.ops.extend(rec);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkReport {
    pub from: String,
    pub to: String,
    pub online: LinkStats,
    pub offline: LinkStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpAggregate {
    pub name: String,
    pub count: u64,
    pub payload_bits: u64,
    pub offline_payload_bits: u64,
    pub raw_bytes: u64,
    pub max_rounds: u32,
    pub total_rounds: u64,
}

/// Published cost of a comparable secure-activation protocol, per element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceCost {
    pub protocol: &'static str,
    pub rounds: f64,
    pub bits_per_element: f64,
    pub formula: &'static str,
}

/// Static comparison table for non-linear activations at ring width `l`.
pub fn reference_table(l: u32) -> Vec<ReferenceCost> {
    let l = l as f64;
    let p = 67f64;
    vec![
        ReferenceCost { protocol: "SecureNN", rounds: 11.0, bits_per_element: 8.0 * l * p.log2() + 32.0 * l + 2.0, formula: "8L log p + 32L + 2 (p = 67)" },
        ReferenceCost { protocol: "ABY3", rounds: 6.0 + l.log2(), bits_per_element: 105.0 * l, formula: "rounds 6 + log L, bits 105L" },
        ReferenceCost { protocol: "Trident", rounds: 7.0, bits_per_element: 16.0 * l + 64.0, formula: "16L + 64" },
        ReferenceCost { protocol: "GC", rounds: 4.0, bits_per_element: 128.0 * (3.0 * l - 1.0), formula: "k(3L - 1), k = 128" },
        ReferenceCost { protocol: "CAP", rounds: 3.0, bits_per_element: 3.0 * l, formula: "3L" },
    ]
}

/// Render-ready accounting summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficReport {
    pub links: Vec<LinkReport>,
    pub online: LinkStats,
    pub offline: LinkStats,
    pub rounds: u32,
    pub ops: Vec<OpRecord>,
    pub aggregates: Vec<OpAggregate>,
    pub reference: Vec<ReferenceCost>,
}

pub fn account_report(view: &AccountSnapshot) -> TrafficReport {
    let links = (0..6)
        .map(|i| {
            let (from, to) = link_from_index(i);
            LinkReport { from: from.to_string(), to: to.to_string(), online: view.links.online[i], offline: view.links.offline[i] }
        })
        .collect();
    let mut aggregates: Vec<OpAggregate> = Vec::new();
    for op in &view.ops {
        let idx = match aggregates.iter().position(|a| a.name == op.name) {
            Some(i) => i,
            None => {
                aggregates.push(OpAggregate {
                    name: op.name.clone(),
                    count: 0,
                    payload_bits: 0,
                    offline_payload_bits: 0,
                    raw_bytes: 0,
                    max_rounds: 0,
                    total_rounds: 0,
                });
                aggregates.len() - 1
            }
        };
        let a = &mut aggregates[idx];
        a.count += 1;
        a.payload_bits += op.traffic.total_online().payload_bits;
        a.offline_payload_bits += op.traffic.total_offline().payload_bits;
        a.raw_bytes += op.traffic.total().raw_bytes;
        a.max_rounds = a.max_rounds.max(op.rounds);
        a.total_rounds += op.rounds as u64;
    }
    TrafficReport {
        links,
        online: view.links.total_online(),
        offline: view.links.total_offline(),
        rounds: view.rounds,
        ops: view.ops.clone(),
        aggregates,
        reference: reference_table(64),
    }
}
