//! Session orchestration: three engines in one process, or one engine per
//! process over TCP.

use std::sync::Arc;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::runtime::accounting::{merge_snapshots, AccountSnapshot};
use crate::runtime::config::SessionConfig;
use crate::runtime::party::Party;
use crate::runtime::shadow::{Shadow, ShadowStats};
use crate::runtime::transport::{local_mesh, TcpTransport, Transcript};
use crate::sharing::PartyId;

#[derive(Debug)]
pub struct LocalOutcome<T> {
    /// Per-role return values, indexed by role.
    pub outputs: [T; 3],
    pub accounting: AccountSnapshot,
    pub per_party: [AccountSnapshot; 3],
    pub transcript: Arc<Transcript>,
    pub shadow: Option<ShadowStats>,
}

/// Runs `program` on three engines connected by in-process channels.
pub fn run_local<T, F>(cfg: &SessionConfig, program: F) -> Result<LocalOutcome<T>>
where
    T: Send,
    F: Fn(&mut Party) -> Result<T> + Sync,
{
    cfg.validate()?;
    let transcript = Transcript::new();
    let shadow = cfg.debug_shadow.then(|| Arc::new(Shadow::new()));
    let mesh = local_mesh(Some(transcript.clone()));
    let program = &program;
    let results: Vec<Result<(T, AccountSnapshot)>> = std::thread::scope(|s| {
        let handles: Vec<_> = mesh
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let shadow = shadow.clone();
                std::thread::Builder::new()
                    .name(format!("party-p{i}"))
                    .spawn_scoped(s, move || {
                        let role = PartyId::from_index(i).unwrap();
                        let mut party = Party::new(role, cfg, Box::new(t))?;
                        if let Some(sh) = shadow {
                            party = party.with_shadow(sh);
                        }
                        let out = program(&mut party)?;
                        Ok((out, party.accounting()))
                    })
                    .expect("spawn party thread")
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Protocol("party thread panicked".into()))))
            .collect()
    });

    // Report the root cause rather than the closed links it triggered.
    if results.iter().any(|r| r.is_err()) {
        let mut errs: Vec<Error> = results.into_iter().filter_map(|r| r.err()).collect();
        let pos = errs.iter().position(|e| !matches!(e, Error::LinkClosed(_))).unwrap_or(0);
        return Err(errs.swap_remove(pos));
    }
    let mut outs = results.into_iter().map(|r| r.unwrap());
    let (o0, a0) = outs.next().unwrap();
    let (o1, a1) = outs.next().unwrap();
    let (o2, a2) = outs.next().unwrap();
    let per_party = [a0, a1, a2];
    Ok(LocalOutcome {
        outputs: [o0, o1, o2],
        accounting: merge_snapshots(&per_party),
        per_party,
        transcript,
        shadow: shadow.map(|s| s.stats()),
    })
}

/// Runs `program` as a single networked engine. Round counts in the returned
/// accounting are lower bounds because causal depths are not carried on the
/// wire; byte and bit counts are exact.
pub fn run_tcp_party<T, F>(cfg: &SessionConfig, role: PartyId, timeout: Duration, program: F) -> Result<(T, AccountSnapshot)>
where
    F: FnOnce(&mut Party) -> Result<T>,
{
    cfg.validate()?;
    let addrs = cfg.socket_addrs()?;
    let transport = TcpTransport::connect(role, &addrs, cfg.session_id, timeout)?;
    let mut party = Party::new(role, cfg, Box::new(transport))?;
    let out = program(&mut party)?;
    Ok((out, party.accounting()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_in_one_party_propagates() {
        let cfg = SessionConfig::deterministic(1);
        let r = run_local(&cfg, |p| {
            if p.role() == PartyId::P1 {
                return Err(Error::Protocol("boom".into()));
            }
            p.recv(PartyId::P1, crate::runtime::wire::MsgType::Control).map(|_| ())
        });
        match r {
            Err(Error::Protocol(m)) => assert_eq!(m, "boom"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
