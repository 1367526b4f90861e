//! Debug-only shadow reconstruction for in-process sessions.
//!
//! Holders post every protocol output share here; once both shares of a
//! tensor id have arrived the plaintext is reconstructed and checked against
//! the application value range. Never used in networked runs.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::ring::{FixedPointConfig, RingElement};
use crate::sharing::{PartyId, SharedTensor, TensorId};

/// Bound on application values, in real units.
pub const APP_RANGE: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShadowStats {
    pub tensors_checked: u64,
    pub elements_checked: u64,
    pub max_abs: f64,
    pub out_of_range: u64,
}

#[derive(Debug, Default)]
pub struct Shadow {
    board: Mutex<HashMap<TensorId, [Option<Vec<RingElement>>; 2]>>,
    stats: Mutex<ShadowStats>,
}

impl Shadow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&self, role: PartyId, x: &SharedTensor, fp: &FixedPointConfig) {
        let slot = role.index();
        let done = {
            let mut board = self.board.lock().unwrap();
            let e = board.entry(x.id()).or_default();
            e[slot] = Some(x.data().to_vec());
            if e[0].is_some() && e[1].is_some() {
                board.remove(&x.id())
            } else {
                None
            }
        };
        if let Some([Some(a), Some(b)]) = done {
            let mut st = self.stats.lock().unwrap();
            st.tensors_checked += 1;
            for (u, v) in a.into_iter().zip(b) {
                let r = fp.decode(u + v).abs();
                st.elements_checked += 1;
                st.max_abs = st.max_abs.max(r);
                if r >= APP_RANGE {
                    st.out_of_range += 1;
                }
            }
        }
    }

    pub fn stats(&self) -> ShadowStats {
        *self.stats.lock().unwrap()
    }
}
