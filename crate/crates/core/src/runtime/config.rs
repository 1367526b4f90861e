//! Session configuration, loaded from TOML.
//!
//! ```toml
//! session_id = 7
//! mode = "local-sim"          # or "tcp"
//! frac_bits = 23
//! clip_mode = "piggyback"     # or "eager"
//! data_seed = 42
//!
//! [addresses]
//! p0 = "127.0.0.1:7100"
//! p1 = "127.0.0.1:7101"
//! p2 = "127.0.0.1:7102"
//!
//! [seeds]
//! p0p1 = "<64 hex chars>"
//! p1p2 = "<64 hex chars>"
//!
//! [job]
//! kind = "lr-infer"
//! dim = 10
//! batch = 4
//! ```

use std::net::SocketAddr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::{FixedPointConfig, DEFAULT_FRAC_BITS};
use crate::sharing::PartyId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    LocalSim,
    Tcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ClipMode {
    #[default]
    Piggyback,
    Eager,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Addresses {
    pub p0: String,
    pub p1: String,
    pub p2: String,
}

impl Default for Addresses {
    fn default() -> Self {
        Self { p0: "127.0.0.1:7100".into(), p1: "127.0.0.1:7101".into(), p2: "127.0.0.1:7102".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub p0p1: String,
    pub p1p2: String,
    /// Private per-party seeds. When absent the party draws from OS entropy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    LrInfer,
    DnnInfer,
    DnnTrain,
}

/// Workload the parties execute in `party` mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSpec {
    pub kind: JobKind,
    pub dim: usize,
    pub batch: usize,
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    #[serde(default)]
    pub session_id: u32,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_frac_bits")]
    pub frac_bits: u32,
    #[serde(default)]
    pub clip_mode: ClipMode,
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default)]
    pub debug_shadow: bool,
    #[serde(default)]
    pub addresses: Addresses,
    pub seeds: Seeds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job: Option<JobSpec>,
}

fn default_frac_bits() -> u32 {
    DEFAULT_FRAC_BITS
}

pub fn parse_seed(hex_str: &str) -> Result<[u8; 32]> {
    let bytes = hex::decode(hex_str.trim()).map_err(|e| Error::Config(format!("bad seed hex: {e}")))?;
    bytes.try_into().map_err(|b: Vec<u8>| Error::Config(format!("seed must be 32 bytes, got {}", b.len())))
}

impl SessionConfig {
    /// Fully deterministic config derived from one number, for tests and
    /// single-process runs.
    pub fn deterministic(seed: u64) -> Self {
        let mk = |tag: u8| {
            let mut s = [0u8; 32];
            s[..8].copy_from_slice(&seed.to_le_bytes());
            s[31] = tag;
            hex::encode(s)
        };
        Self {
            session_id: (seed & 0xffff_ffff) as u32,
            mode: Mode::LocalSim,
            frac_bits: DEFAULT_FRAC_BITS,
            clip_mode: ClipMode::Piggyback,
            data_seed: seed,
            debug_shadow: false,
            addresses: Addresses::default(),
            seeds: Seeds { p0p1: mk(1), p1p2: mk(2), p0: Some(mk(10)), p1: Some(mk(11)), p2: Some(mk(12)) },
            job: None,
        }
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.fixed_point()?;
        self.seed_p0p1()?;
        self.seed_p1p2()?;
        for r in PartyId::ALL {
            self.private_seed(r)?;
        }
        if self.mode == Mode::Tcp {
            self.socket_addrs()?;
        }
        if let Some(job) = &self.job {
            if job.batch == 0 || job.dim == 0 {
                return Err(Error::Config("job batch and dim must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn fixed_point(&self) -> Result<FixedPointConfig> {
        FixedPointConfig::new(self.frac_bits)
    }

    pub fn seed_p0p1(&self) -> Result<[u8; 32]> {
        parse_seed(&self.seeds.p0p1)
    }

    pub fn seed_p1p2(&self) -> Result<[u8; 32]> {
        parse_seed(&self.seeds.p1p2)
    }

    pub fn private_seed(&self, role: PartyId) -> Result<Option<[u8; 32]>> {
        let s = match role {
            PartyId::P0 => &self.seeds.p0,
            PartyId::P1 => &self.seeds.p1,
            PartyId::P2 => &self.seeds.p2,
        };
        s.as_deref().map(parse_seed).transpose()
    }

    pub fn socket_addrs(&self) -> Result<[SocketAddr; 3]> {
        let parse = |s: &str| -> Result<SocketAddr> {
            use std::net::ToSocketAddrs;
            s.to_socket_addrs()
                .map_err(|e| Error::Config(format!("bad address {s}: {e}")))?
                .next()
                .ok_or_else(|| Error::Config(format!("address {s} did not resolve")))
        };
        Ok([parse(&self.addresses.p0)?, parse(&self.addresses.p1)?, parse(&self.addresses.p2)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut c = SessionConfig::deterministic(9);
        c.job = Some(JobSpec { kind: JobKind::DnnInfer, dim: 4, batch: 2, hidden: vec![3], steps: 1 });
        let s = c.to_toml();
        assert_eq!(SessionConfig::from_toml(&s).unwrap(), c);
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let s = format!("[seeds]\np0p1 = \"{}\"\np1p2 = \"{}\"\n", "00".repeat(32), "11".repeat(32));
        let c = SessionConfig::from_toml(&s).unwrap();
        assert_eq!(c.frac_bits, 23);
        assert_eq!(c.clip_mode, ClipMode::Piggyback);
        assert_eq!(c.mode, Mode::LocalSim);
        assert_eq!(c.private_seed(PartyId::P2).unwrap(), None);
    }

    #[test]
    fn bad_seed_rejected() {
        let s = "[seeds]\np0p1 = \"abcd\"\np1p2 = \"zz\"\n";
        assert!(matches!(SessionConfig::from_toml(s), Err(Error::Config(_))));
    }

    #[test]
    fn bad_frac_bits_rejected() {
        let mut c = SessionConfig::deterministic(1);
        c.frac_bits = 41;
        assert!(SessionConfig::from_toml(&c.to_toml()).is_err());
    }
}
