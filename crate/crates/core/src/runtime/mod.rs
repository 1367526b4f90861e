//! Party engines, transports, sessions and traffic accounting.

pub mod accounting;
pub mod config;
pub mod party;
pub mod session;
pub mod shadow;
pub mod transport;
pub mod wire;

pub use accounting::{account_report, merge_snapshots, reference_table, AccountSnapshot, LinkStats, LinkTable, OpRecord, TrafficReport};
pub use config::{ClipMode, JobKind, JobSpec, Mode, SessionConfig};
pub use party::Party;
pub use session::{run_local, run_tcp_party, LocalOutcome};
pub use transport::Transcript;
pub use wire::{Message, MsgType};
