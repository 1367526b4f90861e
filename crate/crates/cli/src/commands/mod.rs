pub mod bench;
pub mod party;
pub mod privacy;
pub mod train;
