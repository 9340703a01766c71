//! Local times and favourite sites of simple symmetric random walk.
pub mod branching;
pub mod error;
pub mod exact;
pub mod oracle;
pub mod parallel;
pub mod rayknight;
pub mod report;
pub mod rng;
pub mod stats;
pub mod verify;
pub mod walk;
pub use error::{Error, Result};
