//! Ledger forensics for delegated-proof-of-stake chains.
//!
//! The crate replays producer-election action traces into voting state,
//! measures how concentrated stake, votes and block production are over time,
//! and looks for coordinated voting: accounts with near-identical voting
//! records, reciprocal vote motifs, and densely inter-voting candidate gangs.
//! A seeded synthetic ledger generator with planted anomalies provides ground
//! truth for all detectors.

pub mod cli;
pub mod cluster;
pub mod exec;
pub mod gang;
pub mod metrics;
pub mod model;
pub mod motif;
pub mod replay;
pub mod report;
pub mod synth;
pub mod time;
pub mod timeline;
pub mod trace;

pub use exec::Exec;
