//! Runtime for locative interactive-narrative games.
//!
//! Games are declarative documents ([`model`]) played by positioned players.
//! The [`engine`] resolves geofence and QR triggers, conversations, inventory
//! and quests; [`persistence`] snapshots instances; [`harness`] drives scripted
//! bots against an engine in-process or through any other [`harness::Transport`].

pub mod batch;
pub mod engine;
pub mod geo;
pub mod harness;
pub mod model;
pub mod persistence;
