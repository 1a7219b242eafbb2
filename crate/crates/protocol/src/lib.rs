//! JSON-over-HTTP access to locus games.
//!
//! [`Service`] owns the loaded game instances and answers requests on the
//! `/v1` routes with a `{"ok", "data", "error"}` envelope. [`server`] puts it
//! on a socket, [`WireTransport`] drives it from the other end.

mod client;
mod error;
pub mod server;
mod service;

pub use client::WireTransport;
pub use error::{ApiError, ERROR_TABLE};
pub use server::{router, serve, spawn_local, LocalServer};
pub use service::{
    encode_event_stream, snapshot_path, tokens_path, AnswerReply, Response, Service, TOKEN_LEN,
};
