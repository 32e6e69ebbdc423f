//! Live serving over HTTP and a benchmark client for it.
//!
//! [`spawn`] starts a service whose single engine task owns a
//! [`Replica`](adapterd_core::Replica) and paces its steps against the wall
//! clock. `POST /v1/generate` streams one server-sent event per token:
//!
//! ```text
//! data: {"token_index":0}
//!
//! data: {"token_index":1}
//!
//! data: [DONE]
//! ```
//!
//! [`bench`] drives one or more such services with closed-loop users and
//! times every request on the client side.

mod client;
mod engine;
mod error;
mod server;

pub use client::{bench, generate, BenchOptions, BenchOutcome, ClientSample, StreamTiming};
pub use error::{Error, Result};
pub use server::{port_from_env, serve, spawn, GenerateRequest, ServerConfig, ServerHandle};
