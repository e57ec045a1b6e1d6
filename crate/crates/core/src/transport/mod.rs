//! Networked deployment: each server is an independent TCP listener holding
//! a replica of the database and the shared seed, and the client talks to
//! each of them over a separate connection.
//!
//! No TLS or authentication; the threat model is honest-but-curious servers,
//! not network eavesdroppers.

pub mod client;
pub mod config;
pub mod server;
pub mod wire;

pub use client::Client;
pub use config::Deployment;
pub use server::{spawn, ServerHandle, ServerState, TranscriptEntry};
pub use wire::{ErrorCode, MessageType, WireMessage};
