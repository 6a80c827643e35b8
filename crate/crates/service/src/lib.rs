//! REST service and command-line client for the faultfabric simulator.
//!
//! `api` holds the HTTP handlers, `server` wires an orchestrator to a wall
//! clock and a listener, `client` and `cli` implement the `faultfabric`
//! binary.

pub mod api;
pub mod cli;
pub mod client;
pub mod server;
