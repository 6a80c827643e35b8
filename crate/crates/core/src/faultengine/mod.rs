//! Packet-level fault model.
//!
//! Everything here is value-in/value-out except [`ItemInjectionState`], the
//! small piece of mutable state an agent keeps per injected item.

mod bucket;
mod corrupt;
mod filter;
mod pattern;
mod spec;
mod state;

pub use bucket::{rate_admit, TokenBucket};
pub use corrupt::{corrupt_payload, EmptyPayload};
pub use filter::matches_filter;
pub use pattern::{activation_probability, OutOfWindow};
pub use spec::{FaultSpec, FaultSpecError, FaultType, Pattern, Protocol, ProtocolFilter, Timing};
pub use state::{apply_fault, InjectionCounters, ItemInjectionState, PacketOutcome};
