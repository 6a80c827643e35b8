//! Tenant-scoped network fault injection over a deterministic, simulated
//! data-center fabric.
//!
//! The crate is organized the way the service is deployed:
//!
//! * [`fabric`] models hosts, tenant virtual networks, packet transport and
//!   controlled delete/restore of resources, driven by a discrete-event loop.
//! * [`mapper`] grounds virtual resources in injection items (the
//!   hypervisor-level interfaces faults are actually applied to).
//! * [`faultengine`] is the pure packet-transformer library: fault types,
//!   timing patterns, protocol filters and phase gating.
//! * [`agents`] hold per-host injection state and speak the controller
//!   command protocol, in-process or over TCP.
//! * [`workload`] generates bandwidth-style and request/response traffic and
//!   turns flow events into KPIs.
//! * [`orchestrator`] is the front-end: per-resource injection, configuration
//!   faults and campaign lifecycle with report bundles.

pub mod agents;
pub mod fabric;
pub mod faultengine;
pub mod fixtures;
pub mod ids;
pub mod mapper;
pub mod orchestrator;
pub mod rng;
pub mod time;
pub mod workload;

pub use fabric::{Fabric, FabricError};
pub use faultengine::FaultSpec;
pub use ids::{HostId, ItemId, ResourceId, TenantId};
pub use mapper::{InjectionItem, ItemMap};
pub use orchestrator::Orchestrator;
pub use time::SimTime;

/// Environment variable holding the global seed.
pub const SEED_ENV: &str = "FAULTFABRIC_SEED";
/// Environment variable pointing at the topology document.
pub const TOPOLOGY_ENV: &str = "FAULTFABRIC_TOPOLOGY";

/// Reads the global seed from `FAULTFABRIC_SEED`, defaulting to 0.
pub fn seed_from_env() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}
