//! The simulated data center: topology, transport and delete/restore.

mod balancer;
mod packet;
pub mod resources;
mod routing;
mod sim;
mod snapshot;
mod topology;

pub use balancer::{BackendHealth, HealthTransition};
pub use packet::{filler_payload, Packet, PacketKind};
pub use routing::{route_from_subnet, route_path, Destination, Route};
pub use sim::{
    AppContext, AppId, Clock, ClockMode, ControlAction, ControlRecord, ControlResult, Delivery, Fabric, FabricConfig,
    FabricEvent, LossReason, LostPacket, TraceRecord, TrafficApp, DEFAULT_HOP_LATENCY_MS,
};
pub use snapshot::{closure_of, ResourceSnapshot, SnapshotEntry};
pub use topology::{Topology, TopologyDocument};

use thiserror::Error;

use crate::ids::{ItemId, ResourceId, TenantId};
use resources::ResourceKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FabricError {
    #[error("malformed topology document: {0}")]
    Parse(String),
    #[error("invalid topology: {0}")]
    Validation(String),
    #[error("no {kind} `{id}`")]
    NotFound { kind: ResourceKind, id: ResourceId },
    #[error("item `{0}` has an active injection")]
    Busy(ItemId),
    #[error("port `{port}` belongs to router `{router}`; delete the router instead")]
    RouterOwned { port: ResourceId, router: ResourceId },
    #[error("resource `{0}` already exists")]
    Conflict(ResourceId),
    #[error("snapshot depends on missing resource `{0}`")]
    StaleSnapshot(ResourceId),
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("balancer `{0}` has no healthy backend")]
    NoBackendAvailable(ResourceId),
    #[error("unknown tenant `{0}`")]
    UnknownTenant(TenantId),
}
