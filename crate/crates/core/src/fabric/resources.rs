//! Hosts, tenants and the virtual resources faults are aimed at.

use std::net::Ipv4Addr;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::ids::{HostId, ResourceId, TenantId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HostRole {
    Controller,
    Network,
    Compute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Host {
    pub id: HostId,
    pub role: HostRole,
    /// Per-hop latency of interfaces on this host; fabric default when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_latency_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tenant {
    pub id: TenantId,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Network,
    Subnet,
    Router,
    Port,
    #[serde(rename = "floatingip")]
    FloatingIp,
    Balancer,
}

impl ResourceKind {
    pub const INJECTABLE: [ResourceKind; 5] = [
        ResourceKind::Network,
        ResourceKind::Subnet,
        ResourceKind::Router,
        ResourceKind::FloatingIp,
        ResourceKind::Port,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ResourceKind::Network => "network",
            ResourceKind::Subnet => "subnet",
            ResourceKind::Router => "router",
            ResourceKind::Port => "port",
            ResourceKind::FloatingIp => "floatingip",
            ResourceKind::Balancer => "balancer",
        }
    }

    pub fn is_injectable(self) -> bool {
        self != ResourceKind::Balancer
    }
}

impl std::fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ResourceKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "network" => ResourceKind::Network,
            "subnet" => ResourceKind::Subnet,
            "router" => ResourceKind::Router,
            "port" => ResourceKind::Port,
            "floatingip" | "floating_ip" => ResourceKind::FloatingIp,
            "balancer" => ResourceKind::Balancer,
            other => return Err(format!("unknown resource kind `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub id: ResourceId,
    pub tenant_id: TenantId,
    pub name: String,
    #[serde(default)]
    pub is_external: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subnet {
    pub id: ResourceId,
    pub network_id: ResourceId,
    pub cidr: Ipv4Net,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Router {
    pub id: ResourceId,
    pub tenant_id: TenantId,
    #[serde(default)]
    pub interface_port_ids: Vec<ResourceId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateway_port_id: Option<ResourceId>,
}

/// The `device_owner` of a port decides which host-level interface backs it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceOwner {
    #[serde(rename = "compute:nova")]
    ComputeNova,
    #[serde(rename = "network:router_interface")]
    RouterInterface,
    #[serde(rename = "network:router_gateway")]
    RouterGateway,
    #[serde(rename = "network:floatingip")]
    FloatingIpPort,
}

impl DeviceOwner {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviceOwner::ComputeNova => "compute:nova",
            DeviceOwner::RouterInterface => "network:router_interface",
            DeviceOwner::RouterGateway => "network:router_gateway",
            DeviceOwner::FloatingIpPort => "network:floatingip",
        }
    }

    /// Role of the host the backing interface must live on.
    pub fn host_role(self) -> HostRole {
        match self {
            DeviceOwner::ComputeNova => HostRole::Compute,
            _ => HostRole::Network,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub id: ResourceId,
    pub tenant_id: TenantId,
    pub device_owner: DeviceOwner,
    pub host_id: HostId,
    pub subnet_id: ResourceId,
    pub address: Ipv4Addr,
    /// Instance (or router) the port is bound to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloatingIp {
    pub id: ResourceId,
    pub tenant_id: TenantId,
    pub address: Ipv4Addr,
    pub attached_port_id: ResourceId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthMonitor {
    #[serde(default = "default_period_ms")]
    pub period_ms: u64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
}

fn default_period_ms() -> u64 {
    5000
}
fn default_timeout_ms() -> u64 {
    5000
}
fn default_max_retries() -> u32 {
    3
}

impl Default for HealthMonitor {
    fn default() -> Self {
        HealthMonitor {
            period_ms: default_period_ms(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
        }
    }
}

/// Round-robin balancer with a health monitor. Lives on a subnet at
/// `address`; not an injectable resource.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Balancer {
    pub id: ResourceId,
    pub tenant_id: TenantId,
    pub subnet_id: ResourceId,
    pub address: Ipv4Addr,
    pub backend_port_ids: Vec<ResourceId>,
    #[serde(default)]
    pub health_monitor: HealthMonitor,
}

/// Any stored resource, tagged by kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "record", rename_all = "snake_case")]
pub enum Resource {
    Network(Network),
    Subnet(Subnet),
    Router(Router),
    Port(Port),
    #[serde(rename = "floatingip")]
    FloatingIp(FloatingIp),
    Balancer(Balancer),
}

impl Resource {
    pub fn kind(&self) -> ResourceKind {
        match self {
            Resource::Network(_) => ResourceKind::Network,
            Resource::Subnet(_) => ResourceKind::Subnet,
            Resource::Router(_) => ResourceKind::Router,
            Resource::Port(_) => ResourceKind::Port,
            Resource::FloatingIp(_) => ResourceKind::FloatingIp,
            Resource::Balancer(_) => ResourceKind::Balancer,
        }
    }

    pub fn id(&self) -> &ResourceId {
        match self {
            Resource::Network(r) => &r.id,
            Resource::Subnet(r) => &r.id,
            Resource::Router(r) => &r.id,
            Resource::Port(r) => &r.id,
            Resource::FloatingIp(r) => &r.id,
            Resource::Balancer(r) => &r.id,
        }
    }
}
