use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::MapError;
use crate::fabric::resources::{Balancer, DeviceOwner, FloatingIp, Network, Resource, ResourceKind, Router, Subnet};
use crate::fabric::Topology;
use crate::ids::{ResourceId, TenantId};

/// A port as tenants see it: no host placement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphPort {
    pub id: ResourceId,
    pub tenant_id: TenantId,
    pub device_owner: DeviceOwner,
    pub subnet_id: ResourceId,
    pub address: Ipv4Addr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub kind: ResourceKind,
    pub id: ResourceId,
    pub name: String,
    pub tenant_id: TenantId,
    /// Shared external resource, not owned by the viewer.
    #[serde(default)]
    pub shared: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRelation {
    Contains,
    Interface,
    Gateway,
    Maps,
    Backend,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: ResourceId,
    pub to: ResourceId,
    pub relation: EdgeRelation,
}

/// Tenant-scoped view of the fabric. Uses the topology document's array
/// names, plus `nodes` and `edges` for graph rendering.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyGraph {
    pub tenant_id: TenantId,
    pub networks: Vec<Network>,
    pub subnets: Vec<Subnet>,
    pub routers: Vec<Router>,
    pub ports: Vec<GraphPort>,
    pub floating_ips: Vec<FloatingIp>,
    pub balancers: Vec<Balancer>,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl TopologyGraph {
    pub fn node(&self, id: &ResourceId) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| &n.id == id)
    }
}

pub fn get_network_topology(topo: &Topology, tenant: &TenantId) -> Result<TopologyGraph, MapError> {
    if topo.tenant(tenant).is_none() {
        return Err(MapError::UnknownTenant(tenant.clone()));
    }
    let mut g = TopologyGraph {
        tenant_id: tenant.clone(),
        ..Default::default()
    };
    let mut included = BTreeSet::new();
    for r in topo.iter() {
        let owner = topo.owner(r.id());
        let own = owner == Some(tenant);
        let shared = !own
            && match r {
                Resource::Network(n) => n.is_external,
                Resource::Subnet(s) => topo.network(&s.network_id).is_some_and(|n| n.is_external),
                _ => false,
            };
        if !own && !shared {
            continue;
        }
        let name = match r {
            Resource::Network(n) => n.name.clone(),
            other => other.id().to_string(),
        };
        g.nodes.push(GraphNode {
            kind: r.kind(),
            id: r.id().clone(),
            name,
            tenant_id: owner.cloned().unwrap_or_else(|| tenant.clone()),
            shared,
        });
        included.insert(r.id().clone());
        match r {
            Resource::Network(n) => g.networks.push(n.clone()),
            Resource::Subnet(s) => g.subnets.push(s.clone()),
            Resource::Router(x) => g.routers.push(x.clone()),
            Resource::Port(p) => g.ports.push(GraphPort {
                id: p.id.clone(),
                tenant_id: p.tenant_id.clone(),
                device_owner: p.device_owner,
                subnet_id: p.subnet_id.clone(),
                address: p.address,
                device_id: p.device_id.clone(),
            }),
            Resource::FloatingIp(f) => g.floating_ips.push(f.clone()),
            Resource::Balancer(b) => g.balancers.push(b.clone()),
        }
    }

    let mut edge = |from: &ResourceId, to: &ResourceId, relation| {
        if included.contains(from) && included.contains(to) {
            g.edges.push(GraphEdge {
                from: from.clone(),
                to: to.clone(),
                relation,
            });
        }
    };
    for r in topo.iter() {
        match r {
            Resource::Subnet(s) => edge(&s.network_id, &s.id, EdgeRelation::Contains),
            Resource::Port(p) => edge(&p.subnet_id, &p.id, EdgeRelation::Contains),
            Resource::Router(x) => {
                for i in &x.interface_port_ids {
                    edge(&x.id, i, EdgeRelation::Interface);
                }
                if let Some(gw) = &x.gateway_port_id {
                    edge(&x.id, gw, EdgeRelation::Gateway);
                }
            }
            Resource::FloatingIp(f) => edge(&f.id, &f.attached_port_id, EdgeRelation::Maps),
            Resource::Balancer(b) => {
                edge(&b.subnet_id, &b.id, EdgeRelation::Contains);
                for p in &b.backend_port_ids {
                    edge(&b.id, p, EdgeRelation::Backend);
                }
            }
            Resource::Network(_) => {}
        }
    }
    Ok(g)
}
