//! Path resolution over the subnet graph.
//!
//! Router edges are directed: interface to interface in both directions,
//! private subnet to external subnet through the gateway. Inbound traffic
//! from an external network only enters a tenant through a floating IP.

use std::collections::{BTreeSet, VecDeque};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::resources::{DeviceOwner, Port, Resource};
use super::topology::Topology;
use super::FabricError;
use crate::ids::{ItemId, ResourceId};
use crate::mapper::item_id_for;

/// Where a routed packet ends up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "snake_case")]
pub enum Destination {
    Port(ResourceId),
    Balancer(ResourceId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub items: Vec<ItemId>,
    pub destination: Destination,
}

/// Path from a compute port to `dst`. The source tap is the first item.
pub fn route_path(topo: &Topology, src_port_id: &ResourceId, dst: Ipv4Addr) -> Result<Route, FabricError> {
    let src = topo
        .port(src_port_id)
        .ok_or_else(|| FabricError::Unreachable(format!("source port `{src_port_id}` does not exist")))?;
    if src.device_owner != DeviceOwner::ComputeNova {
        return Err(FabricError::Unreachable(format!(
            "source port `{src_port_id}` is not a compute port"
        )));
    }
    route_from_subnet(topo, &src.subnet_id, vec![item_id_for(src)], dst)
}

/// Path starting inside `subnet` with `prefix` already traversed.
pub fn route_from_subnet(
    topo: &Topology,
    subnet: &ResourceId,
    prefix: Vec<ItemId>,
    dst: Ipv4Addr,
) -> Result<Route, FabricError> {
    if topo.subnet(subnet).is_none() {
        return Err(FabricError::Unreachable(format!("subnet `{subnet}` does not exist")));
    }
    let mut visited = BTreeSet::new();
    let mut queue = VecDeque::new();
    // Shortest path to every reached subnet, kept for the floating-IP leg.
    let mut reached: Vec<(ResourceId, Vec<ItemId>)> = Vec::new();
    visited.insert(subnet.clone());
    queue.push_back((subnet.clone(), prefix));

    while let Some((here, path)) = queue.pop_front() {
        if let Some(ep) = topo.endpoint_in_subnet(&here, dst) {
            let mut items = path;
            let destination = match ep {
                Resource::Port(p) => {
                    items.push(item_id_for(p));
                    Destination::Port(p.id.clone())
                }
                Resource::Balancer(b) => Destination::Balancer(b.id.clone()),
                _ => unreachable!("endpoints are ports or balancers"),
            };
            return Ok(Route { items, destination });
        }
        for (next, hop) in neighbours(topo, &here) {
            if visited.insert(next.clone()) {
                let mut p = path.clone();
                p.extend(hop);
                queue.push_back((next, p));
            }
        }
        reached.push((here, path));
    }

    if let Some(fip) = topo.floating_ip_by_address(dst) {
        let fip_port = topo
            .floating_ip_port(fip)
            .ok_or_else(|| FabricError::Unreachable(format!("floating ip `{}` has no backing port", fip.id)))?;
        let Some((_, to_ext)) = reached.iter().find(|(s, _)| *s == fip_port.subnet_id) else {
            return Err(FabricError::Unreachable(format!(
                "{dst} is not reachable from `{subnet}`"
            )));
        };
        let target = topo
            .port(&fip.attached_port_id)
            .ok_or_else(|| FabricError::Unreachable(format!("floating ip `{}` points at a missing port", fip.id)))?;
        let ext_net = topo.subnet(&fip_port.subnet_id).map(|s| s.network_id.clone());
        for router in topo.routers() {
            let Some(gw) = router.gateway_port_id.as_ref().and_then(|g| topo.port(g)) else {
                continue;
            };
            if topo.subnet(&gw.subnet_id).map(|s| s.network_id.clone()) != ext_net {
                continue;
            }
            let iface = router
                .interface_port_ids
                .iter()
                .filter_map(|i| topo.port(i))
                .find(|i| i.subnet_id == target.subnet_id);
            if let Some(iface) = iface {
                let mut items = to_ext.clone();
                items.push(item_id_for(fip_port));
                items.push(item_id_for(gw));
                items.push(item_id_for(iface));
                items.push(item_id_for(target));
                return Ok(Route {
                    items,
                    destination: Destination::Port(target.id.clone()),
                });
            }
        }
        return Err(FabricError::Unreachable(format!(
            "no router links floating ip {dst} to subnet `{}`",
            target.subnet_id
        )));
    }
    Err(FabricError::Unreachable(format!(
        "{dst} is not reachable from `{subnet}`"
    )))
}

/// Outgoing router edges of a subnet, in router creation order.
fn neighbours(topo: &Topology, subnet: &ResourceId) -> Vec<(ResourceId, Vec<ItemId>)> {
    let external = topo.is_external_subnet(subnet);
    let mut out = Vec::new();
    for router in topo.routers() {
        let ifaces: Vec<&Port> = router.interface_port_ids.iter().filter_map(|i| topo.port(i)).collect();
        for p in ifaces.iter().filter(|p| &p.subnet_id == subnet) {
            for q in ifaces.iter().filter(|q| q.id != p.id && &q.subnet_id != subnet) {
                out.push((q.subnet_id.clone(), vec![item_id_for(p), item_id_for(q)]));
            }
            if external {
                continue;
            }
            if let Some(gw) = router.gateway_port_id.as_ref().and_then(|g| topo.port(g)) {
                out.push((gw.subnet_id.clone(), vec![item_id_for(p), item_id_for(gw)]));
            }
        }
    }
    out
}
