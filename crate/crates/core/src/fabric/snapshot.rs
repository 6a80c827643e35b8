//! Dependency closures and the snapshots that let deleted resources come back.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::resources::{DeviceOwner, Resource, ResourceKind};
use super::topology::Topology;
use super::FabricError;
use crate::ids::ResourceId;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    /// Creation sequence number, reused on restore.
    pub seq: u64,
    #[serde(flatten)]
    pub resource: Resource,
}

/// A deleted resource and everything removed with it, in creation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceSnapshot {
    pub root_kind: ResourceKind,
    pub root_id: ResourceId,
    pub closure: Vec<SnapshotEntry>,
    /// Parents outside the closure that must exist again at restore time.
    pub external_refs: Vec<ResourceId>,
    pub taken_at: SimTime,
}

impl ResourceSnapshot {
    pub fn ids(&self) -> impl Iterator<Item = &ResourceId> + '_ {
        self.closure.iter().map(|e| e.resource.id())
    }

    pub fn len(&self) -> usize {
        self.closure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closure.is_empty()
    }
}

/// Ids removed together with `id`, sorted by creation order.
pub fn closure_of(topo: &Topology, id: &ResourceId) -> Vec<ResourceId> {
    let mut seen = BTreeSet::new();
    let mut work = vec![id.clone()];
    while let Some(next) = work.pop() {
        let Some(resource) = topo.get(&next) else { continue };
        if !seen.insert(next.clone()) {
            continue;
        }
        match resource {
            Resource::Network(n) => work.extend(topo.subnets_of(&n.id).map(|s| s.id.clone())),
            Resource::Subnet(s) => {
                work.extend(topo.ports_of(&s.id).map(|p| p.id.clone()));
                work.extend(topo.balancers().filter(|b| b.subnet_id == s.id).map(|b| b.id.clone()));
            }
            Resource::Router(r) => {
                work.extend(r.interface_port_ids.iter().cloned());
                work.extend(r.gateway_port_id.iter().cloned());
            }
            Resource::Port(p) => {
                work.extend(topo.floating_ips_of(&p.id).map(|f| f.id.clone()));
                if p.device_owner == DeviceOwner::FloatingIpPort {
                    work.extend(topo.floating_ip_of_port(p).map(|f| f.id.clone()));
                }
            }
            Resource::FloatingIp(f) => work.extend(topo.floating_ip_port(f).map(|p| p.id.clone())),
            Resource::Balancer(_) => {}
        }
    }
    let mut ids: Vec<ResourceId> = seen.into_iter().collect();
    ids.sort_by_key(|i| topo.seq_of(i));
    ids
}

fn parents(r: &Resource) -> Vec<&ResourceId> {
    match r {
        Resource::Network(_) | Resource::Router(_) => vec![],
        Resource::Subnet(s) => vec![&s.network_id],
        Resource::Port(p) => vec![&p.subnet_id],
        Resource::FloatingIp(f) => vec![&f.attached_port_id],
        Resource::Balancer(b) => {
            let mut v = vec![&b.subnet_id];
            v.extend(b.backend_port_ids.iter());
            v
        }
    }
}

pub fn snapshot(
    topo: &Topology,
    kind: ResourceKind,
    id: &ResourceId,
    now: SimTime,
) -> Result<ResourceSnapshot, FabricError> {
    if !topo.contains(kind, id) {
        return Err(FabricError::NotFound { kind, id: id.clone() });
    }
    // Router ports go with their router, as in Neutron.
    if let Some(r) = topo
        .routers()
        .find(|r| r.interface_port_ids.contains(id) || r.gateway_port_id.as_ref() == Some(id))
    {
        return Err(FabricError::RouterOwned {
            port: id.clone(),
            router: r.id.clone(),
        });
    }
    let ids = closure_of(topo, id);
    let members: BTreeSet<&ResourceId> = ids.iter().collect();
    let closure: Vec<SnapshotEntry> = ids
        .iter()
        .map(|i| {
            let stored = topo.stored(i).expect("closure ids exist");
            SnapshotEntry {
                seq: stored.seq,
                resource: stored.resource.clone(),
            }
        })
        .collect();
    let mut external = BTreeSet::new();
    for e in &closure {
        for p in parents(&e.resource) {
            if !members.contains(p) {
                external.insert(p.clone());
                // Keep the network id alongside a subnet reference.
                if let Some(net) = topo.subnet(p).map(|s| &s.network_id) {
                    if !members.contains(net) {
                        external.insert(net.clone());
                    }
                }
            }
        }
    }
    Ok(ResourceSnapshot {
        root_kind: kind,
        root_id: id.clone(),
        closure,
        external_refs: external.into_iter().collect(),
        taken_at: now,
    })
}

/// Removes every resource of the snapshot's closure.
pub(crate) fn remove_closure(topo: &mut Topology, snap: &ResourceSnapshot) {
    for id in snap.ids() {
        topo.remove(id);
    }
}

pub(crate) fn replay(topo: &mut Topology, snap: &ResourceSnapshot) -> Result<(), FabricError> {
    if let Some(id) = snap.ids().find(|i| topo.get(i).is_some()) {
        return Err(FabricError::Conflict(id.clone()));
    }
    if let Some(id) = snap.external_refs.iter().find(|i| topo.get(i).is_none()) {
        return Err(FabricError::StaleSnapshot(id.clone()));
    }
    for e in &snap.closure {
        topo.insert(e.seq, e.resource.clone());
    }
    Ok(())
}
