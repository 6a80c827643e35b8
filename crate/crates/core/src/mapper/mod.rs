//! Resource to injection-item mapping and tenant topology views.

mod graph;

pub use graph::{get_network_topology, EdgeRelation, GraphEdge, GraphNode, GraphPort, TopologyGraph};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fabric::resources::{DeviceOwner, Port, Resource, ResourceKind};
use crate::fabric::Topology;
use crate::ids::{HostId, ItemId, ResourceId, TenantId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    TapDevice,
    RouterInternalIf,
    RouterExternalIf,
    FloatingIpIf,
}

impl ItemKind {
    pub fn for_owner(owner: DeviceOwner) -> Self {
        match owner {
            DeviceOwner::ComputeNova => ItemKind::TapDevice,
            DeviceOwner::RouterInterface => ItemKind::RouterInternalIf,
            DeviceOwner::RouterGateway => ItemKind::RouterExternalIf,
            DeviceOwner::FloatingIpPort => ItemKind::FloatingIpIf,
        }
    }

    /// Cosmetic interface-name prefix.
    pub fn prefix(self) -> &'static str {
        match self {
            ItemKind::TapDevice => "tap",
            ItemKind::RouterInternalIf => "qr",
            ItemKind::RouterExternalIf => "qg",
            ItemKind::FloatingIpIf => "fip",
        }
    }
}

/// A host-level interface faults are applied to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionItem {
    pub id: ItemId,
    pub location: HostId,
    pub kind: ItemKind,
    pub port_id: ResourceId,
    pub tenant_id: TenantId,
}

/// Item ids derive from port ids, so a restored port gets its old item back.
pub fn item_id_for(port: &Port) -> ItemId {
    ItemId::new(format!(
        "{}-{}",
        ItemKind::for_owner(port.device_owner).prefix(),
        port.id
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("no {kind} `{id}` in the item map")]
    NotFound { kind: ResourceKind, id: ResourceId },
    #[error("unknown tenant `{0}`")]
    UnknownTenant(TenantId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ItemMap {
    items: BTreeMap<ItemId, InjectionItem>,
    resources: BTreeMap<ResourceId, (ResourceKind, Vec<ItemId>)>,
}

impl ItemMap {
    pub fn item(&self, id: &ItemId) -> Option<&InjectionItem> {
        self.items.get(id)
    }

    pub fn items(&self) -> impl Iterator<Item = &InjectionItem> + '_ {
        self.items.values()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains_resource(&self, id: &ResourceId) -> bool {
        self.resources.contains_key(id)
    }

    pub fn item_ids(&self, kind: ResourceKind, id: &ResourceId) -> Result<&[ItemId], MapError> {
        match self.resources.get(id) {
            Some((k, ids)) if *k == kind => Ok(ids),
            _ => Err(MapError::NotFound { kind, id: id.clone() }),
        }
    }
}

pub fn build_item_map(topo: &Topology) -> ItemMap {
    let mut map = ItemMap::default();
    let mut port_item = BTreeMap::new();
    for port in topo.ports() {
        let item = InjectionItem {
            id: item_id_for(port),
            location: port.host_id.clone(),
            kind: ItemKind::for_owner(port.device_owner),
            port_id: port.id.clone(),
            tenant_id: port.tenant_id.clone(),
        };
        port_item.insert(port.id.clone(), item.id.clone());
        map.items.insert(item.id.clone(), item);
    }
    let by_seq = |mut ports: Vec<&ResourceId>| -> Vec<ItemId> {
        ports.sort_by_key(|p| topo.seq_of(p));
        ports.dedup();
        ports.into_iter().filter_map(|p| port_item.get(p).cloned()).collect()
    };
    for r in topo.iter() {
        let items = match r {
            Resource::Port(p) => by_seq(vec![&p.id]),
            Resource::Subnet(s) => by_seq(topo.ports_of(&s.id).map(|p| &p.id).collect()),
            Resource::Network(n) => by_seq(
                topo.subnets_of(&n.id)
                    .flat_map(|s| topo.ports_of(&s.id))
                    .map(|p| &p.id)
                    .collect(),
            ),
            Resource::Router(rt) => by_seq(rt.interface_port_ids.iter().chain(rt.gateway_port_id.iter()).collect()),
            Resource::FloatingIp(f) => by_seq(topo.floating_ip_port(f).map(|p| &p.id).into_iter().collect()),
            Resource::Balancer(_) => continue,
        };
        map.resources.insert(r.id().clone(), (r.kind(), items));
    }
    map
}

/// Items behind a resource, in creation order of their ports.
pub fn resolve_items(map: &ItemMap, kind: ResourceKind, id: &ResourceId) -> Result<Vec<InjectionItem>, MapError> {
    Ok(map.item_ids(kind, id)?.iter().map(|i| map.items[i].clone()).collect())
}
