//! The tenant-visible resource graph and its JSON document form.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::resources::*;
use super::FabricError;
use crate::ids::{HostId, ResourceId, TenantId};

/// On-disk topology description. Arrays appear in creation order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopologyDocument {
    #[serde(default)]
    pub hosts: Vec<Host>,
    #[serde(default)]
    pub tenants: Vec<Tenant>,
    #[serde(default)]
    pub networks: Vec<Network>,
    #[serde(default)]
    pub subnets: Vec<Subnet>,
    #[serde(default)]
    pub routers: Vec<Router>,
    #[serde(default)]
    pub ports: Vec<Port>,
    #[serde(default)]
    pub floating_ips: Vec<FloatingIp>,
    #[serde(default)]
    pub balancers: Vec<Balancer>,
}

impl TopologyDocument {
    pub fn from_json(text: &str) -> Result<Self, FabricError> {
        serde_json::from_str(text).map_err(|e| FabricError::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology document serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Stored {
    pub seq: u64,
    pub resource: Resource,
}

/// Validated resource graph. Every resource carries a creation sequence
/// number; iteration, closures and serialization all follow it.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    hosts: Vec<Host>,
    tenants: Vec<Tenant>,
    resources: BTreeMap<ResourceId, Stored>,
    order: BTreeMap<u64, ResourceId>,
    next_seq: u64,
}

fn invalid(msg: impl Into<String>) -> FabricError {
    FabricError::Validation(msg.into())
}

impl Topology {
    pub fn from_document(doc: TopologyDocument) -> Result<Self, FabricError> {
        let mut topo = Topology {
            hosts: doc.hosts,
            tenants: doc.tenants,
            resources: BTreeMap::new(),
            order: BTreeMap::new(),
            next_seq: 0,
        };
        let all = doc
            .networks
            .into_iter()
            .map(Resource::Network)
            .chain(doc.subnets.into_iter().map(Resource::Subnet))
            .chain(doc.routers.into_iter().map(Resource::Router))
            .chain(doc.ports.into_iter().map(Resource::Port))
            .chain(doc.floating_ips.into_iter().map(Resource::FloatingIp))
            .chain(doc.balancers.into_iter().map(Resource::Balancer));
        for r in all {
            if topo.resources.contains_key(r.id()) {
                return Err(invalid(format!("duplicate resource id `{}`", r.id())));
            }
            let seq = topo.next_seq;
            topo.insert(seq, r);
        }
        topo.validate()?;
        Ok(topo)
    }

    pub fn to_document(&self) -> TopologyDocument {
        let mut doc = TopologyDocument {
            hosts: self.hosts.clone(),
            tenants: self.tenants.clone(),
            ..Default::default()
        };
        for r in self.iter() {
            match r.clone() {
                Resource::Network(x) => doc.networks.push(x),
                Resource::Subnet(x) => doc.subnets.push(x),
                Resource::Router(x) => doc.routers.push(x),
                Resource::Port(x) => doc.ports.push(x),
                Resource::FloatingIp(x) => doc.floating_ips.push(x),
                Resource::Balancer(x) => doc.balancers.push(x),
            }
        }
        doc
    }

    pub(crate) fn insert(&mut self, seq: u64, resource: Resource) {
        let id = resource.id().clone();
        self.order.insert(seq, id.clone());
        self.resources.insert(id, Stored { seq, resource });
        self.next_seq = self.next_seq.max(seq + 1);
    }

    pub(crate) fn remove(&mut self, id: &ResourceId) -> Option<Stored> {
        let stored = self.resources.remove(id)?;
        self.order.remove(&stored.seq);
        Some(stored)
    }

    pub(crate) fn stored(&self, id: &ResourceId) -> Option<&Stored> {
        self.resources.get(id)
    }

    /// All resources in creation order.
    pub fn iter(&self) -> impl Iterator<Item = &Resource> + '_ {
        self.order.values().map(move |id| &self.resources[id].resource)
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    pub fn hosts(&self) -> &[Host] {
        &self.hosts
    }

    pub fn host(&self, id: &HostId) -> Option<&Host> {
        self.hosts.iter().find(|h| &h.id == id)
    }

    pub fn tenants(&self) -> &[Tenant] {
        &self.tenants
    }

    pub fn tenant(&self, id: &TenantId) -> Option<&Tenant> {
        self.tenants.iter().find(|t| &t.id == id)
    }

    pub fn get(&self, id: &ResourceId) -> Option<&Resource> {
        self.resources.get(id).map(|s| &s.resource)
    }

    pub fn seq_of(&self, id: &ResourceId) -> Option<u64> {
        self.resources.get(id).map(|s| s.seq)
    }

    pub fn get_kind(&self, kind: ResourceKind, id: &ResourceId) -> Option<&Resource> {
        self.get(id).filter(|r| r.kind() == kind)
    }

    pub fn contains(&self, kind: ResourceKind, id: &ResourceId) -> bool {
        self.get_kind(kind, id).is_some()
    }

    pub fn network(&self, id: &ResourceId) -> Option<&Network> {
        match self.get(id)? {
            Resource::Network(n) => Some(n),
            _ => None,
        }
    }

    pub fn subnet(&self, id: &ResourceId) -> Option<&Subnet> {
        match self.get(id)? {
            Resource::Subnet(s) => Some(s),
            _ => None,
        }
    }

    pub fn router(&self, id: &ResourceId) -> Option<&Router> {
        match self.get(id)? {
            Resource::Router(r) => Some(r),
            _ => None,
        }
    }

    pub fn port(&self, id: &ResourceId) -> Option<&Port> {
        match self.get(id)? {
            Resource::Port(p) => Some(p),
            _ => None,
        }
    }

    pub fn floating_ip(&self, id: &ResourceId) -> Option<&FloatingIp> {
        match self.get(id)? {
            Resource::FloatingIp(f) => Some(f),
            _ => None,
        }
    }

    pub fn balancer(&self, id: &ResourceId) -> Option<&Balancer> {
        match self.get(id)? {
            Resource::Balancer(b) => Some(b),
            _ => None,
        }
    }

    pub fn networks(&self) -> impl Iterator<Item = &Network> + '_ {
        self.iter().filter_map(|r| match r {
            Resource::Network(n) => Some(n),
            _ => None,
        })
    }

    pub fn subnets(&self) -> impl Iterator<Item = &Subnet> + '_ {
        self.iter().filter_map(|r| match r {
            Resource::Subnet(s) => Some(s),
            _ => None,
        })
    }

    pub fn routers(&self) -> impl Iterator<Item = &Router> + '_ {
        self.iter().filter_map(|r| match r {
            Resource::Router(x) => Some(x),
            _ => None,
        })
    }

    pub fn ports(&self) -> impl Iterator<Item = &Port> + '_ {
        self.iter().filter_map(|r| match r {
            Resource::Port(p) => Some(p),
            _ => None,
        })
    }

    pub fn floating_ips(&self) -> impl Iterator<Item = &FloatingIp> + '_ {
        self.iter().filter_map(|r| match r {
            Resource::FloatingIp(f) => Some(f),
            _ => None,
        })
    }

    pub fn balancers(&self) -> impl Iterator<Item = &Balancer> + '_ {
        self.iter().filter_map(|r| match r {
            Resource::Balancer(b) => Some(b),
            _ => None,
        })
    }

    pub fn subnets_of<'a>(&'a self, network: &'a ResourceId) -> impl Iterator<Item = &'a Subnet> + 'a {
        self.subnets().filter(move |s| &s.network_id == network)
    }

    pub fn ports_of<'a>(&'a self, subnet: &'a ResourceId) -> impl Iterator<Item = &'a Port> + 'a {
        self.ports().filter(move |p| &p.subnet_id == subnet)
    }

    /// Floating IPs mapped onto a port.
    pub fn floating_ips_of<'a>(&'a self, port: &'a ResourceId) -> impl Iterator<Item = &'a FloatingIp> + 'a {
        self.floating_ips().filter(move |f| &f.attached_port_id == port)
    }

    /// The `network:floatingip` port backing a floating IP (same address).
    pub fn floating_ip_port(&self, fip: &FloatingIp) -> Option<&Port> {
        self.ports()
            .find(|p| p.device_owner == DeviceOwner::FloatingIpPort && p.address == fip.address)
    }

    /// The floating IP a `network:floatingip` port backs.
    pub fn floating_ip_of_port(&self, port: &Port) -> Option<&FloatingIp> {
        if port.device_owner != DeviceOwner::FloatingIpPort {
            return None;
        }
        self.floating_ips().find(|f| f.address == port.address)
    }

    pub fn network_of_subnet(&self, subnet: &ResourceId) -> Option<&Network> {
        self.network(&self.subnet(subnet)?.network_id)
    }

    pub fn is_external_subnet(&self, subnet: &ResourceId) -> bool {
        self.network_of_subnet(subnet).is_some_and(|n| n.is_external)
    }

    /// Owning tenant of any resource.
    pub fn owner(&self, id: &ResourceId) -> Option<&TenantId> {
        match self.get(id)? {
            Resource::Network(n) => Some(&n.tenant_id),
            Resource::Subnet(s) => self.network(&s.network_id).map(|n| &n.tenant_id),
            Resource::Router(r) => Some(&r.tenant_id),
            Resource::Port(p) => Some(&p.tenant_id),
            Resource::FloatingIp(f) => Some(&f.tenant_id),
            Resource::Balancer(b) => Some(&b.tenant_id),
        }
    }

    /// Compute port or balancer answering at `address` inside `subnet`.
    pub fn endpoint_in_subnet(&self, subnet: &ResourceId, address: Ipv4Addr) -> Option<&Resource> {
        self.iter().find(|r| match r {
            Resource::Port(p) => {
                &p.subnet_id == subnet && p.address == address && p.device_owner == DeviceOwner::ComputeNova
            }
            Resource::Balancer(b) => &b.subnet_id == subnet && b.address == address,
            _ => false,
        })
    }

    pub fn floating_ip_by_address(&self, address: Ipv4Addr) -> Option<&FloatingIp> {
        self.floating_ips().find(|f| f.address == address)
    }

    fn validate(&self) -> Result<(), FabricError> {
        let mut host_ids = BTreeSet::new();
        for h in &self.hosts {
            if !host_ids.insert(&h.id) {
                return Err(invalid(format!("duplicate host `{}`", h.id)));
            }
        }
        let count = |role| self.hosts.iter().filter(|h| h.role == role).count();
        if count(HostRole::Controller) != 1 {
            return Err(invalid("fabric needs exactly one controller host"));
        }
        if count(HostRole::Network) == 0 {
            return Err(invalid("fabric needs at least one network host"));
        }
        if count(HostRole::Compute) == 0 {
            return Err(invalid("fabric needs at least one compute host"));
        }
        let mut tenant_ids = BTreeSet::new();
        for t in &self.tenants {
            if !tenant_ids.insert(&t.id) {
                return Err(invalid(format!("duplicate tenant `{}`", t.id)));
            }
        }
        let need_tenant = |t: &TenantId, what: &ResourceId| {
            if tenant_ids.contains(t) {
                Ok(())
            } else {
                Err(invalid(format!("`{what}` references unknown tenant `{t}`")))
            }
        };

        for n in self.networks() {
            need_tenant(&n.tenant_id, &n.id)?;
        }
        let subnets: Vec<&Subnet> = self.subnets().collect();
        for (i, s) in subnets.iter().enumerate() {
            if self.network(&s.network_id).is_none() {
                return Err(invalid(format!(
                    "subnet `{}` references unknown network `{}`",
                    s.id, s.network_id
                )));
            }
            for other in &subnets[..i] {
                if other.network_id == s.network_id
                    && (other.cidr.contains(&s.cidr.network()) || s.cidr.contains(&other.cidr.network()))
                {
                    return Err(invalid(format!(
                        "subnets `{}` and `{}` overlap within network `{}`",
                        other.id, s.id, s.network_id
                    )));
                }
            }
        }

        let mut addresses: BTreeMap<(ResourceId, Ipv4Addr), ResourceId> = BTreeMap::new();
        let mut claim = |subnet: &ResourceId, addr: Ipv4Addr, id: &ResourceId| -> Result<(), FabricError> {
            let s = self
                .subnet(subnet)
                .ok_or_else(|| invalid(format!("`{id}` references unknown subnet `{subnet}`")))?;
            if !s.cidr.contains(&addr) {
                return Err(invalid(format!("address {addr} of `{id}` is outside {}", s.cidr)));
            }
            if let Some(prev) = addresses.insert((subnet.clone(), addr), id.clone()) {
                return Err(invalid(format!("address {addr} used by both `{prev}` and `{id}`")));
            }
            Ok(())
        };

        for p in self.ports() {
            need_tenant(&p.tenant_id, &p.id)?;
            let host = self
                .host(&p.host_id)
                .ok_or_else(|| invalid(format!("port `{}` references unknown host `{}`", p.id, p.host_id)))?;
            if host.role != p.device_owner.host_role() {
                return Err(invalid(format!(
                    "port `{}` ({}) cannot live on {:?} host `{}`",
                    p.id,
                    p.device_owner.as_str(),
                    host.role,
                    host.id
                )));
            }
            claim(&p.subnet_id, p.address, &p.id)?;
            let net = self.network_of_subnet(&p.subnet_id).expect("subnet checked");
            if !net.is_external && net.tenant_id != p.tenant_id {
                return Err(invalid(format!(
                    "port `{}` of tenant `{}` sits on private network `{}` of tenant `{}`",
                    p.id, p.tenant_id, net.id, net.tenant_id
                )));
            }
            if matches!(p.device_owner, DeviceOwner::RouterGateway | DeviceOwner::FloatingIpPort) && !net.is_external {
                return Err(invalid(format!("port `{}` must be on an external network", p.id)));
            }
        }
        for b in self.balancers() {
            need_tenant(&b.tenant_id, &b.id)?;
            claim(&b.subnet_id, b.address, &b.id)?;
            if b.backend_port_ids.is_empty() {
                return Err(invalid(format!("balancer `{}` has no backends", b.id)));
            }
            for bp in &b.backend_port_ids {
                match self.port(bp) {
                    Some(p) if p.device_owner == DeviceOwner::ComputeNova => {}
                    _ => {
                        return Err(invalid(format!(
                            "balancer `{}` backend `{bp}` is not a compute port",
                            b.id
                        )))
                    }
                }
            }
        }

        let mut router_ports = BTreeSet::new();
        for r in self.routers() {
            need_tenant(&r.tenant_id, &r.id)?;
            for ip in &r.interface_port_ids {
                match self.port(ip) {
                    Some(p) if p.device_owner == DeviceOwner::RouterInterface => {}
                    Some(_) => {
                        return Err(invalid(format!(
                            "router `{}` interface `{ip}` is not a router_interface port",
                            r.id
                        )))
                    }
                    None => return Err(invalid(format!("router `{}` references unknown port `{ip}`", r.id))),
                }
                if !router_ports.insert(ip) {
                    return Err(invalid(format!("port `{ip}` attached to more than one router")));
                }
            }
            if let Some(gw) = &r.gateway_port_id {
                match self.port(gw) {
                    Some(p) if p.device_owner == DeviceOwner::RouterGateway => {}
                    Some(_) => {
                        return Err(invalid(format!(
                            "router `{}` gateway `{gw}` is not a router_gateway port",
                            r.id
                        )))
                    }
                    None => return Err(invalid(format!("router `{}` references unknown port `{gw}`", r.id))),
                }
                if !router_ports.insert(gw) {
                    return Err(invalid(format!("port `{gw}` attached to more than one router")));
                }
            }
        }

        for f in self.floating_ips() {
            need_tenant(&f.tenant_id, &f.id)?;
            match self.port(&f.attached_port_id) {
                Some(p) if p.device_owner == DeviceOwner::ComputeNova => {}
                _ => {
                    return Err(invalid(format!(
                        "floating ip `{}` must attach to a compute port, got `{}`",
                        f.id, f.attached_port_id
                    )))
                }
            }
            let backing: Vec<_> = self
                .ports()
                .filter(|p| p.device_owner == DeviceOwner::FloatingIpPort && p.address == f.address)
                .collect();
            if backing.len() != 1 {
                return Err(invalid(format!(
                    "floating ip `{}` needs exactly one network:floatingip port at {}",
                    f.id, f.address
                )));
            }
        }
        Ok(())
    }
}
