#![allow(dead_code)]

use std::net::Ipv4Addr;

use faultfabric::fabric::resources::{
    DeviceOwner, FloatingIp, Host, HostRole, Network, Port, ResourceKind, Router, Subnet, Tenant,
};
use faultfabric::fabric::TopologyDocument;
use faultfabric::ids::{HostId, ResourceId, TenantId};
use faultfabric::rng::DetRng;

fn host(id: &str, role: HostRole) -> Host {
    Host {
        id: id.into(),
        role,
        link_latency_ms: None,
    }
}

fn port(id: String, tenant: &TenantId, owner: DeviceOwner, host: &str, subnet: &ResourceId, addr: Ipv4Addr) -> Port {
    Port {
        id: id.into(),
        tenant_id: tenant.clone(),
        device_owner: owner,
        host_id: host.into(),
        subnet_id: subnet.clone(),
        address: addr,
        device_id: None,
    }
}

/// A valid random fabric with at most `max_ports` ports.
pub fn random_document(rng: &mut DetRng, max_ports: usize) -> TopologyDocument {
    let computes = ["compute-1", "compute-2", "compute-3"];
    let mut doc = TopologyDocument {
        hosts: vec![
            host("controller-1", HostRole::Controller),
            host("network-1", HostRole::Network),
        ],
        tenants: vec![Tenant {
            id: "admin".into(),
            name: "admin".into(),
        }],
        ..TopologyDocument::default()
    };
    for c in computes {
        doc.hosts.push(host(c, HostRole::Compute));
    }
    let tenants: Vec<TenantId> = (1..=3).map(|i| TenantId::new(format!("t{i}"))).collect();
    for t in &tenants {
        doc.tenants.push(Tenant {
            id: t.clone(),
            name: t.to_string(),
        });
    }
    doc.networks.push(Network {
        id: "ext".into(),
        tenant_id: "admin".into(),
        name: "public".into(),
        is_external: true,
    });
    let ext_subnet = ResourceId::from("ext-s");
    doc.subnets.push(Subnet {
        id: ext_subnet.clone(),
        network_id: "ext".into(),
        cidr: "203.0.113.0/24".parse().unwrap(),
    });
    let mut ext_host = 2u8;
    let mut next_ext = || {
        ext_host += 1;
        Ipv4Addr::new(203, 0, 113, ext_host)
    };

    let mut budget = max_ports;
    let mut subnets_of: Vec<(TenantId, ResourceId)> = Vec::new();
    let mut compute_ports: Vec<(TenantId, ResourceId)> = Vec::new();
    let nets = 1 + rng.below(4) as usize;
    for n in 0..nets {
        let tenant = tenants[rng.below(tenants.len() as u64) as usize].clone();
        let net_id = ResourceId::new(format!("net{n}"));
        doc.networks.push(Network {
            id: net_id.clone(),
            tenant_id: tenant.clone(),
            name: format!("net{n}"),
            is_external: false,
        });
        for s in 0..1 + rng.below(2) {
            let sid = ResourceId::new(format!("net{n}-s{s}"));
            doc.subnets.push(Subnet {
                id: sid.clone(),
                network_id: net_id.clone(),
                cidr: format!("10.{n}.{s}.0/24").parse().unwrap(),
            });
            subnets_of.push((tenant.clone(), sid.clone()));
            let count = (rng.below(6) as usize).min(budget);
            budget -= count;
            for p in 0..count {
                let pid = format!("net{n}-s{s}-vm{p}");
                let h = computes[rng.below(3) as usize];
                doc.ports.push(port(
                    pid.clone(),
                    &tenant,
                    DeviceOwner::ComputeNova,
                    h,
                    &sid,
                    Ipv4Addr::new(10, n as u8, s as u8, 10 + p as u8),
                ));
                compute_ports.push((tenant.clone(), pid.into()));
            }
        }
    }

    for (r, tenant) in tenants.iter().enumerate() {
        let own: Vec<&ResourceId> = subnets_of.iter().filter(|(t, _)| t == tenant).map(|(_, s)| s).collect();
        if own.is_empty() || rng.below(3) == 0 || budget == 0 {
            continue;
        }
        let rid = ResourceId::new(format!("router{r}"));
        let mut router = Router {
            id: rid.clone(),
            tenant_id: tenant.clone(),
            interface_port_ids: Vec::new(),
            gateway_port_id: None,
        };
        for (i, s) in own.iter().enumerate() {
            if budget == 0 || rng.below(2) == 0 {
                continue;
            }
            budget -= 1;
            let pid = format!("{rid}-if{i}");
            let sub = doc.subnets.iter().find(|x| &&x.id == s).unwrap();
            let base = sub.cidr.network().octets();
            doc.ports.push(port(
                pid.clone(),
                tenant,
                DeviceOwner::RouterInterface,
                "network-1",
                s,
                Ipv4Addr::new(base[0], base[1], base[2], 1),
            ));
            router.interface_port_ids.push(pid.into());
        }
        if budget > 0 && rng.below(2) == 0 {
            budget -= 1;
            let pid = format!("{rid}-gw");
            doc.ports.push(port(
                pid.clone(),
                tenant,
                DeviceOwner::RouterGateway,
                "network-1",
                &ext_subnet,
                next_ext(),
            ));
            router.gateway_port_id = Some(pid.into());
        }
        doc.routers.push(router);
    }

    for (i, (tenant, target)) in compute_ports.iter().enumerate() {
        if budget == 0 || rng.below(4) != 0 {
            continue;
        }
        budget -= 1;
        let addr = next_ext();
        let pid = format!("fip{i}-port");
        doc.ports.push(port(
            pid,
            tenant,
            DeviceOwner::FloatingIpPort,
            "network-1",
            &ext_subnet,
            addr,
        ));
        doc.floating_ips.push(FloatingIp {
            id: ResourceId::new(format!("fip{i}")),
            tenant_id: tenant.clone(),
            address: addr,
            attached_port_id: target.clone(),
        });
    }
    doc
}

fn prefix(owner: &str) -> &'static str {
    match owner {
        "compute:nova" => "tap",
        "network:router_interface" => "qr",
        "network:router_gateway" => "qg",
        "network:floatingip" => "fip",
        other => panic!("unexpected owner {other}"),
    }
}

/// Items behind a resource, recomputed by scanning the document's ports in
/// order. Returns `(item id, host)` pairs.
pub fn oracle_items(doc: &TopologyDocument, kind: ResourceKind, id: &ResourceId) -> Vec<(String, HostId)> {
    let network_of = |subnet: &ResourceId| {
        doc.subnets
            .iter()
            .find(|s| &s.id == subnet)
            .map(|s| s.network_id.clone())
    };
    let selected = |p: &Port| -> bool {
        match kind {
            ResourceKind::Port => &p.id == id,
            ResourceKind::Subnet => &p.subnet_id == id,
            ResourceKind::Network => network_of(&p.subnet_id).as_ref() == Some(id),
            ResourceKind::Router => doc
                .routers
                .iter()
                .filter(|r| &r.id == id)
                .any(|r| r.interface_port_ids.contains(&p.id) || r.gateway_port_id.as_ref() == Some(&p.id)),
            ResourceKind::FloatingIp => doc
                .floating_ips
                .iter()
                .filter(|f| &f.id == id)
                .any(|f| p.device_owner.as_str() == "network:floatingip" && p.address == f.address),
            ResourceKind::Balancer => false,
        }
    };
    doc.ports
        .iter()
        .filter(|p| selected(p))
        .map(|p| {
            (
                format!("{}-{}", prefix(p.device_owner.as_str()), p.id),
                p.host_id.clone(),
            )
        })
        .collect()
}

/// Every (kind, id) of an injectable resource in the document.
pub fn injectable(doc: &TopologyDocument) -> Vec<(ResourceKind, ResourceId)> {
    let mut out = Vec::new();
    out.extend(doc.networks.iter().map(|r| (ResourceKind::Network, r.id.clone())));
    out.extend(doc.subnets.iter().map(|r| (ResourceKind::Subnet, r.id.clone())));
    out.extend(doc.routers.iter().map(|r| (ResourceKind::Router, r.id.clone())));
    out.extend(doc.ports.iter().map(|r| (ResourceKind::Port, r.id.clone())));
    out.extend(
        doc.floating_ips
            .iter()
            .map(|r| (ResourceKind::FloatingIp, r.id.clone())),
    );
    out
}
