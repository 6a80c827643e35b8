//! Topology documents shipped with the crate.

use crate::fabric::TopologyDocument;

/// One tenant, two VMs on one subnet, a router with a gateway and a
/// floating IP reachable from an external client.
pub const MINIMAL: &str = include_str!("../fixtures/minimal.json");
/// IMS-style layout: two private segments plus a service network, joined by
/// `cw_router`, `cw_router_2` and `cw_router_service`.
pub const IMS: &str = include_str!("../fixtures/ims.json");
/// Front subnet with a round-robin balancer over web servers on two
/// segments, plus a data subnet.
pub const THREE_TIER: &str = include_str!("../fixtures/three_tier.json");
/// Two tenants using the same private range on shared hosts.
pub const TWO_TENANTS: &str = include_str!("../fixtures/two_tenants.json");

pub const ALL: [(&str, &str); 4] = [
    ("minimal", MINIMAL),
    ("ims", IMS),
    ("three_tier", THREE_TIER),
    ("two_tenants", TWO_TENANTS),
];

fn parse(text: &str) -> TopologyDocument {
    TopologyDocument::from_json(text).expect("bundled fixture parses")
}

pub fn minimal_document() -> TopologyDocument {
    parse(MINIMAL)
}

pub fn ims_document() -> TopologyDocument {
    parse(IMS)
}

pub fn three_tier_document() -> TopologyDocument {
    parse(THREE_TIER)
}

pub fn two_tenants_document() -> TopologyDocument {
    parse(TWO_TENANTS)
}

/// Looks a fixture up by name.
pub fn by_name(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
