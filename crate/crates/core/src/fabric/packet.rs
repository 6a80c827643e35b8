use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::faultengine::Protocol;
use crate::ids::{ResourceId, TenantId};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketKind {
    Request,
    Response,
    Datagram,
}

/// One simulated datagram. `size()` is always the payload length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub flow_id: u64,
    /// Fabric-wide packet number, assigned on send.
    pub id: u64,
    pub tenant_id: TenantId,
    pub src_port_id: ResourceId,
    pub dst_address: Ipv4Addr,
    pub protocol: Protocol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_port: Option<u16>,
    #[serde(with = "hex::serde")]
    pub payload: Vec<u8>,
    pub sent_at: SimTime,
    pub kind: PacketKind,
    #[serde(default)]
    pub corrupted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<u64>,
}

impl Packet {
    pub fn new(
        tenant_id: TenantId,
        src_port_id: ResourceId,
        dst_address: Ipv4Addr,
        protocol: Protocol,
        service_port: Option<u16>,
        kind: PacketKind,
        payload: Vec<u8>,
    ) -> Self {
        Packet {
            flow_id: 0,
            id: 0,
            tenant_id,
            src_port_id,
            dst_address,
            protocol,
            service_port,
            payload,
            sent_at: SimTime::ZERO,
            kind,
            corrupted: false,
            request_id: None,
        }
    }

    pub fn size(&self) -> usize {
        self.payload.len()
    }

    /// A TCP/80 datagram with the given payload, for transformer tests.
    pub fn test_packet(payload: Vec<u8>) -> Self {
        Packet::new(
            TenantId::from("t"),
            ResourceId::from("p"),
            Ipv4Addr::new(10, 0, 0, 2),
            Protocol::Tcp,
            Some(80),
            PacketKind::Datagram,
            payload,
        )
    }
}

/// Deterministic payload bytes for a given packet number.
pub fn filler_payload(len: usize, salt: u64) -> Vec<u8> {
    (0..len)
        .map(|i| (salt.wrapping_mul(31).wrapping_add(i as u64 * 7) % 251) as u8)
        .collect()
}
