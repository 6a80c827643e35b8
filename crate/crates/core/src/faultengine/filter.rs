use super::ProtocolFilter;
use crate::fabric::Packet;

/// No filter matches everything; otherwise the protocol must match and, when
/// the filter names a service port, the destination port must match too.
pub fn matches_filter(packet: &Packet, filter: Option<&ProtocolFilter>) -> bool {
    match filter {
        None => true,
        Some(f) => f.protocol == packet.protocol && f.service_port.is_none_or(|p| packet.service_port == Some(p)),
    }
}
