use serde::{Deserialize, Serialize};

use crate::ids::TenantId;
use crate::time::{serde_ms, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowEventKind {
    Sent,
    Delivered,
    Dropped,
    /// Destination or path vanished (e.g. a deleted resource).
    Unreachable,
    Corrupted,
    Duplicated,
    TimedOut,
}

impl FlowEventKind {
    /// Ends a unit (datagram or transaction) without success.
    pub fn is_failure(self) -> bool {
        matches!(
            self,
            FlowEventKind::Dropped | FlowEventKind::Unreachable | FlowEventKind::Corrupted | FlowEventKind::TimedOut
        )
    }

    pub fn is_terminal(self) -> bool {
        self == FlowEventKind::Delivered || self.is_failure()
    }
}

/// One line of a workload's event log. A unit is a datagram or a
/// request/response transaction, keyed by `(flow_id, request_id)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEvent {
    pub kind: FlowEventKind,
    #[serde(with = "serde_ms")]
    pub t: SimTime,
    pub tenant_id: TenantId,
    pub flow_id: u64,
    pub request_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet_id: Option<u64>,
    #[serde(with = "serde_ms")]
    pub sent_at: SimTime,
    #[serde(default, with = "serde_ms::option", skip_serializing_if = "Option::is_none")]
    pub first_byte_t: Option<SimTime>,
    #[serde(default, with = "serde_ms::option", skip_serializing_if = "Option::is_none")]
    pub last_byte_t: Option<SimTime>,
}

impl FlowEvent {
    pub fn unit(&self) -> (u64, u64) {
        (self.flow_id, self.request_id)
    }
}
