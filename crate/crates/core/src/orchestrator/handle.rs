use serde::{Deserialize, Serialize};

use crate::fabric::resources::ResourceKind;
use crate::faultengine::{FaultSpec, Timing};
use crate::ids::{HostId, ItemId, ResourceId, TenantId};
use crate::time::SimTime;

pub type HandleId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionPhase {
    PreInjection,
    Injecting,
    PostInjection,
    Completed,
    Aborted,
}

impl InjectionPhase {
    pub fn is_terminal(self) -> bool {
        matches!(self, InjectionPhase::Completed | InjectionPhase::Aborted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStamp {
    pub phase: InjectionPhase,
    #[serde(with = "crate::time::serde_ms")]
    pub at: SimTime,
}

/// What a handle does during its injection phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fault", rename_all = "snake_case")]
pub enum HandleFault {
    /// Packet-level fault applied at the resource's items.
    Traffic { spec: FaultSpec },
    /// Delete of the resource and its dependents, restored afterwards.
    Config { outage_ms: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionHandle {
    pub id: HandleId,
    pub tenant_id: TenantId,
    pub resource_kind: ResourceKind,
    pub resource_id: ResourceId,
    #[serde(flatten)]
    pub fault: HandleFault,
    pub timing: Timing,
    /// Items the fault is applied to. For configuration faults, the items
    /// removed by the delete.
    pub items: Vec<ItemId>,
    pub phase: InjectionPhase,
    /// One stamp per phase entered, in order.
    pub history: Vec<PhaseStamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl InjectionHandle {
    pub(crate) fn new(
        id: HandleId,
        tenant_id: TenantId,
        kind: ResourceKind,
        resource_id: ResourceId,
        fault: HandleFault,
        timing: Timing,
        items: Vec<ItemId>,
        start: SimTime,
    ) -> Self {
        InjectionHandle {
            id,
            tenant_id,
            resource_kind: kind,
            resource_id,
            fault,
            timing,
            items,
            phase: InjectionPhase::PreInjection,
            history: vec![PhaseStamp {
                phase: InjectionPhase::PreInjection,
                at: start,
            }],
            error: None,
        }
    }

    pub fn start(&self) -> SimTime {
        self.history[0].at
    }

    /// Scheduled start of the injection phase.
    pub fn inject_at(&self) -> SimTime {
        self.start().plus_ms(self.timing.pre_ms)
    }

    /// Scheduled end of the injection phase.
    pub fn clear_at(&self) -> SimTime {
        self.inject_at().plus_ms(self.timing.inject_ms)
    }

    pub fn end_at(&self) -> SimTime {
        self.clear_at().plus_ms(self.timing.post_ms)
    }

    pub fn entered(&self, phase: InjectionPhase) -> Option<SimTime> {
        self.history.iter().find(|s| s.phase == phase).map(|s| s.at)
    }

    /// Moves forward to `phase`; backward or repeated moves are ignored.
    pub(crate) fn advance(&mut self, phase: InjectionPhase, at: SimTime) -> bool {
        if self.phase.is_terminal() || phase <= self.phase {
            return false;
        }
        self.phase = phase;
        self.history.push(PhaseStamp { phase, at });
        true
    }

    pub(crate) fn abort(&mut self, at: SimTime, error: Option<String>) {
        if self.advance(InjectionPhase::Aborted, at) && self.error.is_none() {
            self.error = error;
        }
    }
}

/// Handle plus the placement of its items, fixed at creation.
#[derive(Debug, Clone)]
pub(crate) struct HandleEntry {
    pub handle: InjectionHandle,
    pub placements: Vec<(ItemId, HostId)>,
}
