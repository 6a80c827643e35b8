use serde::{Deserialize, Serialize};

use crate::fabric::resources::ResourceKind;
use crate::fabric::AppId;
use crate::faultengine::{FaultSpec, Timing};
use crate::ids::{ResourceId, TenantId};
use crate::time::SimTime;
use crate::workload::{FlowEvent, MetricsSummary, WorkloadConfig};

use super::handle::{HandleId, InjectionPhase};
use super::report::CaseReport;

pub type CampaignId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub kind: ResourceKind,
    pub id: ResourceId,
}

/// Controlled delete of a resource, restored after `outage_ms`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigFault {
    pub kind: ResourceKind,
    pub id: ResourceId,
    pub outage_ms: u64,
    #[serde(default)]
    pub pre_ms: u64,
    #[serde(default)]
    pub post_ms: u64,
}

impl ConfigFault {
    pub fn timing(&self) -> Timing {
        Timing {
            pre_ms: self.pre_ms,
            inject_ms: self.outage_ms,
            post_ms: self.post_ms,
        }
    }
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    /// Injection target of `spec`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<FaultSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_fault: Option<ConfigFault>,
    pub workload: WorkloadConfig,
    #[serde(default = "one")]
    pub repetitions: u32,
    /// Index of the repetition the injection starts in. Defaults to the
    /// midpoint; earlier repetitions run fault-free.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject_at_repetition: Option<u32>,
    /// Length of one repetition. Defaults to the fault's total timing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition_ms: Option<u64>,
}

impl TestCase {
    /// Phase durations of the fault, relative to the injection trigger.
    pub fn timing(&self) -> Option<Timing> {
        match (&self.spec, &self.config_fault) {
            (Some(s), None) => Some(s.timing),
            (None, Some(c)) => Some(c.timing()),
            _ => None,
        }
    }

    pub fn trigger_repetition(&self) -> u32 {
        self.inject_at_repetition.unwrap_or(self.repetitions / 2)
    }

    pub fn repetition_ms(&self) -> u64 {
        self.repetition_ms
            .unwrap_or_else(|| self.timing().map_or(0, |t| t.total_ms()))
    }

    /// Offset of the injection trigger from the case start.
    pub fn trigger_offset_ms(&self) -> u64 {
        u64::from(self.trigger_repetition()) * self.repetition_ms()
    }

    /// Long enough for every repetition and the whole fault timeline.
    pub fn duration_ms(&self) -> u64 {
        let reps = u64::from(self.repetitions) * self.repetition_ms();
        let fault = self.trigger_offset_ms() + self.timing().map_or(0, |t| t.total_ms());
        reps.max(fault)
    }

    pub fn target_kind_id(&self) -> Option<(ResourceKind, &ResourceId)> {
        match (&self.target, &self.config_fault) {
            (Some(t), None) => Some((t.kind, &t.id)),
            (None, Some(c)) => Some((c.kind, &c.id)),
            _ => None,
        }
    }
}

/// A fault injection test plan.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    /// Runs the first case's workload fault-free before the others.
    #[serde(default)]
    pub baseline: bool,
    #[serde(default)]
    pub cases: Vec<TestCase>,
}

/// Body of a campaign start request and the CLI's plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub tenant_id: TenantId,
    #[serde(flatten)]
    pub plan: Plan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum CampaignState {
    Pending,
    Running { case_index: usize },
    Stopped,
    Finished,
}

impl CampaignState {
    pub fn is_terminal(self) -> bool {
        matches!(self, CampaignState::Stopped | CampaignState::Finished)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStage {
    Pending,
    Running,
    Draining,
    Done,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseProgress {
    pub id: String,
    pub stage: CaseStage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection_phase: Option<InjectionPhase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handle_id: Option<HandleId>,
    /// Metrics so far, for the running case only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial: Option<MetricsSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStatus {
    pub id: CampaignId,
    pub tenant_id: TenantId,
    #[serde(flatten)]
    pub state: CampaignState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_case: Option<String>,
    pub cases: Vec<CaseProgress>,
    #[serde(with = "crate::time::serde_ms")]
    pub now: SimTime,
}

/// A case as scheduled: the baseline, if requested, comes first.
#[derive(Debug, Clone)]
pub(crate) struct ScheduledCase {
    pub case: TestCase,
    pub baseline: bool,
}

#[derive(Debug)]
pub(crate) struct ActiveCase {
    pub index: usize,
    pub start: SimTime,
    pub end: SimTime,
    pub collect_at: SimTime,
    pub app: Option<AppId>,
    pub handle: Option<HandleId>,
    pub draining: bool,
    pub events: Vec<FlowEvent>,
    pub error: Option<String>,
}

#[derive(Debug)]
pub(crate) struct CampaignRun {
    pub id: CampaignId,
    pub tenant: TenantId,
    pub schedule: Vec<ScheduledCase>,
    pub state: CampaignState,
    /// Origin of every relative time in the report.
    pub origin: SimTime,
    pub next_checkpoint: Option<SimTime>,
    pub cursor: usize,
    pub active: Option<ActiveCase>,
    pub results: Vec<CaseReport>,
    /// Flow events of finished cases, tagged with the case id.
    pub events: Vec<(String, FlowEvent)>,
}
