//! Front-end: per-resource injection, configuration faults and campaigns.
//!
//! The orchestrator owns the fabric. Every injection is a timeline of
//! control actions queued on the fabric clock under the handle's id, so
//! phases line up exactly with packet events. Handle phases are updated from
//! the fabric's control records after each step.

mod campaign;
mod handle;
mod report;

pub use campaign::{
    CampaignId, CampaignState, CampaignStatus, CaseProgress, CaseStage, ConfigFault, Plan, PlanDocument, Target,
    TestCase,
};
pub use handle::{HandleFault, HandleId, InjectionHandle, InjectionPhase, PhaseStamp};
pub use report::{
    CaseReport, InjectionOutcome, PhaseMark, RepetitionReport, ReportBundle, TestReport, EVENTS_FILE, REPORT_FILE,
    SERIES_FILE,
};

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agents::{AgentCommand, AgentReply};
use crate::fabric::resources::ResourceKind;
use crate::fabric::{ControlAction, ControlRecord, ControlResult, Fabric, FabricError};
use crate::faultengine::FaultSpec;
use crate::ids::{ItemId, ResourceId, TenantId};
use crate::mapper::{get_network_topology, resolve_items, MapError, TopologyGraph};
use crate::time::SimTime;
use crate::workload::{compute_metrics, deploy_workload};

use campaign::{ActiveCase, CampaignRun, ScheduledCase};
use handle::HandleEntry;

const COMPLETE_MARKER: &str = "complete";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrchestratorError {
    #[error("unknown tenant `{0}`")]
    UnknownTenant(TenantId),
    #[error("no {kind} `{id}`")]
    UnknownResource { kind: ResourceKind, id: ResourceId },
    #[error("{kind} `{id}` does not belong to tenant `{tenant}`")]
    NotOwner {
        kind: ResourceKind,
        id: ResourceId,
        tenant: TenantId,
    },
    #[error("item `{0}` is already targeted by a live injection")]
    ItemBusy(ItemId),
    #[error("invalid fault: {0}")]
    InvalidSpec(String),
    #[error("{kind} `{id}` has no injection items")]
    NoItems { kind: ResourceKind, id: ResourceId },
    #[error("unknown injection {0}")]
    UnknownHandle(HandleId),
    #[error("injection {0} already finished")]
    HandleFinished(HandleId),
    #[error("invalid plan: {0}")]
    PlanInvalid(String),
    #[error("tenant `{tenant}` already runs campaign {campaign}")]
    CampaignAlreadyRunning { tenant: TenantId, campaign: CampaignId },
    #[error("unknown campaign {0}")]
    UnknownCampaign(CampaignId),
    #[error("campaign {0} already finished")]
    AlreadyFinished(CampaignId),
    #[error("campaign {0} has not terminated")]
    NotTerminated(CampaignId),
    #[error("i/o: {0}")]
    Io(String),
}

pub struct Orchestrator {
    fabric: Fabric,
    handles: BTreeMap<HandleId, HandleEntry>,
    campaigns: BTreeMap<CampaignId, CampaignRun>,
    next_handle: HandleId,
    next_campaign: CampaignId,
    control_log: Vec<ControlRecord>,
}

impl Orchestrator {
    pub fn new(fabric: Fabric) -> Self {
        Orchestrator {
            fabric,
            handles: BTreeMap::new(),
            campaigns: BTreeMap::new(),
            next_handle: 1,
            next_campaign: 1,
            control_log: Vec::new(),
        }
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    /// Direct access for tests and tools. Stepping the fabric here bypasses
    /// handle and campaign bookkeeping; use [`Orchestrator::advance`].
    pub fn fabric_mut(&mut self) -> &mut Fabric {
        &mut self.fabric
    }

    pub fn now(&self) -> SimTime {
        self.fabric.now()
    }

    /// Serialized topology document, the reference for round-trip checks.
    pub fn topology_json(&self) -> String {
        self.fabric.topology().to_document().to_json_pretty()
    }

    /// Every control action executed so far, in execution order.
    pub fn control_log(&self) -> &[ControlRecord] {
        &self.control_log
    }

    pub fn get_network_topology(&self, tenant: &TenantId) -> Result<TopologyGraph, OrchestratorError> {
        get_network_topology(self.fabric.topology(), tenant).map_err(|e| match e {
            MapError::UnknownTenant(t) => OrchestratorError::UnknownTenant(t),
            MapError::NotFound { kind, id } => OrchestratorError::UnknownResource { kind, id },
        })
    }

    // ---- injections

    /// Schedules `spec` on every item of the resource, starting now.
    pub fn inject_resource(
        &mut self,
        tenant: &TenantId,
        kind: ResourceKind,
        id: &ResourceId,
        spec: FaultSpec,
    ) -> Result<InjectionHandle, OrchestratorError> {
        let start = self.now();
        let hid = self.schedule_traffic(tenant, kind, id, spec, start)?;
        Ok(self.handles[&hid].handle.clone())
    }

    /// Deletes the resource now and restores it after `outage_ms`.
    pub fn inject_config_fault(
        &mut self,
        tenant: &TenantId,
        kind: ResourceKind,
        id: &ResourceId,
        outage_ms: u64,
    ) -> Result<InjectionHandle, OrchestratorError> {
        let fault = ConfigFault {
            kind,
            id: id.clone(),
            outage_ms,
            pre_ms: 0,
            post_ms: 0,
        };
        let start = self.now();
        let hid = self.schedule_config(tenant, &fault, start)?;
        Ok(self.handles[&hid].handle.clone())
    }

    pub fn handle(&self, id: HandleId) -> Option<&InjectionHandle> {
        self.handles.get(&id).map(|e| &e.handle)
    }

    pub fn handles(&self) -> impl Iterator<Item = &InjectionHandle> + '_ {
        self.handles.values().map(|e| &e.handle)
    }

    /// Ends an injection early: pending actions are dropped, injected items
    /// cleared and a deleted resource restored now. The handle is Aborted.
    pub fn clear_injection(&mut self, id: HandleId) -> Result<InjectionHandle, OrchestratorError> {
        let entry = self.handles.get(&id).ok_or(OrchestratorError::UnknownHandle(id))?;
        if entry.handle.phase.is_terminal() {
            return Err(OrchestratorError::HandleFinished(id));
        }
        self.abort_handle(id, Some("cleared early".into()));
        self.sync_handles();
        Ok(self.handles[&id].handle.clone())
    }

    /// Steps until the handle reaches a terminal phase.
    pub fn run_handle(&mut self, id: HandleId) -> Result<InjectionHandle, OrchestratorError> {
        let end = self.handle(id).ok_or(OrchestratorError::UnknownHandle(id))?.end_at();
        if end > self.now() {
            self.advance(end);
        } else {
            self.advance(self.now());
        }
        Ok(self.handles[&id].handle.clone())
    }

    fn check_target(&self, tenant: &TenantId, kind: ResourceKind, id: &ResourceId) -> Result<(), OrchestratorError> {
        let topo = self.fabric.topology();
        if topo.tenant(tenant).is_none() {
            return Err(OrchestratorError::UnknownTenant(tenant.clone()));
        }
        if !kind.is_injectable() || !topo.contains(kind, id) {
            return Err(OrchestratorError::UnknownResource { kind, id: id.clone() });
        }
        if topo.owner(id) != Some(tenant) {
            return Err(OrchestratorError::NotOwner {
                kind,
                id: id.clone(),
                tenant: tenant.clone(),
            });
        }
        Ok(())
    }

    fn check_free(&self, items: &[ItemId]) -> Result<(), OrchestratorError> {
        let live: BTreeSet<&ItemId> = self
            .handles
            .values()
            .filter(|e| !e.handle.phase.is_terminal())
            .flat_map(|e| e.handle.items.iter())
            .collect();
        for item in items {
            if live.contains(item) || self.fabric.agents().any(|a| a.is_injected(item)) {
                return Err(OrchestratorError::ItemBusy(item.clone()));
            }
        }
        Ok(())
    }

    fn schedule_traffic(
        &mut self,
        tenant: &TenantId,
        kind: ResourceKind,
        id: &ResourceId,
        spec: FaultSpec,
        start: SimTime,
    ) -> Result<HandleId, OrchestratorError> {
        self.check_target(tenant, kind, id)?;
        spec.validate()
            .map_err(|e| OrchestratorError::InvalidSpec(e.to_string()))?;
        let items = resolve_items(self.fabric.item_map(), kind, id)
            .map_err(|_| OrchestratorError::UnknownResource { kind, id: id.clone() })?;
        if items.is_empty() {
            return Err(OrchestratorError::NoItems { kind, id: id.clone() });
        }
        let ids: Vec<ItemId> = items.iter().map(|i| i.id.clone()).collect();
        self.check_free(&ids)?;

        let hid = self.next_handle;
        self.next_handle += 1;
        let timing = spec.timing;
        let handle = InjectionHandle::new(
            hid,
            tenant.clone(),
            kind,
            id.clone(),
            HandleFault::Traffic { spec: spec.clone() },
            timing,
            ids,
            start,
        );
        let placements: Vec<_> = items.into_iter().map(|i| (i.id, i.location)).collect();
        for (item, host) in &placements {
            let command = AgentCommand::Inject {
                item_id: item.clone(),
                spec: spec.clone(),
            };
            self.fabric.schedule_control(
                handle.inject_at(),
                hid,
                ControlAction::Agent {
                    host: host.clone(),
                    command,
                },
            );
        }
        for (item, host) in &placements {
            let command = AgentCommand::Clear { item_id: item.clone() };
            self.fabric.schedule_control(
                handle.clear_at(),
                hid,
                ControlAction::Agent {
                    host: host.clone(),
                    command,
                },
            );
        }
        self.fabric.schedule_control(
            handle.end_at(),
            hid,
            ControlAction::Marker {
                label: COMPLETE_MARKER.into(),
            },
        );
        self.handles.insert(hid, HandleEntry { handle, placements });
        Ok(hid)
    }

    fn schedule_config(
        &mut self,
        tenant: &TenantId,
        fault: &ConfigFault,
        start: SimTime,
    ) -> Result<HandleId, OrchestratorError> {
        let (kind, id) = (fault.kind, &fault.id);
        self.check_target(tenant, kind, id)?;
        if fault.outage_ms == 0 {
            return Err(OrchestratorError::InvalidSpec("outage_ms must be positive".into()));
        }
        let items = self.fabric.closure_items(kind, id).map_err(|e| match e {
            FabricError::RouterOwned { .. } => OrchestratorError::InvalidSpec(e.to_string()),
            _ => OrchestratorError::UnknownResource { kind, id: id.clone() },
        })?;
        self.check_free(&items)?;

        let hid = self.next_handle;
        self.next_handle += 1;
        let handle = InjectionHandle::new(
            hid,
            tenant.clone(),
            kind,
            id.clone(),
            HandleFault::Config {
                outage_ms: fault.outage_ms,
            },
            fault.timing(),
            items,
            start,
        );
        self.fabric
            .schedule_control(handle.inject_at(), hid, ControlAction::Delete { kind, id: id.clone() });
        self.fabric
            .schedule_control(handle.clear_at(), hid, ControlAction::Restore);
        self.fabric.schedule_control(
            handle.end_at(),
            hid,
            ControlAction::Marker {
                label: COMPLETE_MARKER.into(),
            },
        );
        self.handles.insert(
            hid,
            HandleEntry {
                handle,
                placements: Vec::new(),
            },
        );
        Ok(hid)
    }

    /// Drops pending actions, clears injected items and restores a held
    /// snapshot, all at the current time.
    fn abort_handle(&mut self, id: HandleId, reason: Option<String>) {
        let Some(entry) = self.handles.get(&id) else { return };
        let placements = entry.placements.clone();
        self.fabric.cancel_tag(id);
        let mut error = reason;
        for (item, host) in placements {
            if self.fabric.agent(&host).is_some_and(|a| a.is_injected(&item)) {
                let command = AgentCommand::Clear { item_id: item };
                self.fabric.execute_control(id, ControlAction::Agent { host, command });
            }
        }
        if self.fabric.held_snapshot(id).is_some() {
            if let ControlResult::Failed { error: e } = self.fabric.execute_control(id, ControlAction::Restore) {
                error = Some(format!("restore failed: {e}"));
            }
        }
        let now = self.now();
        if let Some(entry) = self.handles.get_mut(&id) {
            entry.handle.abort(now, error);
        }
    }

    /// Applies fabric control records to handle phases.
    fn sync_handles(&mut self) {
        loop {
            let records = self.fabric.take_control_records();
            if records.is_empty() {
                return;
            }
            let mut aborts = Vec::new();
            for r in &records {
                if let Some(reason) = self.apply_record(r) {
                    aborts.push((r.tag, reason));
                }
            }
            self.control_log.extend(records);
            for (id, reason) in aborts {
                self.abort_handle(id, Some(reason));
            }
        }
    }

    /// Returns an abort reason when the record reports a failure.
    fn apply_record(&mut self, r: &ControlRecord) -> Option<String> {
        let entry = self.handles.get_mut(&r.tag)?;
        if entry.handle.phase.is_terminal() {
            return None;
        }
        let h = &mut entry.handle;
        let acked = matches!(&r.result, ControlResult::Reply { reply } if reply.is_ack());
        let failure = || match &r.result {
            ControlResult::Failed { error } => error.clone(),
            ControlResult::Reply {
                reply: AgentReply::Error { message, .. },
            } => message.clone(),
            other => format!("unexpected result {other:?}"),
        };
        match &r.action {
            ControlAction::Agent {
                command: AgentCommand::Inject { .. },
                ..
            } => {
                if !acked {
                    return Some(format!("inject failed: {}", failure()));
                }
                h.advance(InjectionPhase::Injecting, r.at);
            }
            ControlAction::Agent {
                command: AgentCommand::Clear { .. },
                ..
            } => {
                if !acked {
                    return Some(format!("clear failed: {}", failure()));
                }
                h.advance(InjectionPhase::PostInjection, r.at);
            }
            ControlAction::Agent { .. } => {}
            ControlAction::Delete { .. } => {
                if r.result != ControlResult::Ok {
                    return Some(format!("delete failed: {}", failure()));
                }
                h.advance(InjectionPhase::Injecting, r.at);
            }
            ControlAction::Restore => {
                if r.result != ControlResult::Ok {
                    return Some(format!("restore failed: {}", failure()));
                }
                h.advance(InjectionPhase::PostInjection, r.at);
            }
            ControlAction::Marker { .. } => {
                let still = entry
                    .placements
                    .iter()
                    .any(|(item, host)| self.fabric.agent(host).is_some_and(|a| a.is_injected(item)));
                if still {
                    return Some("items still injected at completion".into());
                }
                entry.handle.advance(InjectionPhase::Completed, r.at);
            }
        }
        None
    }

    // ---- clock

    /// Runs the fabric and every campaign up to `until`.
    pub fn advance(&mut self, until: SimTime) {
        loop {
            let next = self
                .campaigns
                .values()
                .filter_map(|c| c.next_checkpoint)
                .filter(|t| *t <= until)
                .min();
            let Some(t) = next else { break };
            self.step_fabric(t);
            let due: Vec<CampaignId> = self
                .campaigns
                .values()
                .filter(|c| c.next_checkpoint == Some(t))
                .map(|c| c.id)
                .collect();
            for id in due {
                self.checkpoint(id, t);
            }
        }
        self.step_fabric(until);
    }

    pub fn advance_by_ms(&mut self, ms: u64) {
        let until = self.now().plus_ms(ms);
        self.advance(until);
    }

    fn step_fabric(&mut self, until: SimTime) {
        self.fabric.step(until);
        self.sync_handles();
        for run in self.campaigns.values_mut() {
            if let Some(active) = &mut run.active {
                if let Some(app) = active.app {
                    active.events.extend(self.fabric.drain_flow_events(app));
                }
            }
        }
    }

    // ---- campaigns

    /// Validates and queues a campaign; it starts at the next advance.
    pub fn start_tests(&mut self, tenant: &TenantId, plan: Plan) -> Result<CampaignId, OrchestratorError> {
        if self.fabric.topology().tenant(tenant).is_none() {
            return Err(OrchestratorError::UnknownTenant(tenant.clone()));
        }
        if let Some(c) = self
            .campaigns
            .values()
            .find(|c| &c.tenant == tenant && !c.state.is_terminal())
        {
            return Err(OrchestratorError::CampaignAlreadyRunning {
                tenant: tenant.clone(),
                campaign: c.id,
            });
        }
        self.validate_plan(tenant, &plan)?;

        let mut schedule = Vec::new();
        if plan.baseline {
            if let Some(first) = plan.cases.first() {
                schedule.push(ScheduledCase {
                    case: TestCase {
                        id: "baseline".into(),
                        ..first.clone()
                    },
                    baseline: true,
                });
            }
        }
        schedule.extend(
            plan.cases
                .into_iter()
                .map(|case| ScheduledCase { case, baseline: false }),
        );

        let id = self.next_campaign;
        self.next_campaign += 1;
        let now = self.now();
        let empty = schedule.is_empty();
        self.campaigns.insert(
            id,
            CampaignRun {
                id,
                tenant: tenant.clone(),
                schedule,
                state: if empty {
                    CampaignState::Finished
                } else {
                    CampaignState::Pending
                },
                origin: now,
                next_checkpoint: if empty { None } else { Some(now) },
                cursor: 0,
                active: None,
                results: Vec::new(),
                events: Vec::new(),
            },
        );
        Ok(id)
    }

    fn validate_plan(&self, tenant: &TenantId, plan: &Plan) -> Result<(), OrchestratorError> {
        let mut seen = BTreeSet::new();
        for case in &plan.cases {
            let bad = |msg: String| OrchestratorError::PlanInvalid(format!("case `{}`: {msg}", case.id));
            if case.id.is_empty() || case.id == "baseline" || !seen.insert(case.id.as_str()) {
                return Err(bad("case ids must be unique, non-empty and not `baseline`".into()));
            }
            match (&case.target, &case.spec, &case.config_fault) {
                (Some(t), Some(spec), None) => {
                    self.check_target(tenant, t.kind, &t.id)
                        .map_err(|e| bad(e.to_string()))?;
                    spec.validate().map_err(|e| bad(e.to_string()))?;
                    let items = resolve_items(self.fabric.item_map(), t.kind, &t.id).map_err(|e| bad(e.to_string()))?;
                    if items.is_empty() {
                        return Err(bad(format!("{} `{}` has no injection items", t.kind, t.id)));
                    }
                }
                (None, None, Some(c)) => {
                    self.check_target(tenant, c.kind, &c.id)
                        .map_err(|e| bad(e.to_string()))?;
                    if c.outage_ms == 0 {
                        return Err(bad("outage_ms must be positive".into()));
                    }
                }
                _ => {
                    return Err(bad(
                        "exactly one of spec (with target) or config_fault is required".into()
                    ))
                }
            }
            if case.repetitions == 0 {
                return Err(bad("repetitions must be at least 1".into()));
            }
            if case.trigger_repetition() >= case.repetitions {
                return Err(bad("inject_at_repetition must be below repetitions".into()));
            }
            if case.repetition_ms() == 0 {
                return Err(bad("repetition_ms must be positive".into()));
            }
            case.workload
                .validate(self.fabric.topology(), tenant)
                .map_err(|e| bad(e.to_string()))?;
        }
        Ok(())
    }

    fn checkpoint(&mut self, id: CampaignId, t: SimTime) {
        let run = self.campaigns.get_mut(&id).expect("campaign exists");
        match &mut run.active {
            Some(active) if !active.draining => {
                if let Some(app) = active.app {
                    self.fabric.stop_app(app);
                }
                active.draining = true;
                run.next_checkpoint = Some(active.collect_at);
            }
            Some(_) => {
                self.finish_case(id, t, false);
                let run = self.campaigns.get_mut(&id).expect("campaign exists");
                run.cursor += 1;
                // Cases start on whole seconds of campaign time so series
                // buckets line up across cases.
                let rel = (t - run.origin).as_micros().div_ceil(1_000_000);
                run.next_checkpoint = Some(run.origin + SimTime::from_micros(rel * 1_000_000));
            }
            None if run.cursor >= run.schedule.len() => {
                run.state = CampaignState::Finished;
                run.next_checkpoint = None;
            }
            None => self.start_case(id, t),
        }
    }

    fn start_case(&mut self, id: CampaignId, t: SimTime) {
        let run = self.campaigns.get_mut(&id).expect("campaign exists");
        let index = run.cursor;
        let ScheduledCase { case, baseline } = run.schedule[index].clone();
        let tenant = run.tenant.clone();
        run.state = CampaignState::Running { case_index: index };
        let end = t.plus_ms(case.duration_ms());
        let mut active = ActiveCase {
            index,
            start: t,
            end,
            collect_at: end.plus_ms(case.workload.drain_ms()),
            app: None,
            handle: None,
            draining: false,
            events: Vec::new(),
            error: None,
        };

        match deploy_workload(&mut self.fabric, &tenant, &case.workload) {
            Ok(app) => active.app = Some(app),
            Err(e) => active.error = Some(format!("workload: {e}")),
        }
        if active.error.is_none() && !baseline {
            let trigger = t.plus_ms(case.trigger_offset_ms());
            let scheduled = match (&case.target, &case.spec, &case.config_fault) {
                (Some(target), Some(spec), None) => {
                    self.schedule_traffic(&tenant, target.kind, &target.id, spec.clone(), trigger)
                }
                (_, _, Some(cf)) => self.schedule_config(&tenant, cf, trigger),
                _ => Err(OrchestratorError::PlanInvalid("case has no fault".into())),
            };
            match scheduled {
                Ok(h) => active.handle = Some(h),
                Err(e) => active.error = Some(format!("injection: {e}")),
            }
        }

        let run = self.campaigns.get_mut(&id).expect("campaign exists");
        if active.error.is_some() {
            // Nothing runs; record the failure and move on.
            if let Some(app) = active.app.take() {
                self.fabric.stop_app(app);
                self.fabric.remove_app(app);
            }
            active.end = t;
            active.draining = true;
            active.collect_at = t;
        }
        run.next_checkpoint = Some(if active.draining { active.collect_at } else { active.end });
        run.active = Some(active);
    }

    /// Collects the active case's events and metrics into the results.
    fn finish_case(&mut self, id: CampaignId, now: SimTime, stopped: bool) {
        let run = self.campaigns.get_mut(&id).expect("campaign exists");
        let Some(mut active) = run.active.take() else { return };
        if let Some(app) = active.app.take() {
            if stopped {
                self.fabric.stop_app(app);
            }
            active.events.extend(self.fabric.drain_flow_events(app));
            self.fabric.remove_app(app);
        }
        let end = if stopped { now.min(active.end) } else { active.end };
        let ScheduledCase { case, baseline } = &run.schedule[active.index];

        let metrics = compute_metrics(&active.events, active.start, end).ok();
        let trigger = case.trigger_repetition();
        let rep_ms = case.repetition_ms();
        let repetitions = (0..case.repetitions)
            .filter_map(|i| {
                let s = active.start.plus_ms(u64::from(i) * rep_ms);
                let e = s.plus_ms(rep_ms).min(end);
                let m = compute_metrics(&active.events, s, e).ok()?;
                Some(RepetitionReport {
                    index: i,
                    fault_exposed: !baseline && i >= trigger,
                    throughput: m.throughput,
                    latency_ms: m.latency_ms,
                    response_time_ms: m.response_time_ms,
                    error_rate: m.error_rate,
                })
            })
            .collect();
        let injection = active.handle.and_then(|h| self.handles.get(&h)).map(|e| {
            let rel = |at: SimTime| at.saturating_sub(active.start).as_ms_f64();
            InjectionOutcome {
                handle_id: e.handle.id,
                phase: e.handle.phase,
                phases: e
                    .handle
                    .history
                    .iter()
                    .map(|s| PhaseMark {
                        phase: s.phase,
                        at_ms: rel(s.at),
                    })
                    .collect(),
                error: e.handle.error.clone(),
            }
        });
        let aborted =
            stopped || active.error.is_some() || injection.as_ref().is_some_and(|i| i.phase == InjectionPhase::Aborted);
        let report = CaseReport {
            id: case.id.clone(),
            baseline: *baseline,
            target: case.target.clone(),
            spec: if *baseline { None } else { case.spec.clone() },
            config_fault: if *baseline { None } else { case.config_fault.clone() },
            start_s: (active.start - run.origin).as_micros() / 1_000_000,
            duration_ms: (end.saturating_sub(active.start)).as_ms_f64(),
            aborted,
            error: active.error.clone(),
            injection,
            metrics,
            repetitions,
        };
        let case_id = case.id.clone();
        run.events
            .extend(active.events.into_iter().map(|e| (case_id.clone(), e)));
        run.results.push(report);
    }

    pub fn campaign_ids(&self) -> impl Iterator<Item = CampaignId> + '_ {
        self.campaigns.keys().copied()
    }

    pub fn status_tests(&self, id: CampaignId) -> Result<CampaignStatus, OrchestratorError> {
        let run = self.campaigns.get(&id).ok_or(OrchestratorError::UnknownCampaign(id))?;
        let now = self.now();
        let cases = run
            .schedule
            .iter()
            .enumerate()
            .map(|(i, sc)| {
                let active = run.active.as_ref().filter(|a| a.index == i);
                let done = run.results.iter().find(|r| r.id == sc.case.id);
                let stage = match (active, done) {
                    (Some(a), _) if a.draining => CaseStage::Draining,
                    (Some(_), _) => CaseStage::Running,
                    (None, Some(r)) if r.aborted => CaseStage::Aborted,
                    (None, Some(_)) => CaseStage::Done,
                    (None, None) => CaseStage::Pending,
                };
                let handle_id = active
                    .and_then(|a| a.handle)
                    .or_else(|| done.and_then(|r| r.injection.as_ref().map(|i| i.handle_id)));
                CaseProgress {
                    id: sc.case.id.clone(),
                    stage,
                    injection_phase: handle_id.and_then(|h| self.handle(h)).map(|h| h.phase),
                    handle_id,
                    partial: active.and_then(|a| compute_metrics(&a.events, a.start, now.min(a.end)).ok()),
                }
            })
            .collect();
        Ok(CampaignStatus {
            id,
            tenant_id: run.tenant.clone(),
            state: run.state,
            current_case: run.active.as_ref().map(|a| run.schedule[a.index].case.id.clone()),
            cases,
            now,
        })
    }

    /// Aborts the current case. Its injection is cleared and any deleted
    /// resource restored immediately.
    pub fn stop_tests(&mut self, id: CampaignId) -> Result<(), OrchestratorError> {
        let run = self.campaigns.get(&id).ok_or(OrchestratorError::UnknownCampaign(id))?;
        if run.state.is_terminal() {
            return Err(OrchestratorError::AlreadyFinished(id));
        }
        let handle = run.active.as_ref().and_then(|a| a.handle);
        if let Some(h) = handle {
            if !self.handles[&h].handle.phase.is_terminal() {
                self.abort_handle(h, Some("campaign stopped".into()));
            }
        }
        self.sync_handles();
        let now = self.now();
        self.finish_case(id, now, true);
        let run = self.campaigns.get_mut(&id).expect("campaign exists");
        run.state = CampaignState::Stopped;
        run.next_checkpoint = None;
        Ok(())
    }

    /// Steps until the campaign is Finished or Stopped.
    pub fn run_campaign(&mut self, id: CampaignId) -> Result<CampaignState, OrchestratorError> {
        loop {
            let run = self.campaigns.get(&id).ok_or(OrchestratorError::UnknownCampaign(id))?;
            if run.state.is_terminal() {
                return Ok(run.state);
            }
            let t = run.next_checkpoint.expect("live campaigns have a checkpoint");
            self.advance(t);
        }
    }

    pub fn report(&self, id: CampaignId) -> Result<ReportBundle, OrchestratorError> {
        let run = self.campaigns.get(&id).ok_or(OrchestratorError::UnknownCampaign(id))?;
        if !run.state.is_terminal() {
            return Err(OrchestratorError::NotTerminated(id));
        }
        let mut baseline = None;
        let mut cases = Vec::new();
        for r in &run.results {
            if r.baseline {
                baseline = Some(r.clone());
            } else {
                cases.push(r.clone());
            }
        }
        let report = TestReport {
            campaign_id: id,
            tenant_id: run.tenant.clone(),
            state: run.state,
            baseline,
            cases,
        };
        Ok(ReportBundle::render(&report, &run.events, run.origin))
    }

    /// Writes the report bundle of a terminated campaign into `dir`.
    pub fn save_logs(&self, id: CampaignId, dir: &Path) -> Result<PathBuf, OrchestratorError> {
        let bundle = self.report(id)?;
        bundle.write_to(dir).map_err(|e| OrchestratorError::Io(e.to_string()))?;
        Ok(dir.to_path_buf())
    }
}

#[cfg(test)]
mod tests;
