//! Discrete-event loop. Events run in (time, sequence) order; every hop of
//! every packet passes through the agent owning the item it crosses.

use std::any::Any;
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::balancer::{BackendHealth, BalancerState, HealthTransition};
use super::packet::{Packet, PacketKind};
use super::resources::{HostRole, Resource, ResourceKind};
use super::routing::{route_from_subnet, route_path, Destination, Route};
use super::snapshot::{remove_closure, replay, snapshot, ResourceSnapshot};
use super::topology::{Topology, TopologyDocument};
use super::FabricError;
use crate::agents::{Agent, AgentCommand, AgentReply};
use crate::faultengine::{PacketOutcome, Protocol};
use crate::ids::{HostId, ItemId, ResourceId, TenantId};
use crate::mapper::{build_item_map, item_id_for, ItemMap};
use crate::time::SimTime;
use crate::workload::FlowEvent;

pub const DEFAULT_HOP_LATENCY_MS: f64 = 0.5;
const PROBE_BYTES: usize = 16;

pub type AppId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    Deterministic,
    WallAnchored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clock {
    pub now: SimTime,
    pub mode: ClockMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FabricConfig {
    /// Latency of one item when its host sets none.
    pub hop_latency_ms: f64,
    pub seed: u64,
}

impl Default for FabricConfig {
    fn default() -> Self {
        FabricConfig {
            hop_latency_ms: DEFAULT_HOP_LATENCY_MS,
            seed: 0,
        }
    }
}

/// A packet that reached its destination port (or balancer).
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub packet: Packet,
    pub at: SimTime,
    /// Items actually traversed, in order.
    pub path: Vec<ItemId>,
    pub port_id: ResourceId,
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LossReason {
    Dropped { item: ItemId },
    Unreachable { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LostPacket {
    pub packet: Packet,
    pub at: SimTime,
    pub reason: LossReason,
    pub duplicate: bool,
}

/// Terminal packet events returned by [`Fabric::step`]. Health probes are
/// not reported.
#[derive(Debug, Clone, PartialEq)]
pub enum FabricEvent {
    Delivered(Delivery),
    Lost(LostPacket),
}

/// One non-pass-through transformer decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub at: SimTime,
    pub item: ItemId,
    /// Tenant owning the item's port.
    pub item_tenant: TenantId,
    pub packet_tenant: TenantId,
    pub flow_id: u64,
    pub packet_id: u64,
    pub kind: PacketKind,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ControlAction {
    Agent {
        host: HostId,
        command: AgentCommand,
    },
    /// Deletes a resource, keeping the snapshot under the action's tag.
    Delete {
        kind: ResourceKind,
        id: ResourceId,
    },
    /// Restores the snapshot kept under the action's tag.
    Restore,
    Marker {
        label: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ControlResult {
    Ok,
    Reply { reply: AgentReply },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub tag: u64,
    pub at: SimTime,
    pub action: ControlAction,
    pub result: ControlResult,
}

/// A traffic source/sink living inside the event loop.
pub trait TrafficApp: Send + Any {
    fn tenant(&self) -> &TenantId;
    fn start(&mut self, ctx: &mut AppContext<'_>);
    fn on_delivery(&mut self, ctx: &mut AppContext<'_>, delivery: Delivery);
    fn on_lost(&mut self, _ctx: &mut AppContext<'_>, _lost: LostPacket) {}
    fn on_timer(&mut self, _ctx: &mut AppContext<'_>, _token: u64) {}
    fn stop(&mut self, _ctx: &mut AppContext<'_>) {}
    /// Drains flow events recorded since the last call.
    fn drain_flow_events(&mut self) -> Vec<FlowEvent> {
        Vec::new()
    }
    fn as_any(&self) -> &dyn Any;
}

pub struct AppContext<'a> {
    fabric: &'a mut Fabric,
    app: AppId,
}

impl AppContext<'_> {
    pub fn now(&self) -> SimTime {
        self.fabric.clock.now
    }

    pub fn app_id(&self) -> AppId {
        self.app
    }

    pub fn topology(&self) -> &Topology {
        &self.fabric.topology
    }

    pub fn send(&mut self, packet: Packet) -> Result<u64, FabricError> {
        self.fabric.send_owned(packet, Owner::App(self.app))
    }

    /// Answers a delivered packet along the reverse of its path.
    pub fn reply(&mut self, to: &Delivery, kind: PacketKind, payload: Vec<u8>) -> Result<u64, FabricError> {
        self.fabric.reply_owned(to, kind, payload, Owner::App(self.app))
    }

    pub fn set_timer(&mut self, at: SimTime, token: u64) {
        let app = self.app;
        self.fabric.schedule(at, Event::Timer { app, token });
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Owner {
    None,
    App(AppId),
    Probe {
        balancer: ResourceId,
        backend: ResourceId,
        probe: u64,
    },
    ProbeReply {
        balancer: ResourceId,
        backend: ResourceId,
        probe: u64,
    },
}

#[derive(Debug, Clone)]
struct InFlight {
    packet: Packet,
    path: Vec<ItemId>,
    idx: usize,
    dest: Destination,
    owner: Owner,
    duplicate: bool,
}

#[derive(Debug)]
enum Event {
    Hop(Box<InFlight>),
    Timer { app: AppId, token: u64 },
    ProbeTick { balancer: ResourceId },
    ProbeTimeout { balancer: ResourceId, probe: u64 },
    Control { tag: u64, action: ControlAction },
}

#[derive(Debug)]
struct Scheduled {
    at: SimTime,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

pub struct Fabric {
    topology: Topology,
    items: ItemMap,
    agents: BTreeMap<HostId, Agent>,
    config: FabricConfig,
    clock: Clock,
    queue: BinaryHeap<Reverse<Scheduled>>,
    next_seq: u64,
    next_packet: u64,
    next_probe: u64,
    apps: BTreeMap<AppId, Box<dyn TrafficApp>>,
    next_app: AppId,
    balancers: BTreeMap<ResourceId, BalancerState>,
    health_log: Vec<HealthTransition>,
    route_cache: HashMap<(ResourceId, Ipv4Addr), Route>,
    version: u64,
    trace: Vec<TraceRecord>,
    snapshots: BTreeMap<u64, ResourceSnapshot>,
    control_log: Vec<ControlRecord>,
    cancelled: BTreeSet<u64>,
}

impl std::fmt::Debug for Fabric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fabric")
            .field("now", &self.clock.now)
            .field("resources", &self.topology.len())
            .field("items", &self.items.len())
            .field("pending", &self.queue.len())
            .finish()
    }
}

impl Fabric {
    pub fn from_json(text: &str, config: FabricConfig) -> Result<Self, FabricError> {
        Self::load(TopologyDocument::from_json(text)?, config)
    }

    /// Validates the document and starts a deterministic clock at zero.
    pub fn load(doc: TopologyDocument, config: FabricConfig) -> Result<Self, FabricError> {
        let topology = Topology::from_document(doc)?;
        let items = build_item_map(&topology);
        let agents = topology
            .hosts()
            .iter()
            .filter(|h| h.role != HostRole::Controller)
            .map(|h| {
                let lat = h.link_latency_ms.unwrap_or(config.hop_latency_ms);
                (h.id.clone(), Agent::new(h.id.clone(), lat, config.seed))
            })
            .collect();
        let mut fabric = Fabric {
            topology,
            items,
            agents,
            config,
            clock: Clock {
                now: SimTime::ZERO,
                mode: ClockMode::Deterministic,
            },
            queue: BinaryHeap::new(),
            next_seq: 0,
            next_packet: 0,
            next_probe: 0,
            apps: BTreeMap::new(),
            next_app: 0,
            balancers: BTreeMap::new(),
            health_log: Vec::new(),
            route_cache: HashMap::new(),
            version: 0,
            trace: Vec::new(),
            snapshots: BTreeMap::new(),
            control_log: Vec::new(),
            cancelled: BTreeSet::new(),
        };
        let ids: Vec<ResourceId> = fabric.topology.balancers().map(|b| b.id.clone()).collect();
        for id in ids {
            fabric.arm_balancer(&id);
        }
        Ok(fabric)
    }

    pub fn config(&self) -> &FabricConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn item_map(&self) -> &ItemMap {
        &self.items
    }

    /// Bumped on every topology mutation.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn now(&self) -> SimTime {
        self.clock.now
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn set_clock_mode(&mut self, mode: ClockMode) {
        self.clock.mode = mode;
    }

    pub fn agents(&self) -> impl Iterator<Item = &Agent> + '_ {
        self.agents.values()
    }

    pub fn agent(&self, host: &HostId) -> Option<&Agent> {
        self.agents.get(host)
    }

    pub fn active_injections(&self) -> usize {
        self.agents.values().map(Agent::active_count).sum()
    }

    pub fn hop_latency_ms(&self, host: &HostId) -> f64 {
        self.topology
            .host(host)
            .and_then(|h| h.link_latency_ms)
            .unwrap_or(self.config.hop_latency_ms)
    }

    /// Sends a command to a host agent right now.
    pub fn command(&mut self, host: &HostId, command: AgentCommand) -> Option<AgentReply> {
        let now = self.clock.now;
        let items = &self.items;
        self.agents.get_mut(host).map(|a| a.handle(command, now, items))
    }

    pub fn route_path(&mut self, src_port_id: &ResourceId, dst: Ipv4Addr) -> Result<Route, FabricError> {
        let key = (src_port_id.clone(), dst);
        if let Some(r) = self.route_cache.get(&key) {
            return Ok(r.clone());
        }
        let r = route_path(&self.topology, src_port_id, dst)?;
        self.route_cache.insert(key, r.clone());
        Ok(r)
    }

    // ---- snapshot, delete, restore

    pub fn snapshot_resource(&self, kind: ResourceKind, id: &ResourceId) -> Result<ResourceSnapshot, FabricError> {
        snapshot(&self.topology, kind, id, self.clock.now)
    }

    /// Items of every port a delete of `id` would remove.
    pub fn closure_items(&self, kind: ResourceKind, id: &ResourceId) -> Result<Vec<ItemId>, FabricError> {
        let snap = self.snapshot_resource(kind, id)?;
        Ok(snap
            .closure
            .iter()
            .filter_map(|e| match &e.resource {
                Resource::Port(p) => Some(item_id_for(p)),
                _ => None,
            })
            .collect())
    }

    pub fn delete_resource(&mut self, kind: ResourceKind, id: &ResourceId) -> Result<ResourceSnapshot, FabricError> {
        let snap = self.snapshot_resource(kind, id)?;
        for e in &snap.closure {
            if let Resource::Port(p) = &e.resource {
                let item = item_id_for(p);
                if self.agents.values().any(|a| a.is_injected(&item)) {
                    return Err(FabricError::Busy(item));
                }
            }
        }
        remove_closure(&mut self.topology, &snap);
        for e in &snap.closure {
            if let Resource::Balancer(b) = &e.resource {
                self.balancers.remove(&b.id);
            }
        }
        self.topology_changed();
        Ok(snap)
    }

    pub fn restore_resource(&mut self, snap: &ResourceSnapshot) -> Result<(), FabricError> {
        replay(&mut self.topology, snap)?;
        self.topology_changed();
        for e in &snap.closure {
            if let Resource::Balancer(b) = &e.resource {
                let id = b.id.clone();
                self.arm_balancer(&id);
            }
        }
        Ok(())
    }

    fn topology_changed(&mut self) {
        self.items = build_item_map(&self.topology);
        self.route_cache.clear();
        self.version += 1;
    }

    // ---- balancers

    fn arm_balancer(&mut self, id: &ResourceId) {
        let Some(b) = self.topology.balancer(id) else { return };
        self.balancers.insert(id.clone(), BalancerState::new(b));
        let now = self.clock.now;
        self.schedule(now, Event::ProbeTick { balancer: id.clone() });
    }

    /// Round-robin choice among healthy, existing backends.
    pub fn balancer_dispatch(&mut self, balancer_id: &ResourceId) -> Result<ResourceId, FabricError> {
        let b = self
            .topology
            .balancer(balancer_id)
            .ok_or_else(|| FabricError::NotFound {
                kind: ResourceKind::Balancer,
                id: balancer_id.clone(),
            })?;
        let state = self.balancers.get_mut(balancer_id).expect("every balancer has state");
        let topo = &self.topology;
        state
            .pick(b, |p| topo.port(p).is_some())
            .ok_or_else(|| FabricError::NoBackendAvailable(balancer_id.clone()))
    }

    pub fn backend_health(&self, balancer_id: &ResourceId) -> Option<&BTreeMap<ResourceId, BackendHealth>> {
        self.balancers.get(balancer_id).map(|s| &s.health)
    }

    pub fn health_log(&self) -> &[HealthTransition] {
        &self.health_log
    }

    fn probe_tick(&mut self, balancer_id: ResourceId) {
        let Some(b) = self.topology.balancer(&balancer_id).cloned() else {
            return;
        };
        if !self.balancers.contains_key(&balancer_id) {
            return;
        }
        let now = self.clock.now;
        let hm = b.health_monitor;
        for backend in &b.backend_port_ids {
            let probe = self.next_probe;
            self.next_probe += 1;
            self.balancers
                .get_mut(&balancer_id)
                .expect("checked")
                .outstanding
                .insert(probe, backend.clone());
            self.schedule(
                now.plus_ms(hm.timeout_ms),
                Event::ProbeTimeout {
                    balancer: balancer_id.clone(),
                    probe,
                },
            );
            let Some(port) = self.topology.port(backend) else {
                continue;
            };
            let Ok(route) = route_from_subnet(&self.topology, &b.subnet_id, Vec::new(), port.address) else {
                continue;
            };
            let mut packet = Packet::new(
                b.tenant_id.clone(),
                b.id.clone(),
                port.address,
                Protocol::Tcp,
                None,
                PacketKind::Request,
                vec![0x5a; PROBE_BYTES],
            );
            packet.id = self.next_packet_id();
            packet.sent_at = now;
            self.schedule(
                now,
                Event::Hop(Box::new(InFlight {
                    packet,
                    path: route.items,
                    idx: 0,
                    dest: route.destination,
                    owner: Owner::Probe {
                        balancer: balancer_id.clone(),
                        backend: backend.clone(),
                        probe,
                    },
                    duplicate: false,
                })),
            );
        }
        if hm.period_ms > 0 {
            self.schedule(now.plus_ms(hm.period_ms), Event::ProbeTick { balancer: balancer_id });
        }
    }

    fn probe_verdict(&mut self, balancer_id: &ResourceId, probe: u64, ok: bool) {
        let Some(max_retries) = self
            .topology
            .balancer(balancer_id)
            .map(|b| b.health_monitor.max_retries)
        else {
            return;
        };
        let Some(state) = self.balancers.get_mut(balancer_id) else {
            return;
        };
        let Some(backend) = state.outstanding.remove(&probe) else {
            return;
        };
        if let Some(healthy) = state.record(&backend, ok, max_retries) {
            self.health_log.push(HealthTransition {
                at: self.clock.now,
                balancer_id: balancer_id.clone(),
                backend_port_id: backend,
                healthy,
            });
        }
    }

    // ---- traffic

    fn next_packet_id(&mut self) -> u64 {
        let id = self.next_packet;
        self.next_packet += 1;
        id
    }

    fn schedule(&mut self, at: SimTime, event: Event) {
        let at = at.max(self.clock.now);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Scheduled { at, seq, event }));
    }

    /// Sends a packet nobody is listening for; handy for probing paths.
    pub fn send_packet(&mut self, packet: Packet) -> Result<u64, FabricError> {
        self.send_owned(packet, Owner::None)
    }

    fn send_owned(&mut self, mut packet: Packet, owner: Owner) -> Result<u64, FabricError> {
        let route = self.route_path(&packet.src_port_id.clone(), packet.dst_address)?;
        packet.id = self.next_packet_id();
        packet.sent_at = self.clock.now;
        let id = packet.id;
        let now = self.clock.now;
        self.schedule(
            now,
            Event::Hop(Box::new(InFlight {
                packet,
                path: route.items,
                idx: 0,
                dest: route.destination,
                owner,
                duplicate: false,
            })),
        );
        Ok(id)
    }

    fn reply_owned(
        &mut self,
        to: &Delivery,
        kind: PacketKind,
        payload: Vec<u8>,
        owner: Owner,
    ) -> Result<u64, FabricError> {
        let back = &to.packet.src_port_id;
        let dst_address = match self.topology.get(back) {
            Some(Resource::Port(p)) => p.address,
            Some(Resource::Balancer(b)) => b.address,
            _ => return Err(FabricError::Unreachable(format!("`{back}` no longer exists"))),
        };
        let mut packet = Packet::new(
            to.packet.tenant_id.clone(),
            to.port_id.clone(),
            dst_address,
            to.packet.protocol,
            to.packet.service_port,
            kind,
            payload,
        );
        packet.flow_id = to.packet.flow_id;
        packet.request_id = to.packet.request_id;
        packet.id = self.next_packet_id();
        packet.sent_at = self.clock.now;
        let id = packet.id;
        let now = self.clock.now;
        self.schedule(
            now,
            Event::Hop(Box::new(InFlight {
                packet,
                path: to.path.iter().rev().cloned().collect(),
                idx: 0,
                dest: Destination::Port(back.clone()),
                owner,
                duplicate: false,
            })),
        );
        Ok(id)
    }

    // ---- apps

    /// Registers an app and calls its `start` hook at the current time.
    pub fn add_app(&mut self, app: Box<dyn TrafficApp>) -> AppId {
        let id = self.next_app;
        self.next_app += 1;
        self.apps.insert(id, app);
        self.with_app(id, |app, ctx| app.start(ctx));
        id
    }

    /// Calls the `stop` hook; the app keeps receiving in-flight traffic.
    pub fn stop_app(&mut self, id: AppId) {
        self.with_app(id, |app, ctx| app.stop(ctx));
    }

    pub fn remove_app(&mut self, id: AppId) -> Option<Box<dyn TrafficApp>> {
        self.apps.remove(&id)
    }

    pub fn app(&self, id: AppId) -> Option<&dyn TrafficApp> {
        self.apps.get(&id).map(|a| a.as_ref())
    }

    pub fn drain_flow_events(&mut self, id: AppId) -> Vec<FlowEvent> {
        self.apps
            .get_mut(&id)
            .map(|a| a.drain_flow_events())
            .unwrap_or_default()
    }

    fn with_app(&mut self, id: AppId, f: impl FnOnce(&mut dyn TrafficApp, &mut AppContext<'_>)) {
        if let Some(mut app) = self.apps.remove(&id) {
            let mut ctx = AppContext { fabric: self, app: id };
            f(app.as_mut(), &mut ctx);
            self.apps.insert(id, app);
        }
    }

    // ---- control actions

    /// Queues `action` at `at` under `tag`.
    pub fn schedule_control(&mut self, at: SimTime, tag: u64, action: ControlAction) {
        self.cancelled.remove(&tag);
        self.schedule(at, Event::Control { tag, action });
    }

    /// Drops every not-yet-run action carrying `tag`.
    pub fn cancel_tag(&mut self, tag: u64) {
        self.cancelled.insert(tag);
    }

    /// Runs `action` now, recording it like a scheduled one.
    pub fn execute_control(&mut self, tag: u64, action: ControlAction) -> ControlResult {
        let result = match &action {
            ControlAction::Agent { host, command } => match self.command(host, command.clone()) {
                Some(reply) => ControlResult::Reply { reply },
                None => ControlResult::Failed {
                    error: format!("no agent on host `{host}`"),
                },
            },
            ControlAction::Delete { kind, id } => match self.delete_resource(*kind, id) {
                Ok(snap) => {
                    self.snapshots.insert(tag, snap);
                    ControlResult::Ok
                }
                Err(e) => ControlResult::Failed { error: e.to_string() },
            },
            ControlAction::Restore => match self.snapshots.get(&tag).cloned() {
                Some(snap) => match self.restore_resource(&snap) {
                    Ok(()) => {
                        self.snapshots.remove(&tag);
                        ControlResult::Ok
                    }
                    Err(e) => ControlResult::Failed { error: e.to_string() },
                },
                None => ControlResult::Failed {
                    error: format!("no snapshot held under tag {tag}"),
                },
            },
            ControlAction::Marker { .. } => ControlResult::Ok,
        };
        self.control_log.push(ControlRecord {
            tag,
            at: self.clock.now,
            action,
            result: result.clone(),
        });
        result
    }

    pub fn held_snapshot(&self, tag: u64) -> Option<&ResourceSnapshot> {
        self.snapshots.get(&tag)
    }

    pub fn take_control_records(&mut self) -> Vec<ControlRecord> {
        std::mem::take(&mut self.control_log)
    }

    // ---- trace

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        std::mem::take(&mut self.trace)
    }

    // ---- event loop

    pub fn next_event_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|Reverse(s)| s.at)
    }

    /// Processes every event up to and including `until`; the clock ends at
    /// `until`. Returns terminal events of non-probe packets.
    pub fn step(&mut self, until: SimTime) -> Vec<FabricEvent> {
        let mut out = Vec::new();
        while let Some(Reverse(head)) = self.queue.peek() {
            if head.at > until {
                break;
            }
            let Reverse(Scheduled { at, event, .. }) = self.queue.pop().expect("peeked");
            self.clock.now = at;
            match event {
                Event::Hop(f) => self.hop(f, &mut out),
                Event::Timer { app, token } => self.with_app(app, |a, ctx| a.on_timer(ctx, token)),
                Event::ProbeTick { balancer } => self.probe_tick(balancer),
                Event::ProbeTimeout { balancer, probe } => self.probe_verdict(&balancer, probe, false),
                Event::Control { tag, action } => {
                    if !self.cancelled.contains(&tag) {
                        self.execute_control(tag, action);
                    }
                }
            }
        }
        self.clock.now = self.clock.now.max(until);
        out
    }

    fn hop(&mut self, mut f: Box<InFlight>, out: &mut Vec<FabricEvent>) {
        let t = self.clock.now;
        if f.idx >= f.path.len() {
            return self.arrive(f, out);
        }
        let item_id = f.path[f.idx].clone();
        let Some(item) = self.items.item(&item_id) else {
            let reason = format!("item `{item_id}` no longer exists");
            return self.lose(f, LossReason::Unreachable { reason }, out);
        };
        let host = item.location.clone();
        let item_tenant = item.tenant_id.clone();
        let lat = self.hop_latency_ms(&host);
        let outcome = if f.duplicate {
            PacketOutcome::Deliver
        } else {
            match self.agents.get_mut(&host) {
                Some(agent) => agent.intercept(&item_id, &f.packet, t),
                None => PacketOutcome::Deliver,
            }
        };
        if !outcome.is_deliver() {
            self.trace.push(TraceRecord {
                at: t,
                item: item_id.clone(),
                item_tenant,
                packet_tenant: f.packet.tenant_id.clone(),
                flow_id: f.packet.flow_id,
                packet_id: f.packet.id,
                kind: f.packet.kind,
                outcome: outcome.label().to_string(),
            });
        }
        let next = t.plus_ms_f64(lat);
        f.idx += 1;
        match outcome {
            PacketOutcome::Deliver => self.schedule(next, Event::Hop(f)),
            PacketOutcome::Drop => self.lose(f, LossReason::Dropped { item: item_id }, out),
            PacketOutcome::Delay { extra_ms } => self.schedule(next.plus_ms_f64(extra_ms), Event::Hop(f)),
            PacketOutcome::DeliverCorrupted { payload } => {
                f.packet.payload = payload;
                f.packet.corrupted = true;
                self.schedule(next, Event::Hop(f));
            }
            PacketOutcome::DeliverAndDuplicate { copy_delay_ms } => {
                let mut copy = f.clone();
                copy.duplicate = true;
                self.schedule(next, Event::Hop(f));
                self.schedule(next.plus_ms_f64(copy_delay_ms), Event::Hop(copy));
            }
        }
    }

    fn arrive(&mut self, mut f: Box<InFlight>, out: &mut Vec<FabricEvent>) {
        let t = self.clock.now;
        match f.dest.clone() {
            Destination::Balancer(b) => {
                let bal = self.topology.balancer(&b).cloned();
                let Some(bal) = bal else {
                    let reason = format!("balancer `{b}` no longer exists");
                    return self.lose(f, LossReason::Unreachable { reason }, out);
                };
                let routed = self.balancer_dispatch(&b).and_then(|backend| {
                    let addr = self.topology.port(&backend).expect("usable backend").address;
                    route_from_subnet(&self.topology, &bal.subnet_id, Vec::new(), addr)
                });
                match routed {
                    Ok(route) => {
                        f.path.extend(route.items);
                        f.dest = route.destination;
                        self.hop(f, out);
                    }
                    Err(e) => self.lose(f, LossReason::Unreachable { reason: e.to_string() }, out),
                }
            }
            Destination::Port(p) => {
                if self.topology.get(&p).is_none() {
                    let reason = format!("`{p}` no longer exists");
                    return self.lose(f, LossReason::Unreachable { reason }, out);
                }
                let InFlight {
                    packet,
                    path,
                    owner,
                    duplicate,
                    ..
                } = *f;
                let delivery = Delivery {
                    packet,
                    at: t,
                    path,
                    port_id: p,
                    duplicate,
                };
                match owner {
                    Owner::None => out.push(FabricEvent::Delivered(delivery)),
                    Owner::App(app) => {
                        out.push(FabricEvent::Delivered(delivery.clone()));
                        self.with_app(app, |a, ctx| a.on_delivery(ctx, delivery));
                    }
                    Owner::Probe {
                        balancer,
                        backend,
                        probe,
                    } => {
                        if !duplicate && !delivery.packet.corrupted {
                            let payload = delivery.packet.payload.clone();
                            let _ = self.reply_owned(
                                &delivery,
                                PacketKind::Response,
                                payload,
                                Owner::ProbeReply {
                                    balancer,
                                    backend,
                                    probe,
                                },
                            );
                        }
                    }
                    Owner::ProbeReply { balancer, probe, .. } => {
                        if !duplicate && !delivery.packet.corrupted {
                            self.probe_verdict(&balancer, probe, true);
                        }
                    }
                }
            }
        }
    }

    fn lose(&mut self, f: Box<InFlight>, reason: LossReason, out: &mut Vec<FabricEvent>) {
        let lost = LostPacket {
            packet: f.packet,
            at: self.clock.now,
            reason,
            duplicate: f.duplicate,
        };
        match f.owner {
            Owner::None => out.push(FabricEvent::Lost(lost)),
            Owner::App(app) => {
                out.push(FabricEvent::Lost(lost.clone()));
                self.with_app(app, |a, ctx| a.on_lost(ctx, lost));
            }
            Owner::Probe { .. } | Owner::ProbeReply { .. } => {}
        }
    }
}
