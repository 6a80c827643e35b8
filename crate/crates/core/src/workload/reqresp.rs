use std::any::Any;
use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use super::{FlowEvent, FlowEventKind, WorkloadConfig, WorkloadKind};
use crate::fabric::{filler_payload, AppContext, Delivery, LostPacket, Packet, PacketKind, TrafficApp};
use crate::faultengine::Protocol;
use crate::ids::{ResourceId, TenantId};
use crate::time::SimTime;

const ISSUE: u64 = 0;
const TIMEOUT: u64 = 1 << 60;
const COMPLETE: u64 = 2 << 60;
const MASK: u64 = (1 << 60) - 1;

#[derive(Debug, Clone)]
struct Pending {
    user: u32,
    packet_id: Option<u64>,
    sent_at: SimTime,
    first_byte: Option<SimTime>,
}

/// Closed-loop web-style load: each user sends a request, waits for the full
/// response (or a timeout), then issues the next one on its pacing grid.
#[derive(Debug)]
pub struct RequestResponseApp {
    tenant: TenantId,
    config: WorkloadConfig,
    target: Ipv4Addr,
    stopped: bool,
    next_request: u64,
    pending: BTreeMap<u64, Pending>,
    events: Vec<FlowEvent>,
}

struct Params {
    users: u32,
    interval_ms: f64,
    think_ms: u64,
    response_bytes: usize,
    request_bytes: usize,
    timeout_ms: u64,
    service_port: u16,
}

impl RequestResponseApp {
    pub fn new(tenant: TenantId, config: WorkloadConfig, target: Ipv4Addr) -> Self {
        RequestResponseApp {
            tenant,
            config,
            target,
            stopped: false,
            next_request: 0,
            pending: BTreeMap::new(),
            events: Vec::new(),
        }
    }

    fn params(&self) -> Params {
        match self.config.kind {
            WorkloadKind::RequestResponse {
                concurrent_users,
                reqs_per_min,
                think_time_ms,
                response_payload_bytes,
                timeout_ms,
                request_payload_bytes,
                service_port,
            } => Params {
                users: concurrent_users,
                // Each user's share of the aggregate rate.
                interval_ms: 60_000.0 * concurrent_users as f64 / reqs_per_min,
                think_ms: think_time_ms,
                response_bytes: response_payload_bytes,
                request_bytes: request_payload_bytes,
                timeout_ms,
                service_port,
            },
            _ => unreachable!("request/response app built from matching config"),
        }
    }

    pub fn in_flight(&self) -> usize {
        self.pending.len()
    }

    fn flow_of(&self, ctx: &AppContext<'_>, user: u32) -> u64 {
        ((ctx.app_id() + 1) << 20) | user as u64
    }

    fn client_of(&self, user: u32) -> ResourceId {
        let c = &self.config.attach.client_port_ids;
        c[user as usize % c.len()].clone()
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        kind: FlowEventKind,
        t: SimTime,
        flow_id: u64,
        request_id: u64,
        packet_id: Option<u64>,
        sent_at: SimTime,
        bytes: Option<(SimTime, SimTime)>,
    ) {
        self.events.push(FlowEvent {
            kind,
            t,
            tenant_id: self.tenant.clone(),
            flow_id,
            request_id,
            packet_id,
            sent_at,
            first_byte_t: bytes.map(|b| b.0),
            last_byte_t: bytes.map(|b| b.1),
        });
    }

    fn issue(&mut self, ctx: &mut AppContext<'_>, user: u32) {
        if self.stopped {
            return;
        }
        let p = self.params();
        let rid = self.next_request;
        self.next_request += 1;
        let flow = self.flow_of(ctx, user);
        let now = ctx.now();
        let mut packet = Packet::new(
            self.tenant.clone(),
            self.client_of(user),
            self.target,
            Protocol::Tcp,
            Some(p.service_port),
            PacketKind::Request,
            filler_payload(p.request_bytes, rid),
        );
        packet.flow_id = flow;
        packet.request_id = Some(rid);
        match ctx.send(packet) {
            Ok(id) => {
                self.push(FlowEventKind::Sent, now, flow, rid, Some(id), now, None);
                self.pending.insert(
                    rid,
                    Pending {
                        user,
                        packet_id: Some(id),
                        sent_at: now,
                        first_byte: None,
                    },
                );
                ctx.set_timer(now.plus_ms(p.timeout_ms), TIMEOUT | rid);
            }
            Err(_) => {
                self.push(FlowEventKind::Sent, now, flow, rid, None, now, None);
                self.push(FlowEventKind::Unreachable, now, flow, rid, None, now, None);
                self.schedule_next(ctx, user, now, now, false);
            }
        }
    }

    /// Next request of `user`: one pacing interval after the last send, but
    /// never before the think time after completion. Timeouts retry at once.
    fn schedule_next(&mut self, ctx: &mut AppContext<'_>, user: u32, sent_at: SimTime, done: SimTime, timed_out: bool) {
        let p = self.params();
        let at = if timed_out {
            done
        } else {
            sent_at.plus_ms_f64(p.interval_ms).max(done.plus_ms(p.think_ms))
        };
        ctx.set_timer(at, ISSUE | user as u64);
    }

    fn finish(&mut self, ctx: &mut AppContext<'_>, rid: u64, kind: FlowEventKind, bytes: Option<(SimTime, SimTime)>) {
        let Some(pend) = self.pending.remove(&rid) else { return };
        let now = ctx.now();
        let flow = self.flow_of(ctx, pend.user);
        self.push(kind, now, flow, rid, pend.packet_id, pend.sent_at, bytes);
        self.schedule_next(ctx, pend.user, pend.sent_at, now, kind == FlowEventKind::TimedOut);
    }
}

impl TrafficApp for RequestResponseApp {
    fn tenant(&self) -> &TenantId {
        &self.tenant
    }

    fn start(&mut self, ctx: &mut AppContext<'_>) {
        let p = self.params();
        let now = ctx.now();
        for u in 0..p.users {
            let offset = p.interval_ms * u as f64 / p.users as f64;
            ctx.set_timer(now.plus_ms_f64(offset), ISSUE | u as u64);
        }
    }

    fn on_delivery(&mut self, ctx: &mut AppContext<'_>, d: Delivery) {
        let Some(rid) = d.packet.request_id else { return };
        if d.duplicate {
            let flow = d.packet.flow_id;
            self.push(
                FlowEventKind::Duplicated,
                d.at,
                flow,
                rid,
                Some(d.packet.id),
                d.packet.sent_at,
                None,
            );
            return;
        }
        match d.packet.kind {
            PacketKind::Request => {
                if !self.pending.get(&rid).is_some_and(|p| p.first_byte.is_none()) {
                    return;
                }
                if d.packet.corrupted {
                    // The server rejects the request outright.
                    self.finish(ctx, rid, FlowEventKind::Corrupted, None);
                    return;
                }
                let size = self.params().response_bytes;
                let _ = ctx.reply(&d, PacketKind::Response, filler_payload(size, rid ^ 0xff));
            }
            PacketKind::Response => {
                let Some(pend) = self.pending.get_mut(&rid) else { return };
                if pend.first_byte.is_some() {
                    return;
                }
                if d.packet.corrupted {
                    self.finish(ctx, rid, FlowEventKind::Corrupted, None);
                    return;
                }
                pend.first_byte = Some(d.at);
                let stream_ms = d.packet.size() as f64 * 1000.0 / self.config.link_rate_bytes_per_s;
                ctx.set_timer(d.at.plus_ms_f64(stream_ms), COMPLETE | rid);
            }
            PacketKind::Datagram => {}
        }
    }

    fn on_lost(&mut self, _ctx: &mut AppContext<'_>, _lost: LostPacket) {
        // Lost halves surface as timeouts, as a real client would see them.
    }

    fn on_timer(&mut self, ctx: &mut AppContext<'_>, token: u64) {
        let id = token & MASK;
        match token & !MASK {
            ISSUE => self.issue(ctx, id as u32),
            TIMEOUT => {
                if self.pending.get(&id).is_some_and(|p| p.first_byte.is_none()) {
                    self.finish(ctx, id, FlowEventKind::TimedOut, None);
                }
            }
            COMPLETE => {
                let first = self.pending.get(&id).and_then(|p| p.first_byte);
                if let Some(first) = first {
                    let now = ctx.now();
                    self.finish(ctx, id, FlowEventKind::Delivered, Some((first, now)));
                }
            }
            _ => {}
        }
    }

    fn stop(&mut self, _ctx: &mut AppContext<'_>) {
        self.stopped = true;
    }

    fn drain_flow_events(&mut self) -> Vec<FlowEvent> {
        std::mem::take(&mut self.events)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
