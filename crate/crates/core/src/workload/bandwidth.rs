use std::any::Any;
use std::net::Ipv4Addr;

use super::{FlowEvent, FlowEventKind, WorkloadConfig, WorkloadKind};
use crate::fabric::{filler_payload, AppContext, Delivery, LossReason, LostPacket, Packet, PacketKind, TrafficApp};
use crate::ids::TenantId;
use crate::time::SimTime;

/// Constant-rate datagram stream from each client port to the target.
#[derive(Debug)]
pub struct BandwidthApp {
    tenant: TenantId,
    config: WorkloadConfig,
    target: Ipv4Addr,
    started_at: SimTime,
    sent: u64,
    stopped: bool,
    events: Vec<FlowEvent>,
}

impl BandwidthApp {
    pub fn new(tenant: TenantId, config: WorkloadConfig, target: Ipv4Addr) -> Self {
        BandwidthApp {
            tenant,
            config,
            target,
            started_at: SimTime::ZERO,
            sent: 0,
            stopped: false,
            events: Vec::new(),
        }
    }

    fn params(&self) -> (f64, usize, Option<u64>) {
        match self.config.kind {
            WorkloadKind::Bandwidth {
                pkts_per_s,
                payload_bytes,
                duration_ms,
                ..
            } => (pkts_per_s, payload_bytes, duration_ms),
            _ => unreachable!("bandwidth app built from bandwidth config"),
        }
    }

    /// Send time of the i-th datagram of each client stream.
    fn slot(&self, i: u64) -> SimTime {
        let (rate, _, _) = self.params();
        self.started_at + SimTime::from_micros((i as f64 * 1e6 / rate).round() as u64)
    }

    fn event(&mut self, kind: FlowEventKind, t: SimTime, p: &Packet) {
        self.events.push(FlowEvent {
            kind,
            t,
            tenant_id: self.tenant.clone(),
            flow_id: p.flow_id,
            request_id: p.request_id.unwrap_or(0),
            packet_id: Some(p.id),
            sent_at: p.sent_at,
            first_byte_t: (kind == FlowEventKind::Delivered).then_some(t),
            last_byte_t: (kind == FlowEventKind::Delivered).then_some(t),
        });
    }

    fn fire(&mut self, ctx: &mut AppContext<'_>, i: u64) {
        let (_, payload_bytes, duration) = self.params();
        if self.stopped {
            return;
        }
        if let Some(d) = duration {
            if self.slot(i) >= self.started_at.plus_ms(d) {
                return;
            }
        }
        let (protocol, service_port) = match self.config.kind {
            WorkloadKind::Bandwidth {
                protocol, service_port, ..
            } => (protocol, service_port),
            _ => unreachable!(),
        };
        let clients = self.config.attach.client_port_ids.clone();
        for (c, client) in clients.iter().enumerate() {
            let mut p = Packet::new(
                self.tenant.clone(),
                client.clone(),
                self.target,
                protocol,
                service_port,
                PacketKind::Datagram,
                filler_payload(payload_bytes, i),
            );
            p.flow_id = ((ctx.app_id() + 1) << 20) | c as u64;
            p.request_id = Some(i);
            let now = ctx.now();
            match ctx.send(p.clone()) {
                Ok(id) => {
                    p.id = id;
                    p.sent_at = now;
                    self.event(FlowEventKind::Sent, now, &p);
                }
                Err(_) => {
                    p.sent_at = now;
                    self.event(FlowEventKind::Sent, now, &p);
                    self.event(FlowEventKind::Unreachable, now, &p);
                }
            }
            self.sent += 1;
        }
        ctx.set_timer(self.slot(i + 1), i + 1);
    }
}

impl TrafficApp for BandwidthApp {
    fn tenant(&self) -> &TenantId {
        &self.tenant
    }

    fn start(&mut self, ctx: &mut AppContext<'_>) {
        self.started_at = ctx.now();
        ctx.set_timer(self.started_at, 0);
    }

    fn on_delivery(&mut self, _ctx: &mut AppContext<'_>, d: Delivery) {
        let kind = if d.duplicate {
            FlowEventKind::Duplicated
        } else if d.packet.corrupted {
            FlowEventKind::Corrupted
        } else {
            FlowEventKind::Delivered
        };
        self.event(kind, d.at, &d.packet);
    }

    fn on_lost(&mut self, _ctx: &mut AppContext<'_>, lost: LostPacket) {
        if lost.duplicate {
            return;
        }
        let kind = match lost.reason {
            LossReason::Dropped { .. } => FlowEventKind::Dropped,
            LossReason::Unreachable { .. } => FlowEventKind::Unreachable,
        };
        self.event(kind, lost.at, &lost.packet);
    }

    fn on_timer(&mut self, ctx: &mut AppContext<'_>, token: u64) {
        self.fire(ctx, token);
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
