use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fabric::resources::DeviceOwner;
use crate::fabric::Topology;
use crate::faultengine::Protocol;
use crate::ids::{ResourceId, TenantId};

/// Streaming rate between first and last byte of a response.
pub const DEFAULT_LINK_RATE_BYTES_PER_S: f64 = 10_000_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WorkloadKind {
    Bandwidth {
        #[serde(default = "udp")]
        protocol: Protocol,
        pkts_per_s: f64,
        #[serde(default = "default_payload")]
        payload_bytes: usize,
        /// Runs until stopped when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration_ms: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        service_port: Option<u16>,
    },
    RequestResponse {
        concurrent_users: u32,
        reqs_per_min: f64,
        #[serde(default)]
        think_time_ms: u64,
        #[serde(default = "default_response")]
        response_payload_bytes: usize,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
        #[serde(default = "default_request")]
        request_payload_bytes: usize,
        #[serde(default = "default_http")]
        service_port: u16,
    },
}

fn udp() -> Protocol {
    Protocol::Udp
}
fn default_payload() -> usize {
    512
}
fn default_response() -> usize {
    10_240
}
fn default_timeout() -> u64 {
    10_000
}
fn default_request() -> usize {
    256
}
fn default_http() -> u16 {
    80
}

/// Where a workload plugs in. Exactly one server-side field is set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attach {
    pub client_port_ids: Vec<ResourceId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_port_id: Option<ResourceId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balancer_id: Option<ResourceId>,
    /// Reach the server through this floating IP's public address.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floating_ip_id: Option<ResourceId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub kind: WorkloadKind,
    pub attach: Attach,
    #[serde(default = "default_link_rate")]
    pub link_rate_bytes_per_s: f64,
}

fn default_link_rate() -> f64 {
    DEFAULT_LINK_RATE_BYTES_PER_S
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("bad attach point: {0}")]
    BadAttach(String),
    #[error("`{id}` does not belong to tenant `{tenant}`")]
    NotOwner { id: ResourceId, tenant: TenantId },
    #[error("invalid workload: {0}")]
    Invalid(String),
}

impl WorkloadConfig {
    pub fn bandwidth(client: &str, server: &str, pkts_per_s: f64, duration_ms: Option<u64>) -> Self {
        WorkloadConfig {
            kind: WorkloadKind::Bandwidth {
                protocol: Protocol::Udp,
                pkts_per_s,
                payload_bytes: default_payload(),
                duration_ms,
                service_port: None,
            },
            attach: Attach {
                client_port_ids: vec![ResourceId::from(client)],
                server_port_id: Some(ResourceId::from(server)),
                ..Default::default()
            },
            link_rate_bytes_per_s: DEFAULT_LINK_RATE_BYTES_PER_S,
        }
    }

    pub fn request_response(client: &str, attach: Attach, users: u32, reqs_per_min: f64) -> Self {
        let mut attach = attach;
        if attach.client_port_ids.is_empty() {
            attach.client_port_ids.push(ResourceId::from(client));
        }
        WorkloadConfig {
            kind: WorkloadKind::RequestResponse {
                concurrent_users: users,
                reqs_per_min,
                think_time_ms: 0,
                response_payload_bytes: default_response(),
                timeout_ms: default_timeout(),
                request_payload_bytes: default_request(),
                service_port: default_http(),
            },
            attach,
            link_rate_bytes_per_s: DEFAULT_LINK_RATE_BYTES_PER_S,
        }
    }

    /// Longest time a unit can stay in flight: the drain after stopping.
    pub fn drain_ms(&self) -> u64 {
        match self.kind {
            WorkloadKind::Bandwidth { .. } => 1000,
            WorkloadKind::RequestResponse { timeout_ms, .. } => timeout_ms + 1000,
        }
    }

    /// Checks rates and attach points; returns the address clients target.
    pub fn validate(&self, topo: &Topology, tenant: &TenantId) -> Result<Ipv4Addr, WorkloadError> {
        match self.kind {
            WorkloadKind::Bandwidth {
                pkts_per_s,
                payload_bytes,
                ..
            } => {
                if !(pkts_per_s > 0.0 && pkts_per_s.is_finite()) {
                    return Err(WorkloadError::Invalid("pkts_per_s must be > 0".into()));
                }
                if payload_bytes == 0 {
                    return Err(WorkloadError::Invalid("payload_bytes must be > 0".into()));
                }
            }
            WorkloadKind::RequestResponse {
                concurrent_users,
                reqs_per_min,
                response_payload_bytes,
                request_payload_bytes,
                timeout_ms,
                ..
            } => {
                if concurrent_users == 0 {
                    return Err(WorkloadError::Invalid("concurrent_users must be > 0".into()));
                }
                if !(reqs_per_min > 0.0 && reqs_per_min.is_finite()) {
                    return Err(WorkloadError::Invalid("reqs_per_min must be > 0".into()));
                }
                if response_payload_bytes == 0 || request_payload_bytes == 0 {
                    return Err(WorkloadError::Invalid("payload sizes must be > 0".into()));
                }
                if timeout_ms == 0 {
                    return Err(WorkloadError::Invalid("timeout_ms must be > 0".into()));
                }
            }
        }
        if !(self.link_rate_bytes_per_s > 0.0) {
            return Err(WorkloadError::Invalid("link rate must be > 0".into()));
        }
        let a = &self.attach;
        if a.client_port_ids.is_empty() {
            return Err(WorkloadError::BadAttach("no client port".into()));
        }
        let owned = |id: &ResourceId| -> Result<(), WorkloadError> {
            match topo.owner(id) {
                Some(t) if t == tenant => Ok(()),
                Some(_) => Err(WorkloadError::NotOwner {
                    id: id.clone(),
                    tenant: tenant.clone(),
                }),
                None => Err(WorkloadError::BadAttach(format!("`{id}` does not exist"))),
            }
        };
        let compute_port = |id: &ResourceId| -> Result<Ipv4Addr, WorkloadError> {
            owned(id)?;
            match topo.port(id) {
                Some(p) if p.device_owner == DeviceOwner::ComputeNova => Ok(p.address),
                _ => Err(WorkloadError::BadAttach(format!("`{id}` is not a compute port"))),
            }
        };
        for c in &a.client_port_ids {
            compute_port(c)?;
        }
        let set = [&a.server_port_id, &a.balancer_id, &a.floating_ip_id]
            .iter()
            .filter(|x| x.is_some())
            .count();
        if set != 1 {
            return Err(WorkloadError::BadAttach(
                "set exactly one of server_port_id, balancer_id, floating_ip_id".into(),
            ));
        }
        if let Some(s) = &a.server_port_id {
            return compute_port(s);
        }
        if let Some(b) = &a.balancer_id {
            owned(b)?;
            return topo
                .balancer(b)
                .map(|b| b.address)
                .ok_or_else(|| WorkloadError::BadAttach(format!("`{b}` is not a balancer")));
        }
        let f = a.floating_ip_id.as_ref().expect("counted");
        owned(f)?;
        topo.floating_ip(f)
            .map(|f| f.address)
            .ok_or_else(|| WorkloadError::BadAttach(format!("`{f}` is not a floating ip")))
    }
}
