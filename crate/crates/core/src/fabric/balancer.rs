//! Round-robin dispatch with a probe-driven health monitor.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::resources::Balancer;
use crate::ids::ResourceId;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendHealth {
    pub healthy: bool,
    pub consecutive_failures: u32,
}

impl Default for BackendHealth {
    fn default() -> Self {
        BackendHealth {
            healthy: true,
            consecutive_failures: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthTransition {
    pub at: SimTime,
    pub balancer_id: ResourceId,
    pub backend_port_id: ResourceId,
    pub healthy: bool,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct BalancerState {
    cursor: usize,
    pub health: BTreeMap<ResourceId, BackendHealth>,
    /// Probes awaiting a reply, by probe number.
    pub outstanding: BTreeMap<u64, ResourceId>,
}

impl BalancerState {
    pub fn new(b: &Balancer) -> Self {
        BalancerState {
            cursor: 0,
            health: b
                .backend_port_ids
                .iter()
                .map(|p| (p.clone(), BackendHealth::default()))
                .collect(),
            outstanding: BTreeMap::new(),
        }
    }

    /// Next healthy backend after the cursor, skipping any `usable` rejects.
    pub fn pick(&mut self, b: &Balancer, usable: impl Fn(&ResourceId) -> bool) -> Option<ResourceId> {
        let n = b.backend_port_ids.len();
        for k in 0..n {
            let i = (self.cursor + k) % n;
            let id = &b.backend_port_ids[i];
            let healthy = self.health.get(id).is_none_or(|h| h.healthy);
            if healthy && usable(id) {
                self.cursor = i + 1;
                return Some(id.clone());
            }
        }
        None
    }

    /// Records a probe verdict; returns the new health if it flipped.
    pub fn record(&mut self, backend: &ResourceId, ok: bool, max_retries: u32) -> Option<bool> {
        let h = self.health.entry(backend.clone()).or_default();
        if ok {
            h.consecutive_failures = 0;
            if !h.healthy {
                h.healthy = true;
                return Some(true);
            }
        } else {
            h.consecutive_failures += 1;
            if h.healthy && h.consecutive_failures >= max_retries {
                h.healthy = false;
                return Some(false);
            }
        }
        None
    }
}
