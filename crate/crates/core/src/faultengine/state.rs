use serde::{Deserialize, Serialize};

use super::{activation_probability, corrupt_payload, matches_filter, rate_admit, FaultSpec, FaultType, TokenBucket};
use crate::fabric::Packet;
use crate::rng::{fold_label, DetRng};
use crate::time::SimTime;

/// What happens to one packet at one injected item.
#[derive(Debug, Clone, PartialEq)]
pub enum PacketOutcome {
    Deliver,
    Drop,
    Delay { extra_ms: f64 },
    DeliverCorrupted { payload: Vec<u8> },
    DeliverAndDuplicate { copy_delay_ms: f64 },
}

impl PacketOutcome {
    pub fn is_deliver(&self) -> bool {
        matches!(self, PacketOutcome::Deliver)
    }

    pub fn label(&self) -> &'static str {
        match self {
            PacketOutcome::Deliver => "deliver",
            PacketOutcome::Drop => "drop",
            PacketOutcome::Delay { .. } => "delay",
            PacketOutcome::DeliverCorrupted { .. } => "corrupt",
            PacketOutcome::DeliverAndDuplicate { .. } => "duplicate",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionCounters {
    pub seen: u64,
    pub affected: u64,
    pub duplicated: u64,
}

/// Per-item injection state owned by exactly one agent.
#[derive(Debug, Clone)]
pub struct ItemInjectionState {
    pub spec: FaultSpec,
    /// Opening of the injection window.
    pub started_at: SimTime,
    ends_at: SimTime,
    rng: DetRng,
    bucket: Option<TokenBucket>,
    /// Extra delay of a duplicated copy: one hop of the owning item.
    pub duplicate_delay_ms: f64,
    pub counters: InjectionCounters,
}

impl ItemInjectionState {
    /// Window opens at `window_start` and lasts `inject_ms`.
    pub fn starting_at(spec: FaultSpec, window_start: SimTime, rng_seed: u64) -> Self {
        let ends_at = window_start.plus_ms(spec.timing.inject_ms);
        let bucket = match spec.fault_type {
            FaultType::RateLimit {
                rate_pkts_per_s,
                burst_pkts,
            } => Some(TokenBucket::new(
                rate_pkts_per_s,
                burst_pkts.unwrap_or_else(|| TokenBucket::default_burst(rate_pkts_per_s)),
                window_start,
            )),
            _ => None,
        };
        ItemInjectionState {
            spec,
            started_at: window_start,
            ends_at,
            rng: DetRng::new(rng_seed),
            bucket,
            duplicate_delay_ms: 0.5,
            counters: InjectionCounters::default(),
        }
    }

    /// Places the whole pre/inject/post timeline at `origin`.
    pub fn from_origin(spec: FaultSpec, origin: SimTime, rng_seed: u64) -> Self {
        let start = origin.plus_ms(spec.timing.pre_ms);
        Self::starting_at(spec, start, rng_seed)
    }

    /// Seed for an item's stream: global seed, spec seed and item id.
    pub fn seed_for(global_seed: u64, spec_seed: u64, item: &str) -> u64 {
        fold_label(global_seed ^ spec_seed.rotate_left(17), item)
    }

    pub fn ends_at(&self) -> SimTime {
        self.ends_at
    }

    pub fn in_window(&self, t: SimTime) -> bool {
        t >= self.started_at && t < self.ends_at
    }

    pub fn tokens(&self) -> Option<f64> {
        self.bucket.as_ref().map(|b| b.tokens)
    }
}

/// Decides the fate of one packet at time `t`.
///
/// Outside the window or outside the protocol filter the packet passes
/// untouched. Otherwise one uniform draw is compared against the pattern's
/// activation probability; rate limiting skips the draw and consults the
/// token bucket whenever the pattern is active at all.
pub fn apply_fault(state: &mut ItemInjectionState, packet: &Packet, t: SimTime) -> PacketOutcome {
    if !state.in_window(t) {
        return PacketOutcome::Deliver;
    }
    if !matches_filter(packet, state.spec.protocol_filter.as_ref()) {
        return PacketOutcome::Deliver;
    }
    state.counters.seen += 1;
    let since_ms = (t - state.started_at).as_ms_f64();
    let p = activation_probability(
        state.spec.pattern,
        state.spec.intensity,
        since_ms,
        state.spec.timing.inject_ms,
    )
    .unwrap_or(0.0);

    if let Some(bucket) = state.bucket.as_mut() {
        if p <= 0.0 || rate_admit(bucket, t) {
            return PacketOutcome::Deliver;
        }
        state.counters.affected += 1;
        return PacketOutcome::Drop;
    }

    let u = state.rng.next_f64();
    if u >= p {
        return PacketOutcome::Deliver;
    }
    let scale = state.spec.magnitude_scale();
    let outcome = match state.spec.fault_type {
        FaultType::Loss => PacketOutcome::Drop,
        FaultType::Delay { amount_ms, jitter_ms } => {
            let jitter = if jitter_ms > 0.0 {
                state.rng.uniform(-jitter_ms, jitter_ms) * scale
            } else {
                0.0
            };
            PacketOutcome::Delay {
                extra_ms: (amount_ms * scale + jitter).max(0.0),
            }
        }
        FaultType::Corruption { bytes_affected } => {
            let bytes = ((bytes_affected as f64) * scale).ceil().max(1.0) as usize;
            match corrupt_payload(&packet.payload, bytes, &mut state.rng) {
                Ok(payload) => PacketOutcome::DeliverCorrupted { payload },
                // Nothing to corrupt.
                Err(_) => return PacketOutcome::Deliver,
            }
        }
        FaultType::Duplication => {
            state.counters.duplicated += 1;
            PacketOutcome::DeliverAndDuplicate {
                copy_delay_ms: state.duplicate_delay_ms,
            }
        }
        FaultType::RateLimit { .. } => unreachable!("handled by the bucket branch"),
    };
    state.counters.affected += 1;
    outcome
}
