use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Transport protocol of a simulated packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Tcp,
    Udp,
}

impl std::str::FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tcp" => Ok(Protocol::Tcp),
            "udp" => Ok(Protocol::Udp),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

/// Restricts an injection to one protocol, optionally one service port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolFilter {
    pub protocol: Protocol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_port: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FaultType {
    Loss,
    Delay {
        amount_ms: f64,
        #[serde(default)]
        jitter_ms: f64,
    },
    Corruption {
        #[serde(default = "default_bytes_affected")]
        bytes_affected: usize,
    },
    Duplication,
    RateLimit {
        rate_pkts_per_s: f64,
        /// Defaults to `max(1, rate / 10)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        burst_pkts: Option<f64>,
    },
}

fn default_bytes_affected() -> usize {
    1
}

impl FaultType {
    pub fn name(&self) -> &'static str {
        match self {
            FaultType::Loss => "loss",
            FaultType::Delay { .. } => "delay",
            FaultType::Corruption { .. } => "corruption",
            FaultType::Duplication => "duplication",
            FaultType::RateLimit { .. } => "rate_limit",
        }
    }
}

/// Temporal shape of an injection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Pattern {
    Random,
    Persistent,
    Bursty {
        #[serde(default = "default_period_ms")]
        period_ms: f64,
        #[serde(default = "default_duty")]
        duty_fraction: f64,
    },
    Degradation,
}

fn default_period_ms() -> f64 {
    1000.0
}

fn default_duty() -> f64 {
    0.5
}

impl Pattern {
    pub fn bursty_default() -> Self {
        Pattern::Bursty {
            period_ms: default_period_ms(),
            duty_fraction: default_duty(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Pattern::Random => "random",
            Pattern::Persistent => "persistent",
            Pattern::Bursty { .. } => "bursty",
            Pattern::Degradation => "degradation",
        }
    }
}

/// Pre-injection, injection and post-injection durations in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    #[serde(default)]
    pub pre_ms: u64,
    pub inject_ms: u64,
    #[serde(default)]
    pub post_ms: u64,
}

impl Timing {
    pub fn total_ms(&self) -> u64 {
        self.pre_ms + self.inject_ms + self.post_ms
    }
}

/// What, how hard, on which traffic and when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub fault_type: FaultType,
    #[serde(default = "default_intensity")]
    pub intensity: f64,
    #[serde(default = "default_pattern")]
    pub pattern: Pattern,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol_filter: Option<ProtocolFilter>,
    pub timing: Timing,
    #[serde(default)]
    pub seed: u64,
}

fn default_intensity() -> f64 {
    1.0
}

fn default_pattern() -> Pattern {
    Pattern::Persistent
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaultSpecError {
    #[error("intensity {0} outside [0, 1]")]
    Intensity(f64),
    #[error("bursty duty fraction {0} outside (0, 1]")]
    Duty(f64),
    #[error("bursty period must be positive, got {0}")]
    Period(f64),
    #[error("jitter {jitter_ms} ms exceeds delay amount {amount_ms} ms")]
    Jitter { amount_ms: f64, jitter_ms: f64 },
    #[error("delay amount must be non-negative, got {0}")]
    NegativeDelay(f64),
    #[error("injection window must be longer than zero")]
    EmptyWindow,
    #[error("corruption must affect at least one byte")]
    ZeroBytes,
    #[error("rate limit must be non-negative, got {0}")]
    NegativeRate(f64),
    #[error("rate limit burst must be at least one packet, got {0}")]
    Burst(f64),
}

impl FaultSpec {
    /// Persistent loss over the given window, the most common test-case shape.
    pub fn persistent_loss(timing: Timing) -> Self {
        FaultSpec {
            fault_type: FaultType::Loss,
            intensity: 1.0,
            pattern: Pattern::Persistent,
            protocol_filter: None,
            timing,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), FaultSpecError> {
        if !(0.0..=1.0).contains(&self.intensity) || self.intensity.is_nan() {
            return Err(FaultSpecError::Intensity(self.intensity));
        }
        if self.timing.inject_ms == 0 {
            return Err(FaultSpecError::EmptyWindow);
        }
        if let Pattern::Bursty {
            period_ms,
            duty_fraction,
        } = self.pattern
        {
            if !(period_ms > 0.0) {
                return Err(FaultSpecError::Period(period_ms));
            }
            if !(duty_fraction > 0.0 && duty_fraction <= 1.0) {
                return Err(FaultSpecError::Duty(duty_fraction));
            }
        }
        match self.fault_type {
            FaultType::Delay { amount_ms, jitter_ms } => {
                if !(amount_ms >= 0.0) {
                    return Err(FaultSpecError::NegativeDelay(amount_ms));
                }
                if !(jitter_ms >= 0.0 && jitter_ms <= amount_ms) {
                    return Err(FaultSpecError::Jitter { amount_ms, jitter_ms });
                }
            }
            FaultType::Corruption { bytes_affected: 0 } => {
                return Err(FaultSpecError::ZeroBytes);
            }
            FaultType::RateLimit {
                rate_pkts_per_s,
                burst_pkts,
            } => {
                if !(rate_pkts_per_s >= 0.0) {
                    return Err(FaultSpecError::NegativeRate(rate_pkts_per_s));
                }
                if let Some(b) = burst_pkts {
                    if !(b >= 1.0) {
                        return Err(FaultSpecError::Burst(b));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Factor applied to delay amounts and corrupted byte counts. Persistent
    /// injections hit every packet, so their intensity scales magnitude
    /// instead of probability.
    pub fn magnitude_scale(&self) -> f64 {
        match self.pattern {
            Pattern::Persistent => self.intensity,
            _ => 1.0,
        }
    }
}
