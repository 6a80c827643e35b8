use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// Token bucket in packets. Starts full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenBucket {
    pub rate_per_s: f64,
    pub burst: f64,
    pub tokens: f64,
    pub last_refill: SimTime,
}

impl TokenBucket {
    pub fn new(rate_per_s: f64, burst: f64, now: SimTime) -> Self {
        TokenBucket {
            rate_per_s,
            burst,
            tokens: burst,
            last_refill: now,
        }
    }

    /// Burst used when the spec leaves it unset.
    pub fn default_burst(rate_per_s: f64) -> f64 {
        (rate_per_s / 10.0).max(1.0)
    }
}

/// Refills by `rate * elapsed` (capped at the burst size) and admits the
/// packet iff a whole token is available, consuming it.
pub fn rate_admit(bucket: &mut TokenBucket, t: SimTime) -> bool {
    if t > bucket.last_refill {
        let dt_s = (t - bucket.last_refill).as_micros() as f64 / 1e6;
        bucket.tokens = (bucket.tokens + bucket.rate_per_s * dt_s).min(bucket.burst);
        bucket.last_refill = t;
    }
    // Tolerate rounding in the refill sum (0.1 added ten times is < 1).
    if bucket.tokens >= 1.0 - 1e-9 {
        bucket.tokens = (bucket.tokens - 1.0).max(0.0);
        true
    } else {
        false
    }
}
