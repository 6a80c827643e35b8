use thiserror::Error;

use super::Pattern;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("t = {t_ms} ms is outside the injection window [0, {inject_ms})")]
pub struct OutOfWindow {
    pub t_ms: f64,
    pub inject_ms: u64,
}

/// Probability that a matching packet is affected `t_ms` after the
/// injection window opened.
///
/// Random is flat at `intensity`, Persistent is always 1, Bursty is a square
/// wave that is fully on for the first `duty_fraction` of every period, and
/// Degradation ramps linearly from 0 up to `intensity` across the window.
pub fn activation_probability(pattern: Pattern, intensity: f64, t_ms: f64, inject_ms: u64) -> Result<f64, OutOfWindow> {
    if !(t_ms >= 0.0 && t_ms < inject_ms as f64) {
        return Err(OutOfWindow { t_ms, inject_ms });
    }
    let p = match pattern {
        Pattern::Random => intensity,
        Pattern::Persistent => 1.0,
        Pattern::Bursty {
            period_ms,
            duty_fraction,
        } => {
            if t_ms % period_ms < duty_fraction * period_ms {
                1.0
            } else {
                0.0
            }
        }
        Pattern::Degradation => intensity * (t_ms / inject_ms as f64),
    };
    Ok(p.clamp(0.0, 1.0))
}
