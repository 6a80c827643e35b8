use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FlowEvent, FlowEventKind};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stddev: f64,
}

impl Stat {
    /// Population mean and standard deviation; zeros for no samples.
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Stat::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Stat {
            mean,
            stddev: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitCounts {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub unreachable: u64,
    pub corrupted: u64,
    pub timed_out: u64,
    pub duplicated: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t_s: u64,
    pub throughput: f64,
    pub mean_latency_ms: f64,
    pub mean_response_ms: f64,
    pub error_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// Successful completions per second of window.
    pub throughput: f64,
    pub latency_ms: Stat,
    pub response_time_ms: Stat,
    pub error_rate: f64,
    /// Counts of events inside the window.
    pub counts: UnitCounts,
    pub series: Vec<SeriesPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("metrics window is empty")]
    EmptyWindow,
}

/// KPIs over `[start, end)`.
///
/// Completions count where they finish (last byte); errors count against
/// the second the failed unit was sent in, matched by `(flow_id,
/// request_id)` anywhere in `events`.
pub fn compute_metrics(events: &[FlowEvent], start: SimTime, end: SimTime) -> Result<MetricsSummary, MetricsError> {
    if end <= start {
        return Err(MetricsError::EmptyWindow);
    }
    let inside = |t: SimTime| t >= start && t < end;
    let window_s = (end - start).as_ms_f64() / 1000.0;
    let buckets = (end - start).as_micros().div_ceil(1_000_000) as usize;
    let bucket = |t: SimTime| ((t - start).as_micros() / 1_000_000) as usize;

    let mut outcome: BTreeMap<(u64, u64), FlowEventKind> = BTreeMap::new();
    for e in events.iter().filter(|e| e.kind.is_terminal()) {
        outcome.entry(e.unit()).or_insert(e.kind);
    }

    let mut counts = UnitCounts::default();
    let mut lat = Vec::new();
    let mut resp = Vec::new();
    let mut done = vec![(0u64, 0.0f64, 0.0f64); buckets];
    let mut sent = vec![(0u64, 0u64); buckets];
    for e in events {
        match e.kind {
            FlowEventKind::Sent if inside(e.t) => {
                counts.sent += 1;
                let b = &mut sent[bucket(e.t)];
                b.0 += 1;
                if outcome.get(&e.unit()).is_some_and(|k| k.is_failure()) {
                    b.1 += 1;
                }
            }
            FlowEventKind::Delivered if inside(e.t) => {
                counts.delivered += 1;
                let first = e.first_byte_t.unwrap_or(e.t);
                let last = e.last_byte_t.unwrap_or(e.t);
                let l = (first - e.sent_at).as_ms_f64();
                let r = (last - e.sent_at).as_ms_f64();
                lat.push(l);
                resp.push(r);
                let b = &mut done[bucket(e.t)];
                b.0 += 1;
                b.1 += l;
                b.2 += r;
            }
            FlowEventKind::Dropped if inside(e.t) => counts.dropped += 1,
            FlowEventKind::Unreachable if inside(e.t) => counts.unreachable += 1,
            FlowEventKind::Corrupted if inside(e.t) => counts.corrupted += 1,
            FlowEventKind::TimedOut if inside(e.t) => counts.timed_out += 1,
            FlowEventKind::Duplicated if inside(e.t) => counts.duplicated += 1,
            _ => {}
        }
    }
    let failed: u64 = sent.iter().map(|b| b.1).sum();
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let series = (0..buckets)
        .map(|i| {
            let (n, l, r) = done[i];
            let span_s = if i + 1 == buckets { window_s - i as f64 } else { 1.0 };
            SeriesPoint {
                t_s: i as u64,
                throughput: n as f64 / span_s,
                mean_latency_ms: if n == 0 { 0.0 } else { l / n as f64 },
                mean_response_ms: if n == 0 { 0.0 } else { r / n as f64 },
                error_rate: ratio(sent[i].1, sent[i].0),
            }
        })
        .collect();
    Ok(MetricsSummary {
        throughput: counts.delivered as f64 / window_s,
        latency_ms: Stat::of(&lat),
        response_time_ms: Stat::of(&resp),
        error_rate: ratio(failed, counts.sent),
        counts,
        series,
    })
}
