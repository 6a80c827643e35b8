use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::faultengine::FaultSpec;
use crate::ids::TenantId;
use crate::time::SimTime;
use crate::workload::{FlowEvent, MetricsSummary, Stat};

use super::campaign::{CampaignId, CampaignState, ConfigFault, Target};
use super::handle::{HandleId, InjectionPhase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMark {
    pub phase: InjectionPhase,
    /// Relative to the case start.
    pub at_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionOutcome {
    pub handle_id: HandleId,
    pub phase: InjectionPhase,
    pub phases: Vec<PhaseMark>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl InjectionOutcome {
    fn entered(&self, phase: InjectionPhase) -> Option<f64> {
        self.phases.iter().find(|m| m.phase == phase).map(|m| m.at_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub index: u32,
    pub fault_exposed: bool,
    pub throughput: f64,
    pub latency_ms: Stat,
    pub response_time_ms: Stat,
    pub error_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub id: String,
    pub baseline: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<FaultSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_fault: Option<ConfigFault>,
    /// Case start relative to the campaign start, in whole seconds.
    pub start_s: u64,
    /// Length of the measured window.
    pub duration_ms: f64,
    pub aborted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection: Option<InjectionOutcome>,
    /// `None` when the case was stopped before any time elapsed.
    pub metrics: Option<MetricsSummary>,
    pub repetitions: Vec<RepetitionReport>,
}

impl CaseReport {
    /// Phase label of the series bucket starting `t_ms` into the case.
    pub fn phase_at(&self, t_ms: f64) -> &'static str {
        if self.baseline {
            return "baseline";
        }
        let Some(inj) = &self.injection else { return "pre" };
        let reached = |p| inj.entered(p).is_some_and(|at| at <= t_ms);
        if reached(InjectionPhase::Aborted) {
            "aborted"
        } else if reached(InjectionPhase::PostInjection) {
            "post"
        } else if reached(InjectionPhase::Injecting) {
            "injection"
        } else {
            "pre"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub campaign_id: CampaignId,
    pub tenant_id: TenantId,
    #[serde(flatten)]
    pub state: CampaignState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<CaseReport>,
    pub cases: Vec<CaseReport>,
}

impl TestReport {
    fn all_cases(&self) -> impl Iterator<Item = &CaseReport> + '_ {
        self.baseline.iter().chain(self.cases.iter())
    }
}

#[derive(Serialize)]
struct EventLine<'a> {
    case: &'a str,
    #[serde(flatten)]
    event: FlowEvent,
}

/// The three files of a report bundle, rendered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub report_json: String,
    pub series_csv: String,
    pub events_log: String,
}

pub const REPORT_FILE: &str = "report.json";
pub const SERIES_FILE: &str = "series.csv";
pub const EVENTS_FILE: &str = "events.log";

impl ReportBundle {
    /// Renders `report` plus the raw events. Event times are shifted so the
    /// campaign starts at zero.
    pub fn render(report: &TestReport, events: &[(String, FlowEvent)], origin: SimTime) -> Self {
        let mut report_json = serde_json::to_string_pretty(report).expect("report serializes");
        report_json.push('\n');

        let mut series_csv = String::from("t_s,throughput,mean_latency_ms,mean_response_ms,error_rate,phase\n");
        for case in report.all_cases() {
            let Some(m) = &case.metrics else { continue };
            for p in &m.series {
                let _ = writeln!(
                    series_csv,
                    "{},{},{},{},{},{}",
                    case.start_s + p.t_s,
                    p.throughput,
                    p.mean_latency_ms,
                    p.mean_response_ms,
                    p.error_rate,
                    case.phase_at(p.t_s as f64 * 1000.0)
                );
            }
        }

        let shift = |t: SimTime| t.saturating_sub(origin);
        let mut events_log = String::new();
        for (case, e) in events {
            let mut event = e.clone();
            event.t = shift(event.t);
            event.sent_at = shift(event.sent_at);
            event.first_byte_t = event.first_byte_t.map(shift);
            event.last_byte_t = event.last_byte_t.map(shift);
            let line = EventLine { case, event };
            events_log.push_str(&serde_json::to_string(&line).expect("event serializes"));
            events_log.push('\n');
        }
        ReportBundle {
            report_json,
            series_csv,
            events_log,
        }
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(REPORT_FILE), &self.report_json)?;
        std::fs::write(dir.join(SERIES_FILE), &self.series_csv)?;
        std::fs::write(dir.join(EVENTS_FILE), &self.events_log)?;
        Ok(())
    }

    pub fn report(&self) -> serde_json::Result<TestReport> {
        serde_json::from_str(&self.report_json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(injection: Option<InjectionOutcome>) -> CaseReport {
        CaseReport {
            id: "c".into(),
            baseline: false,
            target: None,
            spec: None,
            config_fault: None,
            start_s: 0,
            duration_ms: 0.0,
            aborted: false,
            error: None,
            injection,
            metrics: None,
            repetitions: vec![],
        }
    }

    fn mark(phase: InjectionPhase, at_ms: f64) -> PhaseMark {
        PhaseMark { phase, at_ms }
    }

    #[test]
    fn phase_labels_follow_the_marks() {
        let c = case(Some(InjectionOutcome {
            handle_id: 1,
            phase: InjectionPhase::Completed,
            phases: vec![
                mark(InjectionPhase::PreInjection, 0.0),
                mark(InjectionPhase::Injecting, 10_000.0),
                mark(InjectionPhase::PostInjection, 30_000.0),
                mark(InjectionPhase::Completed, 40_000.0),
            ],
            error: None,
        }));
        assert_eq!(c.phase_at(9_000.0), "pre");
        assert_eq!(c.phase_at(10_000.0), "injection");
        assert_eq!(c.phase_at(29_000.0), "injection");
        assert_eq!(c.phase_at(30_000.0), "post");
    }

    #[test]
    fn no_injection_reads_as_pre() {
        assert_eq!(case(None).phase_at(5.0), "pre");
    }
}
