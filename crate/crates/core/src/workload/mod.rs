//! Built-in traffic generators and the KPI calculator.

mod bandwidth;
mod config;
mod events;
mod metrics;
mod reqresp;

pub use bandwidth::BandwidthApp;
pub use config::{Attach, WorkloadConfig, WorkloadError, WorkloadKind, DEFAULT_LINK_RATE_BYTES_PER_S};
pub use events::{FlowEvent, FlowEventKind};
pub use metrics::{compute_metrics, MetricsError, MetricsSummary, SeriesPoint, Stat, UnitCounts};
pub use reqresp::RequestResponseApp;

use crate::fabric::{AppId, Fabric};
use crate::ids::TenantId;

/// Validates `config` against the fabric and starts the generator now.
pub fn deploy_workload(
    fabric: &mut Fabric,
    tenant: &TenantId,
    config: &WorkloadConfig,
) -> Result<AppId, WorkloadError> {
    let target = config.validate(fabric.topology(), tenant)?;
    let app: Box<dyn crate::fabric::TrafficApp> = match &config.kind {
        WorkloadKind::Bandwidth { .. } => Box::new(BandwidthApp::new(tenant.clone(), config.clone(), target)),
        WorkloadKind::RequestResponse { .. } => {
            Box::new(RequestResponseApp::new(tenant.clone(), config.clone(), target))
        }
    };
    Ok(fabric.add_app(app))
}
