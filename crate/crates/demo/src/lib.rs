//! Browser bindings for the simulator. The page in `www/` calls three
//! functions: draw a pattern's activation curve, show a tenant's topology
//! graph and run a small campaign against a bundled fabric.

use wasm_bindgen::prelude::*;

use faultfabric::fabric::{FabricConfig, Topology, TopologyDocument};
use faultfabric::faultengine::{activation_probability, Pattern};
use faultfabric::mapper::get_network_topology;
use faultfabric::orchestrator::PlanDocument;
use faultfabric::{fixtures, Fabric, Orchestrator, TenantId};

fn fixture(name: &str) -> Result<&'static str, String> {
    fixtures::by_name(name).ok_or_else(|| format!("unknown fixture `{name}`"))
}

/// `samples` evenly spaced activation probabilities across the window.
pub fn sample_curve(pattern_json: &str, intensity: f64, inject_ms: u64, samples: usize) -> Result<Vec<f64>, String> {
    let pattern: Pattern = serde_json::from_str(pattern_json).map_err(|e| e.to_string())?;
    if inject_ms == 0 || samples == 0 {
        return Err("window and sample count must be positive".into());
    }
    let step = inject_ms as f64 / samples as f64;
    (0..samples)
        .map(|i| activation_probability(pattern, intensity, i as f64 * step, inject_ms).map_err(|e| e.to_string()))
        .collect()
}

/// Pretty-printed tenant graph for a bundled fixture.
pub fn graph_json(fixture_name: &str, tenant: &str) -> Result<String, String> {
    let doc = TopologyDocument::from_json(fixture(fixture_name)?).map_err(|e| e.to_string())?;
    let topo = Topology::from_document(doc).map_err(|e| e.to_string())?;
    let graph = get_network_topology(&topo, &TenantId::new(tenant)).map_err(|e| e.to_string())?;
    serde_json::to_string_pretty(&graph).map_err(|e| e.to_string())
}

/// Runs a campaign to completion and returns its report bundle as JSON.
pub fn campaign_json(fixture_name: &str, plan_json: &str, seed: u64) -> Result<String, String> {
    let doc: PlanDocument = serde_json::from_str(plan_json).map_err(|e| format!("plan: {e}"))?;
    let config = FabricConfig {
        seed,
        ..FabricConfig::default()
    };
    let fabric = Fabric::from_json(fixture(fixture_name)?, config).map_err(|e| e.to_string())?;
    let mut o = Orchestrator::new(fabric);
    let id = o.start_tests(&doc.tenant_id, doc.plan).map_err(|e| e.to_string())?;
    o.run_campaign(id).map_err(|e| e.to_string())?;
    let bundle = o.report(id).map_err(|e| e.to_string())?;
    serde_json::to_string(&bundle).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn activation_curve(pattern_json: &str, intensity: f64, inject_ms: u32, samples: u32) -> Result<Vec<f64>, JsValue> {
    sample_curve(pattern_json, intensity, inject_ms as u64, samples as usize).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn topology_graph(fixture_name: &str, tenant: &str) -> Result<String, JsValue> {
    graph_json(fixture_name, tenant).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn run_campaign(fixture_name: &str, plan_json: &str, seed: u32) -> Result<String, JsValue> {
    campaign_json(fixture_name, plan_json, seed as u64).map_err(|e| JsValue::from_str(&e))
}
