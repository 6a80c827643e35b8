//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Set FAULTFABRIC_SEED to vary the global seed.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use faultfabric::fabric::resources::ResourceKind;
use faultfabric::fabric::{Fabric, FabricConfig, TopologyDocument};
use faultfabric::faultengine::{FaultSpec, FaultType, Pattern, Timing};
use faultfabric::fixtures;
use faultfabric::ids::{ResourceId, TenantId};
use faultfabric::mapper::{build_item_map, resolve_items};
use faultfabric::orchestrator::{
    CampaignId, ConfigFault, Orchestrator, Plan, ReportBundle, Target, TestCase, TestReport,
};
use faultfabric::rng::DetRng;
use faultfabric::time::SimTime;
use faultfabric::workload::{deploy_workload, Attach, FlowEvent, FlowEventKind, WorkloadConfig, WorkloadKind};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn orch(text: &str, seed: u64) -> Orchestrator {
    let config = FabricConfig {
        seed,
        ..FabricConfig::default()
    };
    Orchestrator::new(Fabric::from_json(text, config).unwrap())
}

fn timing(pre: u64, inject: u64, post: u64) -> Timing {
    Timing {
        pre_ms: pre,
        inject_ms: inject,
        post_ms: post,
    }
}

fn spec(fault_type: FaultType, pattern: Pattern, intensity: f64, t: Timing) -> FaultSpec {
    FaultSpec {
        fault_type,
        intensity,
        pattern,
        protocol_filter: None,
        timing: t,
        seed: 0,
    }
}

fn request_response(client: &str, attach: Attach, users: u32, reqs_per_min: f64, timeout: u64) -> WorkloadConfig {
    let mut w = WorkloadConfig::request_response(client, attach, users, reqs_per_min);
    if let WorkloadKind::RequestResponse { timeout_ms, .. } = &mut w.kind {
        *timeout_ms = timeout;
    }
    w
}

fn traffic_case(id: &str, kind: ResourceKind, target: &str, spec: FaultSpec, workload: WorkloadConfig) -> TestCase {
    TestCase {
        id: id.into(),
        target: Some(Target {
            kind,
            id: target.into(),
        }),
        spec: Some(spec),
        config_fault: None,
        workload,
        repetitions: 1,
        inject_at_repetition: None,
        repetition_ms: None,
    }
}

fn run_plan(o: &mut Orchestrator, tenant: &str, plan: Plan) -> (CampaignId, ReportBundle, TestReport) {
    let id = o.start_tests(&TenantId::from(tenant), plan).unwrap();
    o.run_campaign(id).unwrap();
    let bundle = o.report(id).unwrap();
    let report = bundle.report().unwrap();
    (id, bundle, report)
}

fn case_events(bundle: &ReportBundle, case: &str) -> Vec<FlowEvent> {
    bundle
        .events_log
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["case"] == case)
        .map(|v| serde_json::from_value(v).unwrap())
        .collect()
}

/// Runs a bandwidth flow from `src` to `dst` alongside an optional injection
/// on `target`; returns the flow events.
fn direct_run(
    text: &str,
    seed: u64,
    tenant: &str,
    flow: (&str, &str, f64, u64),
    injection: Option<(ResourceKind, &str, FaultSpec)>,
) -> (Orchestrator, Vec<FlowEvent>) {
    let mut o = orch(text, seed);
    let t = TenantId::from(tenant);
    if let Some((kind, id, spec)) = injection {
        o.inject_resource(&t, kind, &ResourceId::from(id), spec).unwrap();
    }
    let w = WorkloadConfig::bandwidth(flow.0, flow.1, flow.2, Some(flow.3));
    let app = deploy_workload(o.fabric_mut(), &t, &w).unwrap();
    o.advance(SimTime::from_ms(flow.3 + 2000));
    let events = o.fabric_mut().drain_flow_events(app);
    (o, events)
}

fn count(events: &[FlowEvent], kind: FlowEventKind, sent_in: impl Fn(SimTime) -> bool) -> usize {
    events.iter().filter(|e| e.kind == kind && sent_in(e.sent_at)).count()
}

// ---- criteria

fn isolation(seed: u64) -> Check {
    let started = Instant::now();
    let a = TenantId::from("tenant-a");
    let b = TenantId::from("tenant-b");
    let run = |inject: bool| {
        let mut o = orch(fixtures::TWO_TENANTS, seed);
        if inject {
            let s = FaultSpec::persistent_loss(timing(10_000, 40_000, 10_000));
            o.inject_resource(&a, ResourceKind::Subnet, &"subnet-a".into(), s)
                .unwrap();
        }
        let wa = WorkloadConfig::bandwidth("port-a1", "port-a2", 100.0, Some(60_000));
        let wb = WorkloadConfig::bandwidth("port-b1", "port-b2", 100.0, Some(60_000));
        let app_a = deploy_workload(o.fabric_mut(), &a, &wa).unwrap();
        let app_b = deploy_workload(o.fabric_mut(), &b, &wb).unwrap();
        o.advance(SimTime::from_ms(62_000));
        let ea = o.fabric_mut().drain_flow_events(app_a);
        let eb = o.fabric_mut().drain_flow_events(app_b);
        (o, ea, eb)
    };
    let (o, ea, eb) = run(true);
    let wall = started.elapsed();
    let (_, _, eb_clean) = run(false);

    let window = |t: SimTime| t >= SimTime::from_ms(10_000) && t < SimTime::from_ms(50_000);
    let a_delivered = ea
        .iter()
        .filter(|e| e.kind == FlowEventKind::Delivered && window(e.t))
        .count();
    let a_sent = count(&ea, FlowEventKind::Sent, window);
    ensure(a_sent == 4000, format!("tenant A sent {a_sent} in window"))?;
    ensure(a_delivered == 0, format!("tenant A delivered {a_delivered} in window"))?;
    let b_sent = count(&eb, FlowEventKind::Sent, |_| true);
    let b_delivered = count(&eb, FlowEventKind::Delivered, |_| true);
    ensure(
        b_sent == 6000 && b_delivered == 6000,
        format!("tenant B delivered {b_delivered}/{b_sent}"),
    )?;
    let latencies = |evs: &[FlowEvent]| -> Vec<(u64, SimTime, SimTime)> {
        evs.iter()
            .filter(|e| e.kind == FlowEventKind::Delivered)
            .map(|e| (e.packet_id.unwrap_or(0), e.sent_at, e.t))
            .collect()
    };
    ensure(
        latencies(&eb) == latencies(&eb_clean),
        "tenant B latencies differ from its clean run",
    )?;
    let foreign = o
        .fabric()
        .trace()
        .iter()
        .filter(|r| r.packet_tenant != a || r.item_tenant != a)
        .count();
    ensure(foreign == 0, format!("{foreign} altered packets outside tenant A"))?;
    ensure(wall.as_secs_f64() < 5.0, format!("took {:.2}s", wall.as_secs_f64()))?;
    Ok(format!(
        "A delivered 0/{a_sent} in window; B 6000/6000 with identical latencies; {} trace records all tenant A; {:.2}s",
        o.fabric().trace().len(),
        wall.as_secs_f64()
    ))
}

fn statistical_intensity(seed: u64) -> Check {
    let mut lines = Vec::new();
    let faults: [(FaultType, FlowEventKind); 3] = [
        (FaultType::Loss, FlowEventKind::Dropped),
        (FaultType::Corruption { bytes_affected: 1 }, FlowEventKind::Corrupted),
        (FaultType::Duplication, FlowEventKind::Duplicated),
    ];
    for (fault, kind) in faults {
        for intensity in [0.25, 0.5, 0.75] {
            let s = spec(fault.clone(), Pattern::Random, intensity, timing(0, 12_000, 0));
            let (_, events) = direct_run(
                fixtures::MINIMAL,
                seed,
                "tenant-a",
                ("port-vm1", "port-vm2", 1000.0, 12_000),
                Some((ResourceKind::Port, "port-vm2", s)),
            );
            let n = count(&events, FlowEventKind::Sent, |_| true);
            let k = count(&events, kind, |_| true);
            ensure(n >= 10_000, format!("only {n} packets"))?;
            let observed = k as f64 / n as f64;
            let sigma = (intensity * (1.0 - intensity) / n as f64).sqrt();
            let z = (observed - intensity) / sigma;
            ensure(
                z.abs() <= 3.0,
                format!("{} at {intensity}: observed {observed:.4} (z = {z:.2})", fault.name()),
            )?;
            lines.push(format!("{}@{intensity}={observed:.4}", fault.name()));
        }
    }
    Ok(format!("all within 3 sigma over 12000 packets: {}", lines.join(" ")))
}

fn delay_exactness(seed: u64) -> Check {
    let mut means = Vec::new();
    for amount in [500.0, 1000.0, 1500.0] {
        let delay = FaultType::Delay {
            amount_ms: amount,
            jitter_ms: 0.0,
        };
        let s = spec(delay.clone(), Pattern::Persistent, 1.0, timing(2000, 10_000, 0));
        let (_, events) = direct_run(
            fixtures::MINIMAL,
            seed,
            "tenant-a",
            ("port-vm1", "port-vm2", 100.0, 14_000),
            Some((ResourceKind::Port, "port-vm2", s)),
        );
        // The delayed item is the second hop, reached 0.5 ms after sending.
        let at_item = |e: &FlowEvent| e.sent_at.plus_ms_f64(0.5);
        let inside = |e: &FlowEvent| at_item(e) >= SimTime::from_ms(2000) && at_item(e) < SimTime::from_ms(12_000);
        let delivered: Vec<&FlowEvent> = events.iter().filter(|e| e.kind == FlowEventKind::Delivered).collect();
        let base = delivered
            .iter()
            .find(|e| !inside(e))
            .map(|e| e.t - e.sent_at)
            .ok_or("no undelayed packet")?;
        for e in &delivered {
            let want = if inside(e) { base.plus_ms_f64(amount) } else { base };
            ensure(
                e.t - e.sent_at == want,
                format!("packet sent at {} took {} (want {want})", e.sent_at, e.t - e.sent_at),
            )?;
        }
        ensure(delivered.len() == 1400, format!("{} delivered", delivered.len()))?;

        let mut o = orch(fixtures::MINIMAL, seed);
        let attach = Attach {
            client_port_ids: vec!["port-vm1".into()],
            server_port_id: Some("port-vm2".into()),
            ..Attach::default()
        };
        let s = spec(delay, Pattern::Persistent, 1.0, timing(0, 60_000, 0));
        let plan = Plan {
            baseline: false,
            cases: vec![traffic_case(
                "delay",
                ResourceKind::Port,
                "port-vm2",
                s,
                request_response("port-vm1", attach, 4, 60.0, 10_000),
            )],
        };
        let (_, _, report) = run_plan(&mut o, "tenant-a", plan);
        let m = report.cases[0].metrics.as_ref().ok_or("no metrics")?;
        means.push(m.response_time_ms.mean);
    }
    ensure(
        means.windows(2).all(|w| w[0] < w[1]),
        format!("mean response times not increasing: {means:?}"),
    )?;
    Ok(format!(
        "every packet delayed by exactly 500/1000/1500 ms; mean response {:.1} < {:.1} < {:.1} ms",
        means[0], means[1], means[2]
    ))
}

fn pattern_semantics(seed: u64) -> Check {
    // Bursty: audit every non-deliver outcome against the on-phases.
    let bursty = Pattern::Bursty {
        period_ms: 1000.0,
        duty_fraction: 0.25,
    };
    let s = spec(FaultType::Loss, bursty, 1.0, timing(1000, 10_000, 1000));
    let (o, _) = direct_run(
        fixtures::MINIMAL,
        seed,
        "tenant-a",
        ("port-vm1", "port-vm2", 1000.0, 12_000),
        Some((ResourceKind::Port, "port-vm2", s)),
    );
    let mut on = 0;
    for r in o.fabric().trace() {
        let rel = r.at.as_micros() as i64 - 1_000_000;
        ensure(
            (0..10_000_000).contains(&rel) && rel % 1_000_000 < 250_000,
            format!("affected packet at {} outside an on-phase", r.at),
        )?;
        on += 1;
    }
    ensure(on > 0, "bursty affected nothing")?;

    // Degradation: per-decile affected fractions.
    let intensity = 0.6;
    let s = spec(FaultType::Loss, Pattern::Degradation, intensity, timing(0, 20_000, 0));
    let (_, events) = direct_run(
        fixtures::MINIMAL,
        seed,
        "tenant-a",
        ("port-vm1", "port-vm2", 2000.0, 20_000),
        Some((ResourceKind::Port, "port-vm2", s)),
    );
    let decile = |e: &FlowEvent| ((e.sent_at.plus_ms_f64(0.5).as_micros()) / 2_000_000).min(9) as usize;
    let mut sent = [0u64; 10];
    let mut hit = [0u64; 10];
    for e in &events {
        match e.kind {
            FlowEventKind::Sent => sent[decile(e)] += 1,
            FlowEventKind::Dropped => hit[decile(e)] += 1,
            _ => {}
        }
    }
    let frac: Vec<f64> = (0..10).map(|i| hit[i] as f64 / sent[i] as f64).collect();
    ensure(
        frac.windows(2).all(|w| w[0] <= w[1]),
        format!("decile fractions decrease: {frac:.3?}"),
    )?;
    // The ramp's mean activation over the last tenth is 0.95 of intensity.
    let expected = 0.95 * intensity;
    let n = sent[9] as f64;
    let sigma = (expected * (1.0 - expected) / n).sqrt();
    let z = (frac[9] - expected) / sigma;
    ensure(
        z.abs() <= 3.0,
        format!("final decile {:.4} vs {expected} (z = {z:.2})", frac[9]),
    )?;
    Ok(format!(
        "bursty: {on} affected, all in on-phases; degradation deciles non-decreasing, final {:.4} vs {expected:.2} (z = {z:.2}, {:.1} sigma from {intensity})",
        frac[9],
        (frac[9] - intensity) / sigma
    ))
}

fn phase_honesty(seed: u64) -> Check {
    let faults = [
        FaultType::Loss,
        FaultType::Delay {
            amount_ms: 50.0,
            jitter_ms: 10.0,
        },
        FaultType::Corruption { bytes_affected: 4 },
        FaultType::Duplication,
        FaultType::RateLimit {
            rate_pkts_per_s: 100.0,
            burst_pkts: None,
        },
    ];
    let mut total = 0;
    for fault in faults {
        for pattern in [
            Pattern::Random,
            Pattern::Persistent,
            Pattern::bursty_default(),
            Pattern::Degradation,
        ] {
            let s = spec(fault.clone(), pattern, 0.5, timing(10_000, 20_000, 10_000));
            let (o, _) = direct_run(
                fixtures::MINIMAL,
                seed,
                "tenant-a",
                ("port-vm1", "port-vm2", 500.0, 40_000),
                Some((ResourceKind::Subnet, "subnet1", s)),
            );
            let trace = o.fabric().trace();
            ensure(
                !trace.is_empty(),
                format!("{}/{} affected nothing", fault.name(), pattern.name()),
            )?;
            for r in trace {
                ensure(
                    r.at >= SimTime::from_ms(10_000) && r.at < SimTime::from_ms(30_000),
                    format!("{}/{}: {} at {}", fault.name(), pattern.name(), r.outcome, r.at),
                )?;
            }
            total += trace.len();
        }
    }
    Ok(format!(
        "{total} non-deliver outcomes over 20 fault/pattern pairs, all in [10 s, 30 s)"
    ))
}

fn config_round_trip(seed: u64) -> Check {
    let public_client = |server: Attach| request_response("port-ext-client", server, 2, 1200.0, 1000);
    let fip = Attach {
        client_port_ids: vec!["port-ext-client".into()],
        floating_ip_id: Some("fip1".into()),
        ..Attach::default()
    };
    let cases = [
        (ResourceKind::Network, "net1", public_client(fip.clone())),
        (
            ResourceKind::Router,
            "router1",
            request_response(
                "port-vm1",
                Attach {
                    client_port_ids: vec!["port-vm1".into()],
                    server_port_id: Some("port-ext-client".into()),
                    ..Attach::default()
                },
                2,
                1200.0,
                1000,
            ),
        ),
        (ResourceKind::FloatingIp, "fip1", public_client(fip)),
        (
            ResourceKind::Port,
            "port-vm1",
            request_response(
                "port-vm2",
                Attach {
                    client_port_ids: vec!["port-vm2".into()],
                    server_port_id: Some("port-vm1".into()),
                    ..Attach::default()
                },
                2,
                1200.0,
                1000,
            ),
        ),
    ];
    let mut notes = Vec::new();
    for (kind, id, workload) in cases {
        let mut o = orch(fixtures::MINIMAL, seed);
        let before = o.topology_json();
        let case = TestCase {
            id: format!("{kind}-outage"),
            target: None,
            spec: None,
            config_fault: Some(ConfigFault {
                kind,
                id: id.into(),
                outage_ms: 3000,
                pre_ms: 2000,
                post_ms: 3000,
            }),
            workload,
            repetitions: 1,
            inject_at_repetition: None,
            repetition_ms: None,
        };
        let (_, _, report) = run_plan(
            &mut o,
            "tenant-a",
            Plan {
                baseline: false,
                cases: vec![case],
            },
        );
        ensure(o.topology_json() == before, format!("{kind} `{id}`: topology changed"))?;
        let c = &report.cases[0];
        ensure(!c.aborted, format!("{kind} `{id}`: case aborted: {:?}", c.error))?;
        let series = &c.metrics.as_ref().ok_or("no metrics")?.series;
        for p in series {
            let inside = (2..5).contains(&p.t_s);
            ensure(
                (p.error_rate > 0.0) == inside,
                format!("{kind} `{id}`: second {} has error rate {}", p.t_s, p.error_rate),
            )?;
        }
        notes.push(format!("{kind}:{:.2}", c.metrics.as_ref().unwrap().error_rate));
    }
    Ok(format!(
        "topology byte-identical after restore; errors only inside the outage ({})",
        notes.join(" ")
    ))
}

struct FailoverRun {
    baseline: f64,
    /// Mean per-second throughput over the injection window.
    inject_throughput: f64,
    min_throughput: f64,
    isolated_after_s: Option<f64>,
    recovered: f64,
    late_errors: usize,
}

fn failover_run(seed: u64, pattern: Pattern, intensity: f64) -> Result<FailoverRun, String> {
    let (pre, inject, post) = (20_000, 60_000, 20_000);
    let timeout = 3000;
    let mut o = orch(fixtures::THREE_TIER, seed);
    let attach = Attach {
        client_port_ids: vec!["port-client".into()],
        balancer_id: Some("lb-web".into()),
        ..Attach::default()
    };
    let s = spec(FaultType::Loss, pattern, intensity, timing(pre, inject, post));
    let plan = Plan {
        baseline: true,
        cases: vec![traffic_case(
            "seg-b-loss",
            ResourceKind::Subnet,
            "subnet-seg-b",
            s,
            request_response("port-client", attach, 10, 600.0, timeout),
        )],
    };
    let (_, bundle, report) = run_plan(&mut o, "web", plan);
    let base = report.baseline.as_ref().ok_or("no baseline")?;
    let baseline = base.metrics.as_ref().ok_or("no baseline metrics")?.throughput;
    let case = &report.cases[0];
    let origin_ms = case.start_s * 1000;
    let inject_at = (origin_ms + pre) as f64;
    let series = &case.metrics.as_ref().ok_or("no metrics")?.series;
    let window: Vec<f64> = series
        .iter()
        .filter(|p| (pre / 1000..(pre + inject) / 1000).contains(&p.t_s))
        .map(|p| p.throughput)
        .collect();
    let inject_throughput = window.iter().sum::<f64>() / window.len() as f64;
    let min_throughput = window.iter().cloned().fold(f64::INFINITY, f64::min);

    // The campaign starts at fabric time zero, so report times are absolute.
    let isolation = o
        .fabric()
        .health_log()
        .iter()
        .find(|h| h.backend_port_id.as_str() == "port-web-b" && !h.healthy && h.at.as_ms_f64() >= inject_at)
        .map(|h| h.at);
    let isolated_after_s = isolation.map(|t| (t.as_ms_f64() - inject_at) / 1000.0);
    let events = case_events(&bundle, "seg-b-loss");
    let mut outcome = BTreeMap::new();
    for e in events.iter().filter(|e| e.kind.is_terminal()) {
        outcome.entry(e.unit()).or_insert(e);
    }
    let late_errors = match isolation {
        Some(iso) => outcome
            .values()
            .filter(|e| e.kind.is_failure() && e.sent_at >= iso)
            .count(),
        None => usize::MAX,
    };
    let recovered = match isolation {
        Some(iso) => {
            let from = ((iso.as_ms_f64() + timeout as f64) / 1000.0).ceil() as u64 - case.start_s;
            let after: Vec<f64> = series
                .iter()
                .filter(|p| p.t_s >= from && p.t_s < (pre + inject) / 1000)
                .map(|p| p.throughput)
                .collect();
            after.iter().sum::<f64>() / after.len().max(1) as f64
        }
        None => 0.0,
    };
    Ok(FailoverRun {
        baseline,
        inject_throughput,
        min_throughput,
        isolated_after_s,
        recovered,
        late_errors,
    })
}

fn failover(seed: u64) -> Check {
    let r = failover_run(seed, Pattern::Persistent, 1.0)?;
    let iso = r.isolated_after_s.ok_or("segment B never isolated")?;
    ensure(
        r.min_throughput < r.baseline,
        format!("no dip: min {} vs baseline {}", r.min_throughput, r.baseline),
    )?;
    ensure(iso <= 20.0, format!("isolated {iso:.1} s after injection start"))?;
    ensure(
        r.recovered >= 0.9 * r.baseline,
        format!("recovered to {:.2} of baseline {:.2}", r.recovered, r.baseline),
    )?;
    ensure(
        r.late_errors == 0,
        format!("{} errors sent after isolation", r.late_errors),
    )?;
    Ok(format!(
        "baseline {:.2} req/s, dip to {:.2}, B isolated after {iso:.1} s, recovered to {:.2} ({:.0}%), no errors after isolation",
        r.baseline,
        r.min_throughput,
        r.recovered,
        100.0 * r.recovered / r.baseline
    ))
}

fn gray_failure(seed: u64) -> Check {
    let gray = failover_run(seed, Pattern::Random, 0.25)?;
    let hard = failover_run(seed, Pattern::Persistent, 1.0)?;
    ensure(
        gray.inject_throughput < hard.inject_throughput,
        format!(
            "random 25% loss {:.3} req/s vs persistent {:.3} req/s",
            gray.inject_throughput, hard.inject_throughput
        ),
    )?;
    Ok(format!(
        "throughput during injection: random 25% loss {:.3} < persistent loss {:.3} req/s",
        gray.inject_throughput, hard.inject_throughput
    ))
}

/// One campaign per scenario family; both runs must render identical bundles.
fn determinism_bundles(seed: u64) -> Vec<(String, ReportBundle)> {
    let mut out = Vec::new();

    let mut o = orch(fixtures::THREE_TIER, seed);
    let attach = Attach {
        client_port_ids: vec!["port-client".into()],
        balancer_id: Some("lb-web".into()),
        ..Attach::default()
    };
    let rr = request_response("port-client", attach, 5, 300.0, 2000);
    let t = timing(3000, 6000, 3000);
    let mut config = traffic_case(
        "outage",
        ResourceKind::Port,
        "port-web-a",
        FaultSpec::persistent_loss(t),
        rr.clone(),
    );
    config.target = None;
    config.spec = None;
    config.config_fault = Some(ConfigFault {
        kind: ResourceKind::FloatingIp,
        id: "fip-web".into(),
        outage_ms: 4000,
        pre_ms: 2000,
        post_ms: 2000,
    });
    let plan = Plan {
        baseline: true,
        cases: vec![
            traffic_case(
                "random-loss",
                ResourceKind::Subnet,
                "subnet-seg-b",
                spec(FaultType::Loss, Pattern::Random, 0.3, t),
                rr.clone(),
            ),
            traffic_case(
                "jittery-delay",
                ResourceKind::Port,
                "port-web-a",
                spec(
                    FaultType::Delay {
                        amount_ms: 200.0,
                        jitter_ms: 150.0,
                    },
                    Pattern::Random,
                    0.5,
                    t,
                ),
                rr.clone(),
            ),
            traffic_case(
                "corruption",
                ResourceKind::Router,
                "router-core",
                spec(
                    FaultType::Corruption { bytes_affected: 8 },
                    Pattern::Degradation,
                    0.8,
                    t,
                ),
                rr,
            ),
            config,
        ],
    };
    let (_, bundle, _) = run_plan(&mut o, "web", plan);
    out.push(("three_tier".into(), bundle));

    let mut o = orch(fixtures::MINIMAL, seed);
    let mut reps = traffic_case(
        "reps",
        ResourceKind::Subnet,
        "subnet1",
        spec(
            FaultType::Duplication,
            Pattern::bursty_default(),
            0.7,
            timing(0, 5000, 0),
        ),
        WorkloadConfig::bandwidth("port-vm1", "port-vm2", 200.0, None),
    );
    reps.repetitions = 20;
    reps.repetition_ms = Some(500);
    let (_, bundle, _) = run_plan(
        &mut o,
        "tenant-a",
        Plan {
            baseline: true,
            cases: vec![reps],
        },
    );
    out.push(("minimal".into(), bundle));
    out
}

fn determinism(seed: u64) -> Check {
    let first = determinism_bundles(seed);
    let second = determinism_bundles(seed);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut bytes = 0;
    for ((name, a), (_, b)) in first.iter().zip(&second) {
        a.write_to(&dirs[0].path().join(name)).unwrap();
        b.write_to(&dirs[1].path().join(name)).unwrap();
        for file in [
            faultfabric::orchestrator::REPORT_FILE,
            faultfabric::orchestrator::SERIES_FILE,
            faultfabric::orchestrator::EVENTS_FILE,
        ] {
            let x = std::fs::read(dirs[0].path().join(name).join(file)).unwrap();
            let y = std::fs::read(dirs[1].path().join(name).join(file)).unwrap();
            ensure(x == y, format!("{name}/{file} differs between runs"))?;
            bytes += x.len();
        }
    }
    // A different seed must change the randomized campaign.
    let other = determinism_bundles(seed.wrapping_add(1));
    ensure(
        other[0].1.events_log != first[0].1.events_log,
        "changing the seed did not change the events",
    )?;
    Ok(format!(
        "2 runs x {} bundles byte-identical ({bytes} bytes)",
        first.len()
    ))
}

fn mapping_oracle(seed: u64) -> Check {
    let mut rng = DetRng::derived(seed, "mapping-oracle");
    let mut queries = 0;
    let mut mismatches = Vec::new();
    let mut fabrics = 0;
    while queries < 1000 {
        let doc: TopologyDocument = common::random_document(&mut rng, 50);
        let topo = faultfabric::fabric::Topology::from_document(doc.clone()).map_err(|e| e.to_string())?;
        ensure(doc.ports.len() <= 50, "fabric too large")?;
        fabrics += 1;
        let map = build_item_map(&topo);
        let all = common::injectable(&doc);
        for _ in 0..20 {
            let (kind, id) = &all[rng.below(all.len() as u64) as usize];
            let got: Vec<(String, _)> = resolve_items(&map, *kind, id)
                .map_err(|e| e.to_string())?
                .into_iter()
                .map(|i| (i.id.to_string(), i.location))
                .collect();
            let want = common::oracle_items(&doc, *kind, id);
            if got != want {
                mismatches.push(format!("{kind} `{id}`: {got:?} != {want:?}"));
            }
            queries += 1;
        }
    }
    if let Some(first) = mismatches.first() {
        return Err(format!("{} mismatches, first: {first}", mismatches.len()));
    }
    Ok(format!("{queries} queries over {fabrics} random fabrics, 0 mismatches"))
}

fn main() {
    let seed = faultfabric::seed_from_env();
    let criteria: [(&str, fn(u64) -> Check); 10] = [
        ("tenant isolation", isolation),
        ("statistical intensity", statistical_intensity),
        ("delay exactness", delay_exactness),
        ("pattern semantics", pattern_semantics),
        ("phase honesty", phase_honesty),
        ("config-fault round trip", config_round_trip),
        ("failover reproduction", failover),
        ("gray-failure reproduction", gray_failure),
        ("determinism", determinism),
        ("mapping oracle", mapping_oracle),
    ];
    println!("acceptance (seed {seed})");
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| check(seed))).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name} [{secs:.2}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} [{secs:.2}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
