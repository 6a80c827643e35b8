use super::*;
use crate::fabric::FabricConfig;
use crate::faultengine::Timing;
use crate::fixtures;
use crate::workload::{Attach, FlowEvent, FlowEventKind, WorkloadConfig};

fn orch(text: &str) -> Orchestrator {
    Orchestrator::new(Fabric::from_json(text, FabricConfig::default()).unwrap())
}

fn tenant_a() -> TenantId {
    TenantId::from("tenant-a")
}

fn timing(pre: u64, inject: u64, post: u64) -> Timing {
    Timing {
        pre_ms: pre,
        inject_ms: inject,
        post_ms: post,
    }
}

fn bandwidth_case(id: &str, target: (ResourceKind, &str), spec: FaultSpec) -> TestCase {
    TestCase {
        id: id.into(),
        target: Some(Target {
            kind: target.0,
            id: target.1.into(),
        }),
        spec: Some(spec),
        config_fault: None,
        workload: WorkloadConfig::bandwidth("port-vm1", "port-ext-client", 100.0, None),
        repetitions: 1,
        inject_at_repetition: None,
        repetition_ms: None,
    }
}

#[test]
fn cross_tenant_injection_is_rejected() {
    let mut o = orch(fixtures::TWO_TENANTS);
    let spec = FaultSpec::persistent_loss(timing(0, 1000, 0));
    let err = o
        .inject_resource(
            &TenantId::from("tenant-a"),
            ResourceKind::Network,
            &"net-b".into(),
            spec,
        )
        .unwrap_err();
    assert!(matches!(err, OrchestratorError::NotOwner { .. }), "{err}");
}

#[test]
fn subnet_injection_commands_each_item_agent() {
    let mut o = orch(fixtures::MINIMAL);
    let subnet = ResourceId::from("subnet1");
    let expected = resolve_items(o.fabric().item_map(), ResourceKind::Subnet, &subnet).unwrap();
    assert_eq!(expected.len(), 3);
    let spec = FaultSpec::persistent_loss(timing(0, 1000, 0));
    let h = o
        .inject_resource(&tenant_a(), ResourceKind::Subnet, &subnet, spec)
        .unwrap();
    o.advance(SimTime::from_ms(1));
    let injects: Vec<_> = o
        .control_log()
        .iter()
        .filter(|r| r.tag == h.id)
        .filter_map(|r| match &r.action {
            ControlAction::Agent {
                host,
                command: AgentCommand::Inject { item_id, .. },
            } => Some((item_id.clone(), host.clone())),
            _ => None,
        })
        .collect();
    let want: Vec<_> = expected.iter().map(|i| (i.id.clone(), i.location.clone())).collect();
    assert_eq!(injects, want);
    assert_eq!(o.handle(h.id).unwrap().phase, InjectionPhase::Injecting);
}

#[test]
fn handle_walks_every_phase_and_clears() {
    let mut o = orch(fixtures::MINIMAL);
    let spec = FaultSpec::persistent_loss(timing(100, 200, 300));
    let h = o
        .inject_resource(&tenant_a(), ResourceKind::Router, &"router1".into(), spec)
        .unwrap();
    assert_eq!(h.phase, InjectionPhase::PreInjection);
    let h = o.run_handle(h.id).unwrap();
    assert_eq!(h.phase, InjectionPhase::Completed);
    let stamps: Vec<_> = h.history.iter().map(|s| (s.phase, s.at.as_ms())).collect();
    assert_eq!(
        stamps,
        vec![
            (InjectionPhase::PreInjection, 0),
            (InjectionPhase::Injecting, 100),
            (InjectionPhase::PostInjection, 300),
            (InjectionPhase::Completed, 600),
        ]
    );
    assert_eq!(o.fabric().active_injections(), 0);
}

#[test]
fn overlapping_injection_is_busy() {
    let mut o = orch(fixtures::MINIMAL);
    let spec = FaultSpec::persistent_loss(timing(0, 1000, 0));
    o.inject_resource(&tenant_a(), ResourceKind::Port, &"port-vm1".into(), spec.clone())
        .unwrap();
    let err = o
        .inject_resource(&tenant_a(), ResourceKind::Subnet, &"subnet1".into(), spec)
        .unwrap_err();
    assert_eq!(err, OrchestratorError::ItemBusy(ItemId::from("tap-port-vm1")));
}

#[test]
fn network_without_ports_has_no_items() {
    let mut doc = fixtures::minimal_document();
    doc.networks.push(crate::fabric::resources::Network {
        id: "net-empty".into(),
        tenant_id: tenant_a(),
        name: "empty".into(),
        is_external: false,
    });
    let mut o = Orchestrator::new(Fabric::load(doc, FabricConfig::default()).unwrap());
    let spec = FaultSpec::persistent_loss(timing(0, 1000, 0));
    let err = o
        .inject_resource(&tenant_a(), ResourceKind::Network, &"net-empty".into(), spec)
        .unwrap_err();
    assert!(matches!(err, OrchestratorError::NoItems { .. }));
}

#[test]
fn invalid_spec_is_rejected() {
    let mut o = orch(fixtures::MINIMAL);
    let mut spec = FaultSpec::persistent_loss(timing(0, 1000, 0));
    spec.intensity = 1.5;
    let err = o
        .inject_resource(&tenant_a(), ResourceKind::Port, &"port-vm1".into(), spec)
        .unwrap_err();
    assert!(matches!(err, OrchestratorError::InvalidSpec(_)));
}

#[test]
fn early_clear_aborts_and_releases_items() {
    let mut o = orch(fixtures::MINIMAL);
    let spec = FaultSpec::persistent_loss(timing(0, 10_000, 0));
    let h = o
        .inject_resource(&tenant_a(), ResourceKind::Port, &"port-vm1".into(), spec)
        .unwrap();
    o.advance(SimTime::from_ms(50));
    assert_eq!(o.fabric().active_injections(), 1);
    let h = o.clear_injection(h.id).unwrap();
    assert_eq!(h.phase, InjectionPhase::Aborted);
    assert_eq!(o.fabric().active_injections(), 0);
    o.advance(SimTime::from_ms(20_000));
    assert_eq!(o.handle(h.id).unwrap().phase, InjectionPhase::Aborted);
    assert_eq!(
        o.clear_injection(h.id).unwrap_err(),
        OrchestratorError::HandleFinished(h.id)
    );
}

#[test]
fn config_fault_round_trip_without_traffic() {
    let mut o = orch(fixtures::MINIMAL);
    let before = o.topology_json();
    let h = o
        .inject_config_fault(&tenant_a(), ResourceKind::Router, &"router1".into(), 5000)
        .unwrap();
    o.advance(SimTime::from_ms(1));
    assert!(o.fabric().topology().router(&"router1".into()).is_none());
    let h = o.run_handle(h.id).unwrap();
    assert_eq!(h.phase, InjectionPhase::Completed);
    assert_eq!(o.topology_json(), before);
}

#[test]
fn early_clear_of_outage_restores_now() {
    let mut o = orch(fixtures::MINIMAL);
    let before = o.topology_json();
    let h = o
        .inject_config_fault(&tenant_a(), ResourceKind::Network, &"net1".into(), 60_000)
        .unwrap();
    o.advance(SimTime::from_ms(10));
    assert_ne!(o.topology_json(), before);
    o.clear_injection(h.id).unwrap();
    assert_eq!(o.topology_json(), before);
}

#[test]
fn traffic_injection_on_deleted_closure_is_busy() {
    let mut o = orch(fixtures::MINIMAL);
    o.inject_config_fault(&tenant_a(), ResourceKind::Port, &"port-vm1".into(), 5000)
        .unwrap();
    let spec = FaultSpec::persistent_loss(timing(0, 1000, 0));
    let err = o
        .inject_resource(&tenant_a(), ResourceKind::Subnet, &"subnet1".into(), spec)
        .unwrap_err();
    assert!(matches!(err, OrchestratorError::ItemBusy(_)));
}

#[test]
fn empty_plan_finishes_immediately() {
    let mut o = orch(fixtures::MINIMAL);
    let id = o.start_tests(&tenant_a(), Plan::default()).unwrap();
    assert_eq!(o.status_tests(id).unwrap().state, CampaignState::Finished);
    let report = o.report(id).unwrap().report().unwrap();
    assert!(report.cases.is_empty() && report.baseline.is_none());
}

#[test]
fn plan_with_foreign_target_is_invalid() {
    let mut o = orch(fixtures::TWO_TENANTS);
    let mut case = bandwidth_case(
        "c",
        (ResourceKind::Network, "net-b"),
        FaultSpec::persistent_loss(timing(0, 1000, 0)),
    );
    case.workload = WorkloadConfig::bandwidth("port-a1", "port-a2", 10.0, None);
    let err = o
        .start_tests(
            &TenantId::from("tenant-a"),
            Plan {
                baseline: false,
                cases: vec![case],
            },
        )
        .unwrap_err();
    assert!(matches!(err, OrchestratorError::PlanInvalid(_)), "{err}");
}

#[test]
fn one_running_campaign_per_tenant() {
    let mut o = orch(fixtures::MINIMAL);
    let plan = Plan {
        baseline: false,
        cases: vec![bandwidth_case(
            "c",
            (ResourceKind::Router, "router1"),
            FaultSpec::persistent_loss(timing(100, 100, 100)),
        )],
    };
    let id = o.start_tests(&tenant_a(), plan.clone()).unwrap();
    assert_eq!(o.status_tests(id).unwrap().state, CampaignState::Pending);
    let err = o.start_tests(&tenant_a(), plan.clone()).unwrap_err();
    assert!(matches!(err, OrchestratorError::CampaignAlreadyRunning { campaign, .. } if campaign == id));
    o.run_campaign(id).unwrap();
    assert!(o.start_tests(&tenant_a(), plan).is_ok());
}

#[test]
fn campaign_lifecycle_and_report() {
    let mut o = orch(fixtures::MINIMAL);
    let before = o.topology_json();
    let plan = Plan {
        baseline: true,
        cases: vec![bandwidth_case(
            "router-loss",
            (ResourceKind::Router, "router1"),
            FaultSpec::persistent_loss(timing(2000, 2000, 2000)),
        )],
    };
    let id = o.start_tests(&tenant_a(), plan).unwrap();
    assert_eq!(
        o.save_logs(id, Path::new("/nonexistent")).unwrap_err(),
        OrchestratorError::NotTerminated(id)
    );
    o.advance(SimTime::from_ms(1000));
    let st = o.status_tests(id).unwrap();
    assert_eq!(st.state, CampaignState::Running { case_index: 0 });
    assert_eq!(st.current_case.as_deref(), Some("baseline"));
    assert!(st.cases[0].partial.is_some());
    assert_eq!(o.run_campaign(id).unwrap(), CampaignState::Finished);

    let bundle = o.report(id).unwrap();
    let report = bundle.report().unwrap();
    let base = report.baseline.as_ref().unwrap();
    let case = &report.cases[0];
    // The second case starts on the first whole second after the baseline
    // window plus its drain.
    assert_eq!(base.start_s, 0);
    assert_eq!(case.start_s, 7);
    let bm = base.metrics.as_ref().unwrap();
    let cm = case.metrics.as_ref().unwrap();
    assert_eq!(bm.counts.sent, 600);
    assert_eq!(bm.error_rate, 0.0);
    assert!((cm.error_rate - 200.0 / 600.0).abs() < 0.01, "{}", cm.error_rate);
    assert_eq!(case.injection.as_ref().unwrap().phase, InjectionPhase::Completed);

    // Metrics recomputed from events.log match the report.
    let events: Vec<FlowEvent> = bundle
        .events_log
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["case"] == "router-loss")
        .map(|v| serde_json::from_value(v).unwrap())
        .collect();
    let start = SimTime::from_ms(case.start_s * 1000);
    let again = compute_metrics(&events, start, start.plus_ms(6000)).unwrap();
    assert_eq!(&again, cm);

    let rows: Vec<&str> = bundle.series_csv.lines().collect();
    assert_eq!(
        rows[0],
        "t_s,throughput,mean_latency_ms,mean_response_ms,error_rate,phase"
    );
    assert_eq!(rows.len(), 1 + 6 + 6);
    assert!(rows[1].ends_with(",baseline"));
    let phases: Vec<&str> = rows[7..].iter().map(|r| r.rsplit(',').next().unwrap()).collect();
    assert_eq!(phases, ["pre", "pre", "injection", "injection", "post", "post"]);

    assert_eq!(o.fabric().active_injections(), 0);
    assert_eq!(o.topology_json(), before);
    assert_eq!(o.stop_tests(id).unwrap_err(), OrchestratorError::AlreadyFinished(id));

    let dir = tempfile::tempdir().unwrap();
    let out = o.save_logs(id, dir.path()).unwrap();
    assert_eq!(
        std::fs::read_to_string(out.join(REPORT_FILE)).unwrap(),
        bundle.report_json
    );
}

#[test]
fn repetitions_after_the_trigger_are_fault_exposed() {
    let mut o = orch(fixtures::MINIMAL);
    let mut case = bandwidth_case(
        "reps",
        (ResourceKind::Port, "port-vm1"),
        FaultSpec::persistent_loss(timing(0, 5000, 0)),
    );
    case.repetitions = 20;
    case.inject_at_repetition = Some(10);
    case.repetition_ms = Some(500);
    let id = o
        .start_tests(
            &tenant_a(),
            Plan {
                baseline: false,
                cases: vec![case],
            },
        )
        .unwrap();
    o.run_campaign(id).unwrap();
    let report = o.report(id).unwrap().report().unwrap();
    let reps = &report.cases[0].repetitions;
    assert_eq!(reps.len(), 20);
    for r in reps {
        assert_eq!(r.fault_exposed, r.index >= 10, "rep {}", r.index);
        if r.index < 10 {
            assert_eq!(r.error_rate, 0.0);
        } else {
            assert_eq!(r.error_rate, 1.0);
        }
    }
}

#[test]
fn stop_during_injection_clears_everything() {
    let mut o = orch(fixtures::MINIMAL);
    let plan = Plan {
        baseline: false,
        cases: vec![bandwidth_case(
            "c",
            (ResourceKind::Subnet, "subnet1"),
            FaultSpec::persistent_loss(timing(1000, 10_000, 1000)),
        )],
    };
    let id = o.start_tests(&tenant_a(), plan).unwrap();
    o.advance(SimTime::from_ms(3000));
    assert_eq!(o.fabric().active_injections(), 3);
    o.stop_tests(id).unwrap();
    assert_eq!(o.fabric().active_injections(), 0);
    for agent in o.fabric().agents() {
        assert_eq!(agent.active_count(), 0);
    }
    let st = o.status_tests(id).unwrap();
    assert_eq!(st.state, CampaignState::Stopped);
    assert_eq!(st.cases[0].stage, CaseStage::Aborted);
    assert_eq!(st.cases[0].injection_phase, Some(InjectionPhase::Aborted));
    let report = o.report(id).unwrap().report().unwrap();
    assert!(report.cases[0].aborted);
    assert_eq!(report.cases[0].duration_ms, 3000.0);
}

#[test]
fn stop_during_outage_restores_immediately() {
    let mut o = orch(fixtures::MINIMAL);
    let before = o.topology_json();
    let mut case = bandwidth_case(
        "c",
        (ResourceKind::Router, "router1"),
        FaultSpec::persistent_loss(timing(0, 1, 0)),
    );
    case.target = None;
    case.spec = None;
    case.config_fault = Some(ConfigFault {
        kind: ResourceKind::Router,
        id: "router1".into(),
        outage_ms: 60_000,
        pre_ms: 1000,
        post_ms: 1000,
    });
    let id = o
        .start_tests(
            &tenant_a(),
            Plan {
                baseline: false,
                cases: vec![case],
            },
        )
        .unwrap();
    o.advance(SimTime::from_ms(5000));
    assert_ne!(o.topology_json(), before);
    o.stop_tests(id).unwrap();
    assert_eq!(o.topology_json(), before);
}

#[test]
fn router_outage_makes_cross_subnet_flows_unreachable() {
    let mut o = orch(fixtures::MINIMAL);
    let mut case = bandwidth_case(
        "outage",
        (ResourceKind::Router, "router1"),
        FaultSpec::persistent_loss(timing(0, 1, 0)),
    );
    case.target = None;
    case.spec = None;
    case.config_fault = Some(ConfigFault {
        kind: ResourceKind::Router,
        id: "router1".into(),
        outage_ms: 5000,
        pre_ms: 2000,
        post_ms: 3000,
    });
    let id = o
        .start_tests(
            &tenant_a(),
            Plan {
                baseline: false,
                cases: vec![case],
            },
        )
        .unwrap();
    o.run_campaign(id).unwrap();
    let bundle = o.report(id).unwrap();
    for line in bundle.events_log.lines() {
        let e: FlowEvent = serde_json::from_str(line).unwrap();
        let inside = e.sent_at >= SimTime::from_ms(2000) && e.sent_at < SimTime::from_ms(7000);
        match e.kind {
            FlowEventKind::Unreachable => assert!(inside, "{e:?}"),
            FlowEventKind::Delivered => assert!(!inside, "{e:?}"),
            _ => {}
        }
    }
    let report = bundle.report().unwrap();
    assert_eq!(report.cases[0].metrics.as_ref().unwrap().counts.unreachable, 500);
}

#[test]
fn request_response_via_floating_ip_is_accepted() {
    let mut o = orch(fixtures::MINIMAL);
    let attach = Attach {
        client_port_ids: vec!["port-ext-client".into()],
        floating_ip_id: Some("fip1".into()),
        ..Attach::default()
    };
    let mut case = bandwidth_case(
        "rr",
        (ResourceKind::FloatingIp, "fip1"),
        FaultSpec::persistent_loss(timing(1000, 1000, 1000)),
    );
    case.workload = WorkloadConfig::request_response("port-ext-client", attach, 2, 120.0);
    let id = o
        .start_tests(
            &tenant_a(),
            Plan {
                baseline: false,
                cases: vec![case],
            },
        )
        .unwrap();
    assert_eq!(o.run_campaign(id).unwrap(), CampaignState::Finished);
}
