//! End-to-end checks on the reference platform.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ptx_twin::aas::{serialize_shell, AdministrationShell, DecisionLevel};
use ptx_twin::adaption::{
    adapt, compute_deviation, evaluate_surrogate, select_configuration, simulate, AdaptError,
    AdaptionVerdict, Budget, Scenario, SelectionPolicy, SimulationSettings, TelemetrySeries,
    Thresholds,
};
use ptx_twin::demo;
use ptx_twin::ingest::{build_hierarchy, read_aasx, read_dir, ProductionSequence};
use ptx_twin::kgraph::{
    build_graph, query_models, EdgeKind, KnowledgeGraph, ModelFilter, NodeKind,
};
use ptx_twin::matcher::{is_excluded, match_ports, ExclusionReason, RangeMode, UnitRegistry};

fn graph_of(shells: &[AdministrationShell], sequence: &ProductionSequence) -> KnowledgeGraph {
    let tree = build_hierarchy(shells, demo::ROOT).unwrap();
    build_graph(shells, &tree, sequence).unwrap()
}

fn matched(shells: &[AdministrationShell]) -> KnowledgeGraph {
    let sequence = demo::sequence();
    let (g, _) = match_ports(
        &graph_of(shells, &sequence),
        &sequence,
        &UnitRegistry::builtin(),
        RangeMode::Subset,
    )
    .unwrap();
    g
}

fn fixtures() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[test]
fn fixtures_match_the_reference_platform() {
    for (dir, shells) in [
        (fixtures(), demo::platform_shells()),
        (
            fixtures().join("alt"),
            demo::platform_shells_with_alternative(),
        ),
    ] {
        for shell in &shells {
            let on_disk =
                std::fs::read_to_string(dir.join("shells").join(format!("{}.json", shell.id)))
                    .unwrap();
            assert_eq!(
                on_disk,
                serialize_shell(shell),
                "{} is stale; rerun make_fixtures",
                shell.id
            );
        }
        let mut from_dir = read_dir(&dir.join("shells")).unwrap();
        let mut expected = shells.clone();
        from_dir.sort_by(|a, b| a.id.cmp(&b.id));
        expected.sort_by(|a, b| a.id.cmp(&b.id));
        assert_eq!(from_dir, expected);
    }
    let aasx = read_aasx(&std::fs::read(fixtures().join("platform.aasx")).unwrap()).unwrap();
    assert_eq!(aasx.len(), 4);
    for (name, scenario) in [
        ("drift", demo::drift_scenario()),
        ("small_drift", demo::small_drift_scenario()),
        ("jump", demo::jump_scenario()),
    ] {
        let text =
            std::fs::read_to_string(fixtures().join("scenarios").join(format!("{name}.json")))
                .unwrap();
        assert_eq!(Scenario::from_json(&text).unwrap(), scenario);
    }
}

#[test]
fn platform_graph_shape() {
    let graph = graph_of(&demo::platform_shells(), &demo::sequence());
    assert_eq!(graph.nodes_of_kind(NodeKind::Asset).count(), 4);
    assert_eq!(graph.nodes_of_kind(NodeKind::Model).count(), 3);
    assert_eq!(graph.nodes_of_kind(NodeKind::Port).count(), 8);
    assert_eq!(graph.edges_of_kind(EdgeKind::HasPart).count(), 3);
    assert_eq!(graph.edges_of_kind(EdgeKind::FollowedBy).count(), 2);
    assert_eq!(graph.edges_of_kind(EdgeKind::DescribedBy).count(), 3);
    assert_eq!(graph.edges_of_kind(EdgeKind::HasPort).count(), 8);
    assert_eq!(graph.edges_of_kind(EdgeKind::ConnectsWith).count(), 0);
    assert_eq!(
        graph.followed_by_chain().unwrap(),
        ["asset:DAC", "asset:Electrolysis", "asset:Methanation"]
    );
}

#[test]
fn co2_in_grams_per_second_gets_a_conversion_factor() {
    let mut shells = demo::platform_shells();
    let mut methanation = demo::methanation_model();
    let co2 = methanation
        .ports
        .iter_mut()
        .find(|p| p.name == "CO2")
        .unwrap();
    co2.unit = "g/s".into();
    co2.range.max = 10.0;
    shells[3] = AdministrationShell::new(
        demo::METHANATION,
        demo::METHANATION,
        ptx_twin::aas::AssetKind::Instance,
    )
    .with_submodel(ptx_twin::aas::simulation_submodel(
        "SimulationModels",
        &[methanation],
    ));
    let sequence = demo::sequence();
    let (_, report) = match_ports(
        &graph_of(&shells, &sequence),
        &sequence,
        &UnitRegistry::builtin(),
        RangeMode::Subset,
    )
    .unwrap();
    let edge = report
        .edges_added
        .iter()
        .find(|e| e.in_port_id == "port:MethanationModel#CO2")
        .unwrap();
    // 1 kg/h = 1000 g / 3600 s
    assert!((edge.conversion_factor - 1000.0 / 3600.0).abs() < 1e-15);
    assert_eq!(report.edges_added.len(), 2);
}

#[test]
fn power_in_megawatts_overlaps_but_is_not_a_subset() {
    let mut shells = demo::platform_shells();
    let mut dac = demo::dac_model();
    dac.ports.push(ptx_twin::aas::Port {
        name: "power".into(),
        direction: ptx_twin::aas::Direction::Output,
        quantity: "electric_power".into(),
        unit: "MW".into(),
        range: ptx_twin::aas::PortRange::new(0.0, 1.0),
        datatype: ptx_twin::aas::Datatype::Real,
    });
    shells[1] = AdministrationShell::new(demo::DAC, demo::DAC, ptx_twin::aas::AssetKind::Instance)
        .with_submodel(ptx_twin::aas::simulation_submodel(
            "SimulationModels",
            &[dac],
        ));
    let sequence = demo::sequence();
    let graph = graph_of(&shells, &sequence);
    let registry = UnitRegistry::builtin();
    let (_, subset) = match_ports(&graph, &sequence, &registry, RangeMode::Subset).unwrap();
    let (_, overlap) = match_ports(&graph, &sequence, &registry, RangeMode::Overlap).unwrap();
    assert!(subset
        .edges_added
        .iter()
        .all(|e| e.out_port_id != "port:DacModel#power"));
    let power: Vec<_> = overlap
        .edges_added
        .iter()
        .filter(|e| e.out_port_id == "port:DacModel#power")
        .collect();
    assert_eq!(power.len(), 2);
    assert!(power.iter().all(|e| e.conversion_factor == 1000.0));
}

#[test]
fn single_step_sequence_excludes_every_model() {
    let shells = demo::platform_shells();
    let sequence =
        ProductionSequence::new(demo::SYSTEM_ID, vec![demo::METHANATION.into()]).unwrap();
    let (graph, report) = match_ports(
        &graph_of(&shells, &sequence),
        &sequence,
        &UnitRegistry::builtin(),
        RangeMode::Subset,
    )
    .unwrap();
    assert!(report.edges_added.is_empty());
    let reasons: BTreeMap<&str, ExclusionReason> = report
        .excluded_models
        .iter()
        .map(|e| (e.model_id.as_str(), e.reason))
        .collect();
    assert_eq!(reasons["DacModel"], ExclusionReason::NotInSequence);
    assert_eq!(reasons["ElectrolysisModel"], ExclusionReason::NotInSequence);
    assert_eq!(
        reasons["MethanationModel"],
        ExclusionReason::NoTopologyConnection
    );
    assert!(is_excluded(&graph, "MethanationModel"));
    let err = select_configuration(
        &graph,
        DecisionLevel::Control,
        &Budget::default(),
        &BTreeSet::new(),
    )
    .unwrap_err();
    assert_eq!(err.code(), "Infeasible");
}

#[test]
fn selection_prefers_accuracy_then_time() {
    let graph = matched(&demo::platform_shells_with_alternative());
    let best = select_configuration(
        &graph,
        DecisionLevel::Control,
        &Budget::default(),
        &BTreeSet::new(),
    )
    .unwrap();
    assert_eq!(best.selection["Methanation"], "MethanationModel");
    assert_eq!(best.total_computing_time, 13.0);
    assert_eq!(best.min_accuracy, 0.8);
    assert_eq!(best.bindings.len(), 2);

    // 1 + 2 + 10 s exceeds the budget, 1 + 2 + 2 s does not
    let tight = Budget {
        max_computing_time: 12.0,
        min_accuracy: 0.0,
    };
    let fast =
        select_configuration(&graph, DecisionLevel::Control, &tight, &BTreeSet::new()).unwrap();
    assert_eq!(fast.selection["Methanation"], "MethanationFast");
    assert_eq!(fast.total_computing_time, 5.0);
    assert_eq!(fast.min_accuracy, 0.7);

    let strict = Budget {
        max_computing_time: 12.0,
        min_accuracy: 0.75,
    };
    let err = select_configuration(&graph, DecisionLevel::Control, &strict, &BTreeSet::new())
        .unwrap_err();
    assert_eq!(err.path().as_deref(), Some("Methanation"));

    let err = select_configuration(
        &graph,
        DecisionLevel::Planning,
        &Budget::default(),
        &BTreeSet::new(),
    )
    .unwrap_err();
    assert_eq!(err.code(), "Infeasible");
}

#[test]
fn query_by_asset_and_level() {
    let graph = matched(&demo::platform_shells_with_alternative());
    let filter = ModelFilter {
        asset_id: Some("Methanation".into()),
        decision_level: Some(DecisionLevel::Control),
        ..ModelFilter::default()
    };
    assert_eq!(
        query_models(&graph, &filter),
        ["MethanationFast", "MethanationModel"]
    );
}

#[test]
fn surrogate_clamps_unless_strict() {
    let model = demo::electrolysis_model();
    let inputs = BTreeMap::from([("power".to_string(), 6.0)]);
    let out = evaluate_surrogate(&model, &inputs, false).unwrap();
    assert_eq!(out.values["H2"], 10.0);
    assert_eq!(out.values["O2"], 80.0);
    assert_eq!(out.clamped.len(), 2);
    let err = evaluate_surrogate(&model, &inputs, true).unwrap_err();
    assert_eq!(err.code(), "OutOfRange");
    let err = evaluate_surrogate(&model, &BTreeMap::new(), false).unwrap_err();
    assert_eq!(err.path().as_deref(), Some("ElectrolysisModel#power"));
}

fn constant(name: &str, value: f64) -> TelemetrySeries {
    TelemetrySeries::new(name, (1..=60).map(|t| (t as f64, value)).collect()).unwrap()
}

#[test]
fn ten_times_epsilon_reselects_without_the_offender() {
    let mut graph = matched(&demo::platform_shells_with_alternative());
    let policy = SelectionPolicy::default();
    let current =
        select_configuration(&graph, policy.level, &policy.budget, &policy.exclude).unwrap();
    let thresholds = Thresholds::default();
    // simulated 15 against measured 10 on CH4: 0.5 = 10 * epsilon
    let sim = [
        constant("MethanationModel#CH4", 15.0),
        constant("DacModel#CO2", 11.0),
    ];
    let meas = [
        constant("MethanationModel#CH4", 10.0),
        constant("DacModel#CO2", 11.0),
    ];
    let deviation = compute_deviation(&sim, &meas, 60.0).unwrap();
    assert!((deviation.aggregate - 0.5).abs() < 1e-12);
    let decision = adapt(
        &mut graph,
        &current,
        &deviation,
        &thresholds,
        &meas,
        &policy,
    )
    .unwrap();
    assert_eq!(decision.verdict, AdaptionVerdict::Reselect);
    assert_eq!(
        decision.offending_model.as_deref(),
        Some("MethanationModel")
    );
    let config = decision.new_configuration.unwrap();
    assert_eq!(config.selection["Methanation"], "MethanationFast");
    let node = graph.node("model:MethanationModel").unwrap();
    assert_eq!(node.properties["evaluationCount"], 1);
    assert_eq!(node.properties["lastDeviation"], 0.5);
}

#[test]
fn reselection_without_alternative_is_infeasible() {
    let mut graph = matched(&demo::platform_shells());
    let policy = SelectionPolicy::default();
    let current =
        select_configuration(&graph, policy.level, &policy.budget, &policy.exclude).unwrap();
    let sim = [constant("MethanationModel#CH4", 20.0)];
    let meas = [constant("MethanationModel#CH4", 10.0)];
    let deviation = compute_deviation(&sim, &meas, 60.0).unwrap();
    let err = adapt(
        &mut graph,
        &current,
        &deviation,
        &Thresholds::default(),
        &meas,
        &policy,
    )
    .unwrap_err();
    assert!(matches!(err, AdaptError::Infeasible { ref asset, .. } if asset == "Methanation"));
}

#[test]
fn drift_is_absorbed_by_refitting() {
    let graph = matched(&demo::platform_shells());
    let (adapted, records) = simulate(
        &graph,
        &demo::drift_scenario(),
        &SimulationSettings::default(),
    )
    .unwrap();
    let verdicts: Vec<_> = records.iter().map(|r| r.verdict).collect();
    assert_eq!(
        verdicts,
        [
            AdaptionVerdict::Keep,
            AdaptionVerdict::Reparameterize,
            AdaptionVerdict::Keep
        ]
    );
    assert_eq!(
        records[1].offending_model.as_deref(),
        Some("ElectrolysisModel")
    );
    let spec = adapted
        .descriptor("ElectrolysisModel")
        .unwrap()
        .surrogate
        .unwrap();
    assert!((spec.a[0][0] - 2.5).abs() < 1e-9);
    assert!((spec.a[1][0] - 16.0).abs() < 1e-9);
    assert!(spec.b.iter().all(|b| b.abs() < 1e-9));
    assert!(records[2].aggregate < 1e-9);
}

#[test]
fn small_drift_is_kept() {
    let graph = matched(&demo::platform_shells());
    let (_, records) = simulate(
        &graph,
        &demo::small_drift_scenario(),
        &SimulationSettings::default(),
    )
    .unwrap();
    assert!(records.iter().all(|r| r.verdict == AdaptionVerdict::Keep));
    assert!(records[1].aggregate > 0.0);
}

#[test]
fn jump_switches_to_the_alternative_model() {
    let graph = matched(&demo::platform_shells_with_alternative());
    let (_, records) = simulate(
        &graph,
        &demo::jump_scenario(),
        &SimulationSettings::default(),
    )
    .unwrap();
    let verdicts: Vec<_> = records.iter().map(|r| r.verdict).collect();
    assert_eq!(
        verdicts,
        [
            AdaptionVerdict::Keep,
            AdaptionVerdict::Reselect,
            AdaptionVerdict::Keep
        ]
    );
    assert_eq!(records[2].selection["Methanation"], "MethanationFast");
}

#[test]
fn deviation_is_relative_to_the_measured_signal() {
    // closed form on constant series: |s - m| / |m|
    let sim = [constant("M#y", 10.0)];
    let meas = [constant("M#y", 11.0)];
    let d = compute_deviation(&sim, &meas, 60.0).unwrap();
    assert!((d.aggregate - 1.0 / 11.0).abs() < 1e-15);
    let d = compute_deviation(&meas, &sim, 60.0).unwrap();
    assert!((d.aggregate - 0.1).abs() < 1e-15);
}
