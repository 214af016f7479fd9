//! Instance generators and independent oracles shared by the integration
//! and acceptance tests. The oracles deliberately avoid the library's own
//! matching, hierarchy and selection code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use ptx_twin::aas::{
    bom_submodel, simulation_submodel, AdministrationShell, AssetKind, Datatype, DecisionLevel,
    Direction, ElementPayload, LevelOfDetail, Port, PortRange, PropertyValue,
    SimulationModelDescriptor, SolverSpec, Submodel, SubmodelElement, SubmodelKind,
};
use ptx_twin::ingest::{build_hierarchy, ProductionSequence};
use ptx_twin::kgraph::{build_graph, EdgeKind, KnowledgeGraph, NodeKind};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- units

/// Independent unit table: (symbol, dimension label, scale to SI, affine).
pub const UNIT_TABLE: &[(&str, &str, f64, bool)] = &[
    ("kg/h", "mass/time", 1.0 / 3600.0, false),
    ("g/s", "mass/time", 1e-3, false),
    ("kg/s", "mass/time", 1.0, false),
    ("t/h", "mass/time", 1e3 / 3600.0, false),
    ("W", "energy/time", 1.0, false),
    ("kW", "energy/time", 1e3, false),
    ("MW", "energy/time", 1e6, false),
    ("K", "temperature", 1.0, false),
    ("°C", "temperature", 1.0, true),
    ("bar", "pressure", 1e5, false),
    ("kPa", "pressure", 1e3, false),
];

/// A symbol the library registry does not know.
pub const UNKNOWN_UNIT: &str = "furlong/fortnight";

pub fn oracle_factor(from: &str, to: &str) -> Option<f64> {
    if from == to {
        return UNIT_TABLE.iter().any(|u| u.0 == from).then_some(1.0);
    }
    let a = UNIT_TABLE.iter().find(|u| u.0 == from)?;
    let b = UNIT_TABLE.iter().find(|u| u.0 == to)?;
    if a.1 != b.1 || a.3 || b.3 {
        return None;
    }
    Some(a.2 / b.2)
}

// ------------------------------------------------------ model instances

pub fn descriptor(model_id: &str, owner: &str, ports: Vec<Port>) -> SimulationModelDescriptor {
    SimulationModelDescriptor {
        model_id: model_id.into(),
        owner_asset_id: owner.into(),
        storage_location: format!("file:///m/{model_id}"),
        simulation_environment: "test".into(),
        solver: SolverSpec {
            method: "euler".into(),
            step_size: 0.5,
            tolerance: 1e-6,
        },
        parameters: vec![],
        ports,
        level_of_detail: LevelOfDetail::ProcessUnit,
        discipline: "test".into(),
        decision_level: DecisionLevel::Control,
        computing_time: 1.0,
        accuracy: 0.5,
        surrogate: None,
    }
}

pub struct Instance {
    pub shells: Vec<AdministrationShell>,
    pub sequence: ProductionSequence,
    pub models: Vec<SimulationModelDescriptor>,
}

impl Instance {
    pub fn graph(&self) -> KnowledgeGraph {
        let tree = build_hierarchy(&self.shells, "Root").expect("generated hierarchy");
        build_graph(&self.shells, &tree, &self.sequence).expect("generated graph")
    }
}

fn random_port(rng: &mut ChaCha8Rng, name: String, quantities: &[&str]) -> Port {
    let direction = if rng.gen_bool(0.5) {
        Direction::Input
    } else {
        Direction::Output
    };
    let datatype = *[
        Datatype::Real,
        Datatype::Real,
        Datatype::Integer,
        Datatype::Boolean,
    ]
    .choose(rng)
    .unwrap();
    let unit = if rng.gen_bool(0.05) {
        UNKNOWN_UNIT.to_string()
    } else {
        UNIT_TABLE.choose(rng).unwrap().0.to_string()
    };
    let range = if datatype.is_numeric() {
        let min = rng.gen_range(0..4) as f64;
        PortRange::new(min, min + rng.gen_range(0..3000) as f64)
    } else {
        PortRange::MARKER
    };
    Port {
        name,
        direction,
        quantity: quantities.choose(rng).unwrap().to_string(),
        unit,
        range,
        datatype,
    }
}

/// Random production system: up to `max_assets` assets under one root,
/// each with up to `max_models` models of up to `max_ports` ports. The
/// sequence is a random ordering of a random non-empty subset of assets.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_assets: usize,
    max_models: usize,
    max_ports: usize,
) -> Instance {
    let quantities = ["flow", "power", "heat"];
    let n_assets = rng.gen_range(1..=max_assets);
    let assets: Vec<String> = (0..n_assets).map(|i| format!("A{i}")).collect();
    let mut shells = vec![
        AdministrationShell::new("Root", "Root", AssetKind::Instance)
            .with_submodel(bom_submodel("BillOfMaterial", &assets)),
    ];
    let mut models = Vec::new();
    for asset in &assets {
        let mut own = Vec::new();
        for m in 0..rng.gen_range(0..=max_models) {
            let ports = (0..rng.gen_range(1..=max_ports))
                .map(|p| random_port(rng, format!("p{p}"), &quantities))
                .collect();
            own.push(descriptor(&format!("{asset}M{m}"), asset, ports));
        }
        let mut shell = AdministrationShell::new(asset.clone(), asset.clone(), AssetKind::Instance);
        if !own.is_empty() {
            shell = shell.with_submodel(simulation_submodel("SimulationModels", &own));
        }
        shells.push(shell);
        models.extend(own);
    }
    let mut steps = assets.clone();
    steps.shuffle(rng);
    steps.truncate(rng.gen_range(1..=n_assets));
    Instance {
        shells,
        sequence: ProductionSequence {
            system_id: "Sys".into(),
            steps,
        },
        models,
    }
}

// ------------------------------------------------------- matcher oracle

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OracleEdge {
    pub out_port: String,
    pub in_port: String,
    /// Bit pattern of the conversion factor, so equality is exact.
    pub factor_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleMatch {
    pub edges: Vec<OracleEdge>,
    /// model id -> "notInSequence" | "noTopologyConnection"
    pub excluded: BTreeMap<String, String>,
    pub unsatisfied: Vec<(String, String)>,
}

fn oracle_compatible(out: &Port, input: &Port, subset: bool) -> Option<f64> {
    if out.quantity != input.quantity {
        return None;
    }
    let datatype_ok = out.datatype == input.datatype
        || (out.datatype == Datatype::Integer && input.datatype == Datatype::Real);
    if !datatype_ok {
        return None;
    }
    let f = oracle_factor(&out.unit, &input.unit)?;
    let numeric = |d: Datatype| d == Datatype::Real || d == Datatype::Integer;
    if numeric(out.datatype) && numeric(input.datatype) {
        let (lo, hi) = (out.range.min * f, out.range.max * f);
        let ok = if subset {
            input.range.min <= lo && hi <= input.range.max
        } else {
            lo <= input.range.max && input.range.min <= hi
        };
        if !ok {
            return None;
        }
    }
    Some(f)
}

/// Enumerates every ordered pair of ports across all models and keeps
/// output -> input pairs whose owners respect the sequence order.
pub fn brute_force_match(
    models: &[SimulationModelDescriptor],
    steps: &[String],
    subset: bool,
) -> OracleMatch {
    let pos = |asset: &str| steps.iter().position(|s| s == asset);
    let mut result = OracleMatch::default();
    let mut incident: BTreeSet<&str> = BTreeSet::new();
    let mut fed: BTreeSet<(String, String)> = BTreeSet::new();
    for a in models {
        for p in &a.ports {
            for b in models {
                for q in &b.ports {
                    let (Some(i), Some(j)) = (pos(&a.owner_asset_id), pos(&b.owner_asset_id))
                    else {
                        continue;
                    };
                    if i >= j || p.direction != Direction::Output || q.direction != Direction::Input
                    {
                        continue;
                    }
                    if let Some(f) = oracle_compatible(p, q, subset) {
                        result.edges.push(OracleEdge {
                            out_port: format!("port:{}#{}", a.model_id, p.name),
                            in_port: format!("port:{}#{}", b.model_id, q.name),
                            factor_bits: f.to_bits(),
                        });
                        incident.insert(&a.model_id);
                        incident.insert(&b.model_id);
                        fed.insert((b.model_id.clone(), q.name.clone()));
                    }
                }
            }
        }
    }
    result.edges.sort();
    for m in models {
        match pos(&m.owner_asset_id) {
            None => {
                result
                    .excluded
                    .insert(m.model_id.clone(), "notInSequence".into());
            }
            Some(_) if !incident.contains(m.model_id.as_str()) => {
                result
                    .excluded
                    .insert(m.model_id.clone(), "noTopologyConnection".into());
            }
            Some(0) => {}
            Some(_) => {
                for q in m.ports.iter().filter(|q| q.direction == Direction::Input) {
                    if !fed.contains(&(m.model_id.clone(), q.name.clone())) {
                        result
                            .unsatisfied
                            .push((m.model_id.clone(), q.name.clone()));
                    }
                }
            }
        }
    }
    result.unsatisfied.sort();
    result
}

/// Same shape as [`OracleMatch`], read back from a library report.
pub fn from_report(report: &ptx_twin::matcher::MatchReport) -> OracleMatch {
    let mut edges: Vec<OracleEdge> = report
        .edges_added
        .iter()
        .map(|e| OracleEdge {
            out_port: e.out_port_id.clone(),
            in_port: e.in_port_id.clone(),
            factor_bits: e.conversion_factor.to_bits(),
        })
        .collect();
    edges.sort();
    let mut unsatisfied: Vec<(String, String)> = report
        .unsatisfied_inputs
        .iter()
        .map(|u| (u.model_id.clone(), u.port_name.clone()))
        .collect();
    unsatisfied.sort();
    OracleMatch {
        edges,
        excluded: report
            .excluded_models
            .iter()
            .map(|e| (e.model_id.clone(), e.reason.as_str().to_string()))
            .collect(),
        unsatisfied,
    }
}

// ----------------------------------------------------- hierarchy oracle

/// Random DAG over `n` nodes (`N0` is the root); edges only go from lower
/// to higher index.
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, p: f64) -> BTreeMap<String, Vec<String>> {
    let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for i in 0..n {
        let mut list = Vec::new();
        for j in i + 1..n {
            if rng.gen_bool(p) {
                list.push(format!("N{j}"));
            }
        }
        children.insert(format!("N{i}"), list);
    }
    children
}

/// Random tree: every node but the root gets one earlier parent.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> BTreeMap<String, Vec<String>> {
    let mut children: BTreeMap<String, Vec<String>> =
        (0..n).map(|i| (format!("N{i}"), Vec::new())).collect();
    for j in 1..n {
        let parent = rng.gen_range(0..j);
        children
            .get_mut(&format!("N{parent}"))
            .unwrap()
            .push(format!("N{j}"));
    }
    children
}

pub fn shells_from_bom(children: &BTreeMap<String, Vec<String>>) -> Vec<AdministrationShell> {
    children
        .iter()
        .map(|(id, kids)| {
            let shell = AdministrationShell::new(id.clone(), id.clone(), AssetKind::Instance);
            if kids.is_empty() {
                shell
            } else {
                shell.with_submodel(bom_submodel("BillOfMaterial", kids))
            }
        })
        .collect()
}

pub enum HierarchyExpectation {
    /// Reachable set and each reachable non-root node's unique parent.
    Tree {
        reachable: BTreeSet<String>,
        parent: BTreeMap<String, String>,
    },
    MultipleParents,
}

/// Breadth-first reachability from `root`, then a parent count per
/// reachable node (counting only reachable parents).
pub fn bfs_oracle(children: &BTreeMap<String, Vec<String>>, root: &str) -> HierarchyExpectation {
    let mut reachable = BTreeSet::from([root.to_string()]);
    let mut queue = VecDeque::from([root.to_string()]);
    while let Some(node) = queue.pop_front() {
        for child in &children[&node] {
            if reachable.insert(child.clone()) {
                queue.push_back(child.clone());
            }
        }
    }
    let mut parent = BTreeMap::new();
    for node in &reachable {
        for child in &children[node] {
            if parent.insert(child.clone(), node.clone()).is_some() {
                return HierarchyExpectation::MultipleParents;
            }
        }
    }
    HierarchyExpectation::Tree { reachable, parent }
}

/// Ancestors of `node` in a tree (root first).
pub fn ancestors(children: &BTreeMap<String, Vec<String>>, node: &str) -> Vec<String> {
    let parent_of = |n: &str| {
        children
            .iter()
            .find(|(_, kids)| kids.iter().any(|k| k == n))
            .map(|(p, _)| p.clone())
    };
    let mut chain = Vec::new();
    let mut current = node.to_string();
    while let Some(p) = parent_of(&current) {
        chain.push(p.clone());
        current = p;
    }
    chain.reverse();
    chain
}

// ----------------------------------------------------- selection oracle

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub models: Vec<String>,
    pub min_accuracy: f64,
    pub time: f64,
}

/// Enumerates the full cartesian product of per-asset candidates and
/// returns the optimum, or `None` when nothing is feasible.
pub fn exhaustive_selection(
    graph: &KnowledgeGraph,
    steps: &[String],
    level: DecisionLevel,
    max_time: f64,
    min_accuracy: f64,
    exclude: &BTreeSet<String>,
) -> Option<OracleConfig> {
    let prop = |id: &str, key: &str| graph.node(id).and_then(|n| n.properties.get(key)).cloned();
    let candidates: Vec<Vec<(String, f64, f64)>> = steps
        .iter()
        .map(|asset| {
            graph
                .nodes_of_kind(NodeKind::Model)
                .filter(|n| n.properties.get("ownerAssetId").and_then(Value::as_str) == Some(asset))
                .filter(|n| {
                    n.properties.get("decisionLevel").and_then(Value::as_str)
                        == Some(level.as_str())
                })
                .filter(|n| !n.properties.contains_key("excluded"))
                .map(|n| {
                    (
                        n.properties["modelId"].as_str().unwrap().to_string(),
                        n.properties["accuracy"].as_f64().unwrap(),
                        n.properties["computingTime"].as_f64().unwrap(),
                    )
                })
                .filter(|(id, _, _)| !exclude.contains(id))
                .collect()
        })
        .collect();
    // input port -> models that feed it through a matched edge
    let mut feeders: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for e in graph.edges_of_kind(EdgeKind::ConnectsWith) {
        let src = prop(e.src, "modelId")
            .unwrap()
            .as_str()
            .unwrap()
            .to_string();
        feeders.entry(e.dst.to_string()).or_default().insert(src);
    }
    let inputs_of = |model: &str| -> Vec<String> {
        graph
            .nodes_of_kind(NodeKind::Port)
            .filter(|p| p.properties.get("modelId").and_then(Value::as_str) == Some(model))
            .filter(|p| p.properties.get("direction").and_then(Value::as_str) == Some("input"))
            .map(|p| p.id.clone())
            .collect()
    };

    let total: usize = candidates.iter().map(Vec::len).product();
    let mut best: Option<OracleConfig> = None;
    for mut index in 0..total {
        let mut pick = Vec::with_capacity(steps.len());
        for list in &candidates {
            pick.push(&list[index % list.len()]);
            index /= list.len();
        }
        let selected: BTreeSet<&str> = pick.iter().map(|c| c.0.as_str()).collect();
        let mut time = 0.0;
        for c in &pick {
            time += c.2;
        }
        let min_acc = pick.iter().map(|c| c.1).fold(1.0, f64::min);
        if time > max_time || min_acc < min_accuracy {
            continue;
        }
        let bound = pick.iter().skip(1).all(|c| {
            inputs_of(&c.0).iter().all(|port| match feeders.get(port) {
                None => true,
                Some(srcs) => srcs.iter().any(|s| selected.contains(s.as_str())),
            })
        });
        if !bound {
            continue;
        }
        let candidate = OracleConfig {
            models: pick.iter().map(|c| c.0.clone()).collect(),
            min_accuracy: min_acc,
            time,
        };
        let replace = match &best {
            None => true,
            Some(b) => {
                candidate.min_accuracy > b.min_accuracy
                    || (candidate.min_accuracy == b.min_accuracy && candidate.time < b.time)
                    || (candidate.min_accuracy == b.min_accuracy
                        && candidate.time == b.time
                        && candidate.models < b.models)
            }
        };
        if replace {
            best = Some(candidate);
        }
    }
    best
}

/// Random selection instance: 2 to `max_assets` sequence assets with up
/// to `max_models` models each, ports drawn from two quantities so that
/// some inputs can only be fed by some upstream models.
pub fn random_selection_instance(
    rng: &mut ChaCha8Rng,
    max_assets: usize,
    max_models: usize,
) -> Instance {
    let n_assets = rng.gen_range(2..=max_assets);
    let assets: Vec<String> = (0..n_assets).map(|i| format!("A{i}")).collect();
    let mut shells = vec![
        AdministrationShell::new("Root", "Root", AssetKind::Instance)
            .with_submodel(bom_submodel("BillOfMaterial", &assets)),
    ];
    let mut models = Vec::new();
    let quantities = ["x", "y"];
    for (i, asset) in assets.iter().enumerate() {
        let mut own = Vec::new();
        for m in 0..rng.gen_range(1..=max_models) {
            let mut ports = Vec::new();
            // outputs whose range may exceed the downstream inputs, so that
            // only some upstream models can feed a given input
            for q in ["x", "y"] {
                if q == "x" || rng.gen_bool(0.5) {
                    ports.push(Port {
                        name: format!("out_{q}"),
                        direction: Direction::Output,
                        quantity: q.into(),
                        unit: "kg/h".into(),
                        range: PortRange::new(0.0, *[5.0, 10.0, 20.0].choose(rng).unwrap()),
                        datatype: Datatype::Real,
                    });
                }
            }
            if i > 0 {
                for k in 0..rng.gen_range(1..=2) {
                    ports.push(Port {
                        name: format!("in{k}"),
                        direction: Direction::Input,
                        quantity: quantities.choose(rng).unwrap().to_string(),
                        unit: "kg/h".into(),
                        range: PortRange::new(0.0, 10.0),
                        datatype: Datatype::Real,
                    });
                }
            }
            let mut d = descriptor(&format!("{asset}M{m}"), asset, ports);
            d.accuracy = *[0.5, 0.6, 0.7, 0.8, 0.9].choose(rng).unwrap();
            d.computing_time = *[1.0, 2.0, 3.0, 5.0].choose(rng).unwrap();
            if rng.gen_bool(0.05) {
                d.decision_level = DecisionLevel::Planning;
            }
            own.push(d);
        }
        shells.push(
            AdministrationShell::new(asset.clone(), asset.clone(), AssetKind::Instance)
                .with_submodel(simulation_submodel("SimulationModels", &own)),
        );
        models.extend(own);
    }
    Instance {
        shells,
        sequence: ProductionSequence {
            system_id: "Sys".into(),
            steps: assets,
        },
        models,
    }
}

// ---------------------------------------------------------- shell trees

const TEXT_POOL: &[&str] = &[
    "",
    "plain",
    "with \"quotes\"",
    "ümlaut ✓",
    "line\nbreak",
    "tab\there",
    "back\\slash",
];
const UNIT_POOL: &[&str] = &["kg/h", "°C", "1", "kWh"];

fn random_id_short(rng: &mut ChaCha8Rng, taken: &mut BTreeSet<String>) -> String {
    loop {
        let first = (b'A' + rng.gen_range(0..26)) as char;
        let rest: String = (0..rng.gen_range(0..6))
            .map(|_| *b"abcxyz019_".choose(rng).unwrap() as char)
            .collect();
        let id = format!("{first}{rest}");
        if taken.insert(id.clone()) {
            return id;
        }
    }
}

fn random_element(
    rng: &mut ChaCha8Rng,
    depth: usize,
    taken: &mut BTreeSet<String>,
) -> SubmodelElement {
    let id_short = random_id_short(rng, taken);
    let payload = match rng.gen_range(0..if depth > 0 { 4 } else { 3 }) {
        0 => ElementPayload::Property {
            value: match rng.gen_range(0..3) {
                0 => PropertyValue::String(TEXT_POOL.choose(rng).unwrap().to_string()),
                1 => PropertyValue::Number(if rng.gen_bool(0.3) {
                    rng.gen_range(-1000..1000) as f64
                } else {
                    rng.gen::<f64>() * 10f64.powi(rng.gen_range(-8..9))
                }),
                _ => PropertyValue::Boolean(rng.gen()),
            },
            unit: rng
                .gen_bool(0.4)
                .then(|| UNIT_POOL.choose(rng).unwrap().to_string()),
        },
        1 => ElementPayload::Reference(format!("urn:asset:{}", rng.gen_range(0..100))),
        2 => ElementPayload::Collection(Vec::new()),
        _ => {
            let mut inner = BTreeSet::new();
            ElementPayload::Collection(
                (0..rng.gen_range(0..4))
                    .map(|_| random_element(rng, depth - 1, &mut inner))
                    .collect(),
            )
        }
    };
    SubmodelElement { id_short, payload }
}

/// Random but valid shell tree.
pub fn random_shell(rng: &mut ChaCha8Rng) -> AdministrationShell {
    let mut shell = AdministrationShell::new(
        format!("urn:shell:{}", rng.gen_range(0..1_000_000)),
        "Shell",
        if rng.gen_bool(0.5) {
            AssetKind::Instance
        } else {
            AssetKind::Type
        },
    );
    let mut submodel_names = BTreeSet::new();
    for _ in 0..rng.gen_range(0..4) {
        let mut taken = BTreeSet::new();
        let kind = match rng.gen_range(0..3) {
            0 => SubmodelKind::Other("Nameplate".into()),
            1 => SubmodelKind::Other("TechnicalData".into()),
            _ => SubmodelKind::Other("Documentation".into()),
        };
        shell.submodels.push(Submodel {
            id_short: random_id_short(rng, &mut submodel_names),
            kind,
            elements: (0..rng.gen_range(0..5))
                .map(|_| random_element(rng, 3, &mut taken))
                .collect(),
        });
    }
    shell
}
