use std::collections::HashMap;

use serde_json::{json, Value};

use super::{
    asset_node_id, model_node_id, port_node_id, system_node_id, EdgeKind, GraphError,
    KnowledgeGraph, NodeKind, Properties,
};
use crate::aas::{
    extract_simulation_descriptors, AdministrationShell, Parameter, Port, PortRange,
    SimulationModelDescriptor, SolverSpec, SurrogateSpec,
};
use crate::ingest::{HierarchyTree, ProductionSequence};

/// Builds the knowledge graph of one production system: asset topology
/// from the hierarchy, the process order from the sequence, and model and
/// port nodes from every shell's simulation descriptors.
pub fn build_graph(
    shells: &[AdministrationShell],
    hierarchy: &HierarchyTree,
    sequence: &ProductionSequence,
) -> Result<KnowledgeGraph, GraphError> {
    let by_id: HashMap<&str, &AdministrationShell> =
        shells.iter().map(|s| (s.id.as_str(), s)).collect();
    if by_id.len() != shells.len() {
        return Err(GraphError::Consistency("duplicate shell ids".into()));
    }
    if let Some(step) = sequence.steps.iter().find(|s| !hierarchy.contains(s)) {
        return Err(GraphError::Consistency(format!(
            "sequence references asset `{step}` outside the hierarchy"
        )));
    }

    let mut graph = KnowledgeGraph::new();
    graph.add_node(
        system_node_id(&sequence.system_id),
        NodeKind::ProductionSystem,
        props(json!({
            "systemId": sequence.system_id,
            "rootAssetId": hierarchy.root_asset_id,
            "sequence": sequence.steps,
        })),
    )?;

    for asset in hierarchy.assets() {
        let shell = by_id.get(asset).ok_or_else(|| {
            GraphError::Consistency(format!("hierarchy asset `{asset}` has no shell"))
        })?;
        let mut properties = props(json!({
            "assetId": shell.id,
            "idShort": shell.id_short,
            "assetKind": shell.asset_kind.as_str(),
        }));
        if let Some(position) = sequence.position(asset) {
            properties.insert("sequenceIndex".into(), json!(position));
        }
        graph.add_node(asset_node_id(asset), NodeKind::Asset, properties)?;
    }
    for (parent, child) in hierarchy.edges() {
        graph.add_edge(
            &asset_node_id(parent),
            EdgeKind::HasPart,
            &asset_node_id(child),
            Properties::new(),
        )?;
    }
    for pair in sequence.steps.windows(2) {
        graph.add_edge(
            &asset_node_id(&pair[0]),
            EdgeKind::FollowedBy,
            &asset_node_id(&pair[1]),
            Properties::new(),
        )?;
    }

    for shell in shells {
        let descriptors = extract_simulation_descriptors(shell)
            .map_err(|e| GraphError::Schema(format!("shell `{}`: {e}", shell.id)))?;
        for descriptor in descriptors {
            if !hierarchy.contains(&descriptor.owner_asset_id) {
                return Err(GraphError::Consistency(format!(
                    "model `{}` is owned by `{}`, which is outside the hierarchy",
                    descriptor.model_id, descriptor.owner_asset_id
                )));
            }
            add_model(&mut graph, &descriptor)?;
        }
    }
    Ok(graph)
}

fn props(value: Value) -> Properties {
    match value {
        Value::Object(map) => map.into_iter().collect(),
        _ => unreachable!("property literals are objects"),
    }
}

fn add_model(graph: &mut KnowledgeGraph, d: &SimulationModelDescriptor) -> Result<(), GraphError> {
    let model_id = model_node_id(&d.model_id);
    if graph.node(&model_id).is_some() {
        return Err(GraphError::Consistency(format!(
            "model id `{}` is declared more than once",
            d.model_id
        )));
    }
    let mut properties = props(json!({
        "modelId": d.model_id,
        "ownerAssetId": d.owner_asset_id,
        "storageLocation": d.storage_location,
        "simulationEnvironment": d.simulation_environment,
        "solverMethod": d.solver.method,
        "solverStepSize": d.solver.step_size,
        "solverTolerance": d.solver.tolerance,
        "parameterNames": d.parameters.iter().map(|p| &p.name).collect::<Vec<_>>(),
        "parameterValues": d.parameters.iter().map(|p| p.value).collect::<Vec<_>>(),
        "parameterUnits": d.parameters.iter().map(|p| &p.unit).collect::<Vec<_>>(),
        "levelOfDetail": d.level_of_detail.as_str(),
        "discipline": d.discipline,
        "decisionLevel": d.decision_level.as_str(),
        "computingTime": d.computing_time,
        "accuracy": d.accuracy,
    }));
    if let Some(surrogate) = &d.surrogate {
        properties.insert("surrogate".into(), surrogate_property(surrogate));
    }
    graph.add_node(model_id.clone(), NodeKind::Model, properties)?;
    graph.add_edge(
        &asset_node_id(&d.owner_asset_id),
        EdgeKind::DescribedBy,
        &model_id,
        Properties::new(),
    )?;
    for (index, port) in d.ports.iter().enumerate() {
        let port_id = port_node_id(&d.model_id, &port.name);
        graph.add_node(
            port_id.clone(),
            NodeKind::Port,
            props(json!({
                "name": port.name,
                "index": index,
                "modelId": d.model_id,
                "ownerAssetId": d.owner_asset_id,
                "direction": port.direction.as_str(),
                "quantity": port.quantity,
                "unit": port.unit,
                "min": port.range.min,
                "max": port.range.max,
                "datatype": port.datatype.as_str(),
            })),
        )?;
        graph.add_edge(&model_id, EdgeKind::HasPort, &port_id, Properties::new())?;
    }
    Ok(())
}

/// Surrogates are stored as a JSON string so the property stays a
/// primitive value in graph databases that reject nested maps.
pub(crate) fn surrogate_property(surrogate: &SurrogateSpec) -> Value {
    Value::String(serde_json::to_string(surrogate).expect("surrogate serializes"))
}

fn field<'a>(p: &'a Properties, key: &str, node: &str) -> Result<&'a Value, GraphError> {
    p.get(key)
        .ok_or_else(|| GraphError::Schema(format!("node `{node}` lacks property `{key}`")))
}

fn text(p: &Properties, key: &str, node: &str) -> Result<String, GraphError> {
    field(p, key, node)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| GraphError::Schema(format!("`{key}` of `{node}` must be a string")))
}

fn number(p: &Properties, key: &str, node: &str) -> Result<f64, GraphError> {
    field(p, key, node)?
        .as_f64()
        .ok_or_else(|| GraphError::Schema(format!("`{key}` of `{node}` must be a number")))
}

fn token<T: std::str::FromStr<Err = String>>(
    p: &Properties,
    key: &str,
    node: &str,
) -> Result<T, GraphError> {
    text(p, key, node)?
        .parse()
        .map_err(|e| GraphError::Schema(format!("`{key}` of `{node}`: {e}")))
}

fn list<T: serde::de::DeserializeOwned>(
    p: &Properties,
    key: &str,
    node: &str,
) -> Result<Vec<T>, GraphError> {
    match p.get(key) {
        None => Ok(Vec::new()),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| GraphError::Schema(format!("`{key}` of `{node}`: {e}"))),
    }
}

impl KnowledgeGraph {
    /// Reassembles a model's descriptor from its Model and Port nodes.
    pub fn descriptor(&self, model_id: &str) -> Result<SimulationModelDescriptor, GraphError> {
        let node_id = model_node_id(model_id);
        let node = self
            .node(&node_id)
            .filter(|n| n.kind == NodeKind::Model)
            .ok_or_else(|| GraphError::Consistency(format!("unknown model `{model_id}`")))?;
        let p = &node.properties;
        let names: Vec<String> = list(p, "parameterNames", &node_id)?;
        let values: Vec<f64> = list(p, "parameterValues", &node_id)?;
        let units: Vec<String> = list(p, "parameterUnits", &node_id)?;
        if names.len() != values.len() || names.len() != units.len() {
            return Err(GraphError::Schema(format!(
                "parameter lists of `{node_id}` differ in length"
            )));
        }
        let parameters = names
            .into_iter()
            .zip(values)
            .zip(units)
            .map(|((name, value), unit)| Parameter { name, value, unit })
            .collect();
        let ports = self
            .ports_of_model(&node_id)
            .into_iter()
            .map(|port| {
                let pp = &port.properties;
                Ok(Port {
                    name: text(pp, "name", &port.id)?,
                    direction: token(pp, "direction", &port.id)?,
                    quantity: text(pp, "quantity", &port.id)?,
                    unit: text(pp, "unit", &port.id)?,
                    range: PortRange::new(
                        number(pp, "min", &port.id)?,
                        number(pp, "max", &port.id)?,
                    ),
                    datatype: token(pp, "datatype", &port.id)?,
                })
            })
            .collect::<Result<_, GraphError>>()?;
        let surrogate = match p.get("surrogate") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(
                serde_json::from_str(s)
                    .map_err(|e| GraphError::Schema(format!("surrogate of `{node_id}`: {e}")))?,
            ),
            Some(_) => {
                return Err(GraphError::Schema(format!(
                    "surrogate of `{node_id}` must be a JSON string"
                )))
            }
        };
        Ok(SimulationModelDescriptor {
            model_id: text(p, "modelId", &node_id)?,
            owner_asset_id: text(p, "ownerAssetId", &node_id)?,
            storage_location: text(p, "storageLocation", &node_id)?,
            simulation_environment: text(p, "simulationEnvironment", &node_id)?,
            solver: SolverSpec {
                method: text(p, "solverMethod", &node_id)?,
                step_size: number(p, "solverStepSize", &node_id)?,
                tolerance: number(p, "solverTolerance", &node_id)?,
            },
            parameters,
            ports,
            level_of_detail: token(p, "levelOfDetail", &node_id)?,
            discipline: text(p, "discipline", &node_id)?,
            decision_level: token(p, "decisionLevel", &node_id)?,
            computing_time: number(p, "computingTime", &node_id)?,
            accuracy: number(p, "accuracy", &node_id)?,
            surrogate,
        })
    }

    /// Replaces a model's stored surrogate coefficients.
    pub fn set_surrogate(
        &mut self,
        model_id: &str,
        surrogate: &SurrogateSpec,
    ) -> Result<super::Version, GraphError> {
        self.set_node_property(
            &model_node_id(model_id),
            "surrogate",
            surrogate_property(surrogate),
        )
    }
}
