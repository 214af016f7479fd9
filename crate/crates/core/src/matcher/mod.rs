//! Port matching: unit registry, pairwise port compatibility and the
//! graph-level reasoner that writes `connectsWith` edges.

mod ports;
mod units;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::aas::{Direction, Port};
use crate::ingest::ProductionSequence;
use crate::kgraph::{
    asset_node_id, model_node_id, port_node_id, system_node_id, EdgeKind, GraphError,
    KnowledgeGraph, NodeKind, Properties,
};

pub use ports::{ports_compatible, MatchResult, RangeMode, Verdict};
pub use units::{
    unit_conversion, Conversion, Dimension, Incompatibility, UnitDef, UnitError, UnitRegistry,
    BASE_DIMENSIONS,
};

/// Model node property naming why the last matching run excluded it.
pub const EXCLUDED_PROPERTY: &str = "excluded";
/// Production system property recording the range mode of the last
/// matching run; its presence marks a matched graph.
pub const MATCHED_PROPERTY: &str = "matchedRangeMode";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("direction error: {0}")]
    Direction(String),
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl MatchError {
    pub fn code(&self) -> &'static str {
        match self {
            MatchError::Consistency(_) => "ConsistencyError",
            MatchError::Direction(_) => "DirectionError",
            MatchError::Unit(UnitError::UnknownUnit(_)) => "UnknownUnit",
            MatchError::Unit(UnitError::Syntax(_)) => "SyntaxError",
            MatchError::Unit(UnitError::InvalidDefinition { .. }) => "SchemaError",
            MatchError::Graph(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ExclusionReason {
    /// The owning asset does not take part in the production sequence.
    NotInSequence,
    /// No port of the model was connected to any other model.
    NoTopologyConnection,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::NotInSequence => "notInSequence",
            ExclusionReason::NoTopologyConnection => "noTopologyConnection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AddedEdge {
    pub out_port_id: String,
    pub in_port_id: String,
    pub conversion_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExcludedModel {
    pub model_id: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UnsatisfiedInput {
    pub model_id: String,
    pub port_name: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchReport {
    pub range_mode: RangeMode,
    pub edges_added: Vec<AddedEdge>,
    pub excluded_models: Vec<ExcludedModel>,
    pub unsatisfied_inputs: Vec<UnsatisfiedInput>,
}

impl MatchReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }
}

struct Candidate {
    model_id: String,
    position: usize,
    ports: Vec<Port>,
}

fn check_sequence(graph: &KnowledgeGraph, sequence: &ProductionSequence) -> Result<(), MatchError> {
    let system = system_node_id(&sequence.system_id);
    if graph.node(&system).map(|n| n.kind) != Some(NodeKind::ProductionSystem) {
        return Err(MatchError::Consistency(format!(
            "graph has no production system `{}`",
            sequence.system_id
        )));
    }
    let expected: Vec<String> = sequence.steps.iter().map(|s| asset_node_id(s)).collect();
    if let Some(missing) = expected
        .iter()
        .find(|id| graph.node(id).map(|n| n.kind) != Some(NodeKind::Asset))
    {
        return Err(MatchError::Consistency(format!(
            "sequence step `{missing}` is not an asset of the graph"
        )));
    }
    let chain = graph.followed_by_chain()?;
    let consistent = if expected.len() > 1 {
        chain == expected
    } else {
        chain.is_empty()
    };
    if !consistent {
        return Err(MatchError::Consistency(
            "followedBy chain of the graph differs from the sequence".into(),
        ));
    }
    Ok(())
}

/// Connects output ports of upstream models to compatible input ports of
/// downstream models and reports what stayed unconnected. Any
/// `connectsWith` edges and exclusion marks from earlier runs are replaced.
pub fn match_ports(
    graph: &KnowledgeGraph,
    sequence: &ProductionSequence,
    registry: &UnitRegistry,
    mode: RangeMode,
) -> Result<(KnowledgeGraph, MatchReport), MatchError> {
    check_sequence(graph, sequence)?;

    let mut excluded: BTreeMap<String, ExclusionReason> = BTreeMap::new();
    let mut candidates = Vec::new();
    for node in graph.nodes_of_kind(NodeKind::Model) {
        let model_id = node
            .properties
            .get("modelId")
            .and_then(Value::as_str)
            .ok_or_else(|| GraphError::Schema(format!("model `{}` lacks modelId", node.id)))?;
        let descriptor = graph.descriptor(model_id)?;
        match sequence.position(&descriptor.owner_asset_id) {
            None => {
                excluded.insert(model_id.to_string(), ExclusionReason::NotInSequence);
            }
            Some(position) => candidates.push(Candidate {
                model_id: model_id.to_string(),
                position,
                ports: descriptor.ports,
            }),
        }
    }

    let mut pairs = Vec::new();
    for up in &candidates {
        for down in candidates.iter().filter(|d| up.position < d.position) {
            for out in up.ports.iter().filter(|p| p.direction == Direction::Output) {
                for input in down
                    .ports
                    .iter()
                    .filter(|p| p.direction == Direction::Input)
                {
                    pairs.push((up, out, down, input));
                }
            }
        }
    }
    let mut matched: Vec<(AddedEdge, &str, &str)> = pairs
        .par_iter()
        .map(|(up, out, down, input)| {
            let result = ports_compatible(registry, out, input, mode)?;
            Ok(result.conversion_factor.map(|factor| {
                (
                    AddedEdge {
                        out_port_id: port_node_id(&up.model_id, &out.name),
                        in_port_id: port_node_id(&down.model_id, &input.name),
                        conversion_factor: factor,
                    },
                    up.model_id.as_str(),
                    down.model_id.as_str(),
                )
            }))
        })
        .collect::<Result<Vec<_>, MatchError>>()?
        .into_iter()
        .flatten()
        .collect();
    matched.sort_by(|a, b| {
        (&a.0.out_port_id, &a.0.in_port_id).cmp(&(&b.0.out_port_id, &b.0.in_port_id))
    });

    let mut next = graph.clone();
    next.remove_edges_of_kind(EdgeKind::ConnectsWith);
    let model_ids: Vec<String> = next
        .nodes_of_kind(NodeKind::Model)
        .map(|n| n.id.clone())
        .collect();
    for id in &model_ids {
        next.remove_node_property(id, EXCLUDED_PROPERTY)?;
    }

    let mut connected: BTreeSet<&str> = BTreeSet::new();
    let mut fed: BTreeSet<&str> = BTreeSet::new();
    for (edge, up, down) in &matched {
        let mut properties = Properties::new();
        properties.insert("conversionFactor".into(), json!(edge.conversion_factor));
        properties.insert("rangeMode".into(), json!(mode.as_str()));
        next.add_edge(
            &edge.out_port_id,
            EdgeKind::ConnectsWith,
            &edge.in_port_id,
            properties,
        )?;
        connected.insert(up);
        connected.insert(down);
        fed.insert(edge.in_port_id.as_str());
    }

    let mut unsatisfied = Vec::new();
    for candidate in &candidates {
        if !connected.contains(candidate.model_id.as_str()) {
            excluded.insert(
                candidate.model_id.clone(),
                ExclusionReason::NoTopologyConnection,
            );
            continue;
        }
        if candidate.position == 0 {
            continue;
        }
        for input in candidate
            .ports
            .iter()
            .filter(|p| p.direction == Direction::Input)
        {
            if !fed.contains(port_node_id(&candidate.model_id, &input.name).as_str()) {
                unsatisfied.push(UnsatisfiedInput {
                    model_id: candidate.model_id.clone(),
                    port_name: input.name.clone(),
                });
            }
        }
    }
    unsatisfied.sort();

    for (model_id, reason) in &excluded {
        next.set_node_property(
            &model_node_id(model_id),
            EXCLUDED_PROPERTY,
            json!(reason.as_str()),
        )?;
    }

    next.set_node_property(
        &system_node_id(&sequence.system_id),
        MATCHED_PROPERTY,
        json!(mode.as_str()),
    )?;

    let report = MatchReport {
        range_mode: mode,
        edges_added: matched.into_iter().map(|(edge, _, _)| edge).collect(),
        excluded_models: excluded
            .into_iter()
            .map(|(model_id, reason)| ExcludedModel { model_id, reason })
            .collect(),
        unsatisfied_inputs: unsatisfied,
    };
    Ok((next, report))
}

/// Whether the production system of `graph` has been through [`match_ports`].
pub fn is_matched(graph: &KnowledgeGraph, system_id: &str) -> bool {
    graph
        .node(&system_node_id(system_id))
        .is_some_and(|n| n.properties.contains_key(MATCHED_PROPERTY))
}

/// Whether the last matching run excluded this model.
pub fn is_excluded(graph: &KnowledgeGraph, model_id: &str) -> bool {
    graph
        .node(&model_node_id(model_id))
        .is_some_and(|n| n.properties.contains_key(EXCLUDED_PROPERTY))
}
