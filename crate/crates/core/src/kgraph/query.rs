use serde_json::Value;

use super::{KnowledgeGraph, NodeKind};
use crate::aas::{DecisionLevel, LevelOfDetail};

/// Conjunctive filter over Model nodes; `None` fields match everything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelFilter {
    pub asset_id: Option<String>,
    pub level_of_detail: Option<LevelOfDetail>,
    pub discipline: Option<String>,
    pub decision_level: Option<DecisionLevel>,
}

/// Model ids matching `filter`, in lexical order.
pub fn query_models(graph: &KnowledgeGraph, filter: &ModelFilter) -> Vec<String> {
    let prop_is = |props: &super::Properties, key: &str, expected: &str| {
        props.get(key).and_then(Value::as_str) == Some(expected)
    };
    let mut ids: Vec<String> = graph
        .nodes_of_kind(NodeKind::Model)
        .filter(|node| {
            let p = &node.properties;
            filter
                .asset_id
                .as_deref()
                .is_none_or(|a| prop_is(p, "ownerAssetId", a))
                && filter
                    .level_of_detail
                    .is_none_or(|l| prop_is(p, "levelOfDetail", l.as_str()))
                && filter
                    .discipline
                    .as_deref()
                    .is_none_or(|d| prop_is(p, "discipline", d))
                && filter
                    .decision_level
                    .is_none_or(|l| prop_is(p, "decisionLevel", l.as_str()))
        })
        .filter_map(|node| node.properties.get("modelId").and_then(Value::as_str))
        .map(str::to_string)
        .collect();
    ids.sort();
    ids
}
