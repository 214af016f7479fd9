use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::AdaptError;
use crate::aas::{DecisionLevel, Direction};
use crate::kgraph::{model_node_id, EdgeKind, GraphError, KnowledgeGraph, NodeKind};
use crate::matcher::is_excluded;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Budget {
    pub max_computing_time: f64,
    pub min_accuracy: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_computing_time: f64::MAX,
            min_accuracy: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Binding {
    pub out_port_id: String,
    pub in_port_id: String,
    pub conversion_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelConfiguration {
    pub system_id: String,
    pub decision_level: DecisionLevel,
    /// Asset id to model id.
    pub selection: BTreeMap<String, String>,
    pub bindings: Vec<Binding>,
    pub total_computing_time: f64,
    pub min_accuracy: f64,
}

impl ModelConfiguration {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("configurations serialize");
        text.push('\n');
        text
    }

    pub fn contains_model(&self, model_id: &str) -> bool {
        self.selection.values().any(|m| m == model_id)
    }
}

/// The production system a graph describes: its id and sequence of asset ids.
pub fn system_of(graph: &KnowledgeGraph) -> Result<(String, Vec<String>), AdaptError> {
    let systems: Vec<_> = graph.nodes_of_kind(NodeKind::ProductionSystem).collect();
    let [system] = systems.as_slice() else {
        return Err(AdaptError::Graph(GraphError::Consistency(format!(
            "expected one production system, found {}",
            systems.len()
        ))));
    };
    let id = system
        .properties
        .get("systemId")
        .and_then(Value::as_str)
        .ok_or_else(|| GraphError::Schema(format!("`{}` lacks systemId", system.id)))?;
    let sequence = system
        .properties
        .get("sequence")
        .and_then(Value::as_array)
        .ok_or_else(|| GraphError::Schema(format!("`{}` lacks its sequence", system.id)))?
        .iter()
        .map(|v| v.as_str().map(str::to_string))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| GraphError::Schema(format!("sequence of `{}` must list ids", system.id)))?;
    Ok((id.to_string(), sequence))
}

#[derive(Debug, Clone)]
struct Choice {
    model_id: String,
    accuracy: f64,
    time: f64,
    /// Input ports fed by at least one matched edge, with the models that
    /// can feed them.
    fed_by: Vec<(String, BTreeSet<String>)>,
}

fn number(graph: &KnowledgeGraph, model_id: &str, key: &str) -> Result<f64, AdaptError> {
    graph
        .node(&model_node_id(model_id))
        .and_then(|n| n.properties.get(key))
        .and_then(Value::as_f64)
        .ok_or_else(|| {
            AdaptError::Graph(GraphError::Schema(format!(
                "model `{model_id}` lacks numeric `{key}`"
            )))
        })
}

fn options_for(
    graph: &KnowledgeGraph,
    asset: &str,
    level: DecisionLevel,
    budget: &Budget,
    exclude: &BTreeSet<String>,
) -> Result<Vec<Choice>, AdaptError> {
    let mut at_level = 0;
    let mut options = Vec::new();
    for node in graph.models_of_asset(asset) {
        let p = &node.properties;
        if p.get("decisionLevel").and_then(Value::as_str) != Some(level.as_str()) {
            continue;
        }
        at_level += 1;
        let model_id = p
            .get("modelId")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        if exclude.contains(&model_id) || is_excluded(graph, &model_id) {
            continue;
        }
        let accuracy = number(graph, &model_id, "accuracy")?;
        let time = number(graph, &model_id, "computingTime")?;
        if accuracy < budget.min_accuracy || time > budget.max_computing_time {
            continue;
        }
        let mut fed_by = Vec::new();
        for port in graph.ports_of_model(&node.id) {
            if port.properties.get("direction").and_then(Value::as_str)
                != Some(Direction::Input.as_str())
            {
                continue;
            }
            let sources: BTreeSet<String> = graph
                .incoming(&port.id, EdgeKind::ConnectsWith)
                .filter_map(|e| graph.node(e.src))
                .filter_map(|src| src.properties.get("modelId").and_then(Value::as_str))
                .map(str::to_string)
                .collect();
            if !sources.is_empty() {
                let name = port
                    .properties
                    .get("name")
                    .and_then(Value::as_str)
                    .unwrap_or_default();
                fed_by.push((name.to_string(), sources));
            }
        }
        options.push(Choice {
            model_id,
            accuracy,
            time,
            fed_by,
        });
    }
    if options.is_empty() {
        return Err(AdaptError::Infeasible {
            asset: asset.to_string(),
            reason: if at_level == 0 {
                format!("no model at decision level {level}")
            } else {
                format!(
                    "none of the {at_level} model(s) at decision level {level} is available within \
                     the budget (time <= {} s, accuracy >= {}) and not excluded",
                    budget.max_computing_time, budget.min_accuracy
                )
            },
        });
    }
    options.sort_by(|a, b| {
        b.accuracy
            .total_cmp(&a.accuracy)
            .then(a.time.total_cmp(&b.time))
            .then(a.model_id.cmp(&b.model_id))
    });
    Ok(options)
}

#[derive(Debug, Clone)]
struct Best {
    min_accuracy: f64,
    time: f64,
    models: Vec<String>,
}

fn better(min_accuracy: f64, time: f64, models: &[String], best: &Best) -> bool {
    match min_accuracy.total_cmp(&best.min_accuracy) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => match time.total_cmp(&best.time) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => models < best.models.as_slice(),
        },
    }
}

struct Search<'a> {
    steps: &'a [String],
    options: &'a [Vec<Choice>],
    max_time: f64,
    chosen: Vec<String>,
    best: Option<Best>,
    /// Deepest step at which every option failed, with the reason.
    failure: Option<(usize, String)>,
}

impl Search<'_> {
    fn fail(&mut self, depth: usize, reason: String) {
        if self.failure.as_ref().is_none_or(|(d, _)| depth > *d) {
            self.failure = Some((depth, reason));
        }
    }

    fn run(&mut self, depth: usize, min_accuracy: f64, time: f64) {
        if depth == self.steps.len() {
            let candidate_better = self
                .best
                .as_ref()
                .is_none_or(|b| better(min_accuracy, time, &self.chosen, b));
            if candidate_better {
                self.best = Some(Best {
                    min_accuracy,
                    time,
                    models: self.chosen.clone(),
                });
            }
            return;
        }
        let options = self.options;
        for option in &options[depth] {
            let next_min = min_accuracy.min(option.accuracy);
            let next_time = time + option.time;
            if next_time > self.max_time {
                self.fail(
                    depth,
                    format!("computing time budget {} s exceeded", self.max_time),
                );
                continue;
            }
            if let Some(best) = &self.best {
                // accuracy can only drop and time only grow further down
                if next_min < best.min_accuracy
                    || (next_min == best.min_accuracy && next_time > best.time)
                {
                    continue;
                }
            }
            if let Some((port, _)) = option
                .fed_by
                .iter()
                .find(|(_, sources)| !self.chosen.iter().any(|m| sources.contains(m)))
            {
                self.fail(
                    depth,
                    format!(
                        "input `{port}` of `{}` has no source among the selected models",
                        option.model_id
                    ),
                );
                continue;
            }
            self.chosen.push(option.model_id.clone());
            self.run(depth + 1, next_min, next_time);
            self.chosen.pop();
        }
    }
}

/// Picks one model per sequence asset at `level`, maximizing the lowest
/// accuracy, then minimizing total computing time, then preferring the
/// lexically smallest model-id vector in sequence order.
pub fn select_configuration(
    graph: &KnowledgeGraph,
    level: DecisionLevel,
    budget: &Budget,
    exclude: &BTreeSet<String>,
) -> Result<ModelConfiguration, AdaptError> {
    if budget.max_computing_time.is_nan()
        || budget.max_computing_time < 0.0
        || !(0.0..=1.0).contains(&budget.min_accuracy)
    {
        return Err(AdaptError::Validation(format!(
            "budget needs maxComputingTime >= 0 and minAccuracy in [0, 1], got {budget:?}"
        )));
    }
    let (system_id, steps) = system_of(graph)?;
    let options = steps
        .iter()
        .map(|asset| options_for(graph, asset, level, budget, exclude))
        .collect::<Result<Vec<_>, _>>()?;

    let mut search = Search {
        steps: &steps,
        options: &options,
        max_time: budget.max_computing_time,
        chosen: Vec::new(),
        best: None,
        failure: None,
    };
    search.run(0, 1.0, 0.0);
    let Some(best) = search.best else {
        let (depth, reason) = search
            .failure
            .unwrap_or((0, "no feasible configuration".into()));
        return Err(AdaptError::Infeasible {
            asset: steps[depth].clone(),
            reason,
        });
    };

    let selected: BTreeSet<&str> = best.models.iter().map(String::as_str).collect();
    let port_model = |id: &str| {
        graph
            .node(id)
            .and_then(|n| n.properties.get("modelId"))
            .and_then(Value::as_str)
            .map(str::to_string)
    };
    let bindings = graph
        .edges_of_kind(EdgeKind::ConnectsWith)
        .filter(|e| {
            port_model(e.src).is_some_and(|m| selected.contains(m.as_str()))
                && port_model(e.dst).is_some_and(|m| selected.contains(m.as_str()))
        })
        .map(|e| Binding {
            out_port_id: e.src.to_string(),
            in_port_id: e.dst.to_string(),
            conversion_factor: e
                .properties
                .get("conversionFactor")
                .and_then(Value::as_f64)
                .unwrap_or(1.0),
        })
        .collect();
    Ok(ModelConfiguration {
        system_id,
        decision_level: level,
        selection: steps.iter().cloned().zip(best.models).collect(),
        bindings,
        total_computing_time: best.time,
        min_accuracy: best.min_accuracy,
    })
}
