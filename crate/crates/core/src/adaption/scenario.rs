use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adapt::{adapt, signal_name, AdaptionVerdict, SelectionPolicy, Thresholds};
use super::select::{select_configuration, ModelConfiguration};
use super::surrogate::evaluate_surrogate;
use super::telemetry::{compute_deviation, TelemetrySeries};
use super::AdaptError;
use crate::aas::{Direction, SimulationModelDescriptor, SurrogateSpec};
use crate::kgraph::{port_node_id, KnowledgeGraph};

/// `base + amplitude · sin(2π t / period)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Profile {
    pub base: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_period() -> f64 {
    60.0
}

impl Profile {
    pub fn at(&self, t: f64) -> f64 {
        self.base + self.amplitude * (2.0 * PI * t / self.period).sin()
    }
}

/// Replaces the true process behind one model from `fromWindow` on, either
/// with explicit coefficients or by scaling the model's initial surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TruthOverride {
    pub model_id: String,
    pub from_window: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
}

/// Closed-loop scenario. Exogenous inputs are keyed `{assetId}#{port}`;
/// the true process of every model defaults to its initial surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub window_seconds: f64,
    pub sample_interval: f64,
    pub windows: usize,
    #[serde(default)]
    pub exogenous: BTreeMap<String, Profile>,
    #[serde(default)]
    pub truth: Vec<TruthOverride>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, AdaptError> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| AdaptError::Scenario(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("scenarios serialize");
        text.push('\n');
        text
    }

    pub fn validate(&self) -> Result<(), AdaptError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.window_seconds) || !positive(self.sample_interval) {
            return Err(AdaptError::Scenario(
                "windowSeconds and sampleInterval must be > 0".into(),
            ));
        }
        if self.samples_per_window() < 2 {
            return Err(AdaptError::Scenario(
                "a window must hold at least 2 samples".into(),
            ));
        }
        if let Some((key, _)) = self.exogenous.iter().find(|(_, p)| !positive(p.period)) {
            return Err(AdaptError::Scenario(format!(
                "period of `{key}` must be > 0"
            )));
        }
        for t in &self.truth {
            if t.gain_scale.is_some() == (t.a.is_some() || t.b.is_some()) {
                return Err(AdaptError::Scenario(format!(
                    "truth override of `{}` needs either gainScale or a/b",
                    t.model_id
                )));
            }
        }
        Ok(())
    }

    pub fn samples_per_window(&self) -> usize {
        (self.window_seconds / self.sample_interval).round() as usize
    }

    fn truth(&self, initial: &SurrogateSpec, model_id: &str, window: usize) -> SurrogateSpec {
        let Some(t) = self
            .truth
            .iter()
            .filter(|t| t.model_id == model_id && t.from_window <= window)
            .max_by_key(|t| t.from_window)
        else {
            return initial.clone();
        };
        let mut spec = initial.clone();
        if let Some(scale) = t.gain_scale {
            spec.a.iter_mut().flatten().for_each(|v| *v *= scale);
            spec.b.iter_mut().for_each(|v| *v *= scale);
        }
        if let Some(a) = &t.a {
            spec.a = a.clone();
        }
        if let Some(b) = &t.b {
            spec.b = b.clone();
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationSettings {
    pub thresholds: Thresholds,
    pub policy: SelectionPolicy,
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecisionRecord {
    pub window: usize,
    pub window_end: f64,
    pub selection: BTreeMap<String, String>,
    pub per_signal: BTreeMap<String, f64>,
    pub verdict: AdaptionVerdict,
    pub aggregate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offending_model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_parameters: Option<SurrogateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_configuration: Option<ModelConfiguration>,
    pub rationale: String,
}

pub fn decision_log(records: &[DecisionRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

struct Window {
    simulated: Vec<TelemetrySeries>,
    measured: Vec<TelemetrySeries>,
}

/// Samples one window: every selected model sees measured inputs (from
/// upstream measured outputs or exogenous profiles); the true process
/// produces measured outputs and the current surrogate simulated ones.
fn run_window(
    graph: &KnowledgeGraph,
    configuration: &ModelConfiguration,
    steps: &[String],
    initial: &BTreeMap<String, SurrogateSpec>,
    scenario: &Scenario,
    window: usize,
) -> Result<Window, AdaptError> {
    let mut models: Vec<(&str, SimulationModelDescriptor, SurrogateSpec)> = Vec::new();
    for asset in steps {
        let model_id = configuration.selection.get(asset).ok_or_else(|| {
            AdaptError::Validation(format!("configuration selects no model for `{asset}`"))
        })?;
        let descriptor = graph.descriptor(model_id)?;
        let base = initial
            .get(model_id)
            .ok_or_else(|| AdaptError::NoSurrogate(model_id.clone()))?;
        let truth = scenario.truth(base, model_id, window);
        models.push((asset, descriptor, truth));
    }

    let n = scenario.samples_per_window();
    let start = window as f64 * scenario.window_seconds;
    let mut measured: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut simulated: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for k in 1..=n {
        let t = start + k as f64 * scenario.sample_interval;
        let mut values: BTreeMap<String, f64> = BTreeMap::new();
        let mut model_inputs: Vec<BTreeMap<String, f64>> = Vec::with_capacity(models.len());
        for (asset, descriptor, truth) in &models {
            let mut inputs = BTreeMap::new();
            for port in descriptor.ports_in(Direction::Input) {
                let in_id = port_node_id(&descriptor.model_id, &port.name);
                let feeds: Vec<_> = configuration
                    .bindings
                    .iter()
                    .filter(|b| b.in_port_id == in_id)
                    .collect();
                let value = if feeds.is_empty() {
                    let key = format!("{asset}#{}", port.name);
                    scenario
                        .exogenous
                        .get(&key)
                        .ok_or_else(|| {
                            AdaptError::Scenario(format!("no exogenous profile `{key}`"))
                        })?
                        .at(t)
                } else {
                    feeds
                        .iter()
                        .map(|b| {
                            values
                                .get(&b.out_port_id)
                                .copied()
                                .map(|v| v * b.conversion_factor)
                                .ok_or_else(|| {
                                    AdaptError::Validation(format!(
                                        "`{}` is fed before it is computed",
                                        b.in_port_id
                                    ))
                                })
                        })
                        .sum::<Result<f64, _>>()?
                };
                inputs.insert(port.name.clone(), value);
                measured
                    .entry(signal_name(&descriptor.model_id, &port.name))
                    .or_default()
                    .push((t, value));
            }
            let x: Vec<f64> = truth
                .inputs
                .iter()
                .map(|p| inputs.get(p).copied().unwrap_or(0.0))
                .collect();
            for ((port, row), offset) in truth.outputs.iter().zip(&truth.a).zip(&truth.b) {
                let y = row.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() + offset;
                values.insert(port_node_id(&descriptor.model_id, port), y);
                measured
                    .entry(signal_name(&descriptor.model_id, port))
                    .or_default()
                    .push((t, y));
            }
            model_inputs.push(inputs);
        }
        let outputs = models
            .par_iter()
            .zip(model_inputs.par_iter())
            .map(|((_, descriptor, _), inputs)| evaluate_surrogate(descriptor, inputs, false))
            .collect::<Result<Vec<_>, _>>()?;
        for ((_, descriptor, _), out) in models.iter().zip(outputs) {
            for (port, value) in out.values {
                simulated
                    .entry(signal_name(&descriptor.model_id, &port))
                    .or_default()
                    .push((t, value));
            }
        }
    }

    let to_series = |map: BTreeMap<String, Vec<(f64, f64)>>| {
        map.into_iter()
            .map(|(name, samples)| TelemetrySeries::new(name, samples))
            .collect::<Result<Vec<_>, _>>()
    };
    Ok(Window {
        simulated: to_series(simulated)?,
        measured: to_series(measured)?,
    })
}

/// Runs the closed loop over all windows of `scenario`, starting from the
/// best configuration of the (matched) graph. Returns the updated graph and
/// the decision of every window.
pub fn simulate(
    graph: &KnowledgeGraph,
    scenario: &Scenario,
    settings: &SimulationSettings,
) -> Result<(KnowledgeGraph, Vec<DecisionRecord>), AdaptError> {
    scenario.validate()?;
    settings.thresholds.validate()?;
    let mut graph = graph.clone();
    let (_, steps) = super::select::system_of(&graph)?;
    let mut policy = settings.policy.clone();
    let mut configuration =
        select_configuration(&graph, policy.level, &policy.budget, &policy.exclude)?;

    let mut initial = BTreeMap::new();
    for model_id in graph_model_ids(&graph) {
        if let Some(s) = graph.descriptor(&model_id)?.surrogate {
            initial.insert(model_id, s);
        }
    }

    let mut records = Vec::with_capacity(scenario.windows);
    for window in 0..scenario.windows {
        let data = run_window(&graph, &configuration, &steps, &initial, scenario, window)?;
        let outputs: BTreeSet<&str> = data
            .simulated
            .iter()
            .map(|s| s.signal_name.as_str())
            .collect();
        let measured_outputs: Vec<TelemetrySeries> = data
            .measured
            .iter()
            .filter(|m| outputs.contains(m.signal_name.as_str()))
            .cloned()
            .collect();
        let deviation =
            compute_deviation(&data.simulated, &measured_outputs, scenario.window_seconds)?;
        let selection = configuration.selection.clone();
        let decision = adapt(
            &mut graph,
            &configuration,
            &deviation,
            &settings.thresholds,
            &data.measured,
            &policy,
        )?;
        if let Some(next) = &decision.new_configuration {
            configuration = next.clone();
            if let Some(offender) = &decision.offending_model {
                policy.exclude.insert(offender.clone());
            }
        }
        records.push(DecisionRecord {
            window,
            window_end: (window + 1) as f64 * scenario.window_seconds,
            selection,
            per_signal: deviation.per_signal,
            verdict: decision.verdict,
            aggregate: decision.aggregate,
            offending_model: decision.offending_model,
            new_parameters: decision.new_parameters,
            new_configuration: decision.new_configuration,
            rationale: decision.rationale,
        });
    }
    Ok((graph, records))
}

fn graph_model_ids(graph: &KnowledgeGraph) -> Vec<String> {
    graph
        .nodes_of_kind(crate::kgraph::NodeKind::Model)
        .filter_map(|n| {
            n.properties
                .get("modelId")
                .and_then(serde_json::Value::as_str)
        })
        .map(str::to_string)
        .collect()
}
