use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::select::{select_configuration, Budget, ModelConfiguration};
use super::telemetry::{DeviationReport, TelemetrySeries};
use super::AdaptError;
use crate::aas::{DecisionLevel, SurrogateSpec};
use crate::kgraph::{model_node_id, KnowledgeGraph};

/// Relative slack on threshold comparisons, so that a deviation equal to a
/// threshold up to rounding lands on the closed side.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Thresholds {
    pub epsilon: f64,
    pub escalation: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            epsilon: 0.05,
            escalation: 4.0,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), AdaptError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(AdaptError::Validation(format!(
                "epsilon {} must be > 0",
                self.epsilon
            )));
        }
        if !(self.escalation > 1.0 && self.escalation.is_finite()) {
            return Err(AdaptError::Validation(format!(
                "escalation {} must be > 1",
                self.escalation
            )));
        }
        Ok(())
    }

    pub fn verdict(&self, aggregate: f64) -> AdaptionVerdict {
        let at_most = |limit: f64| aggregate <= limit + BOUNDARY_SLACK * limit.abs();
        if at_most(self.epsilon) {
            AdaptionVerdict::Keep
        } else if at_most(self.escalation * self.epsilon) {
            AdaptionVerdict::Reparameterize
        } else {
            AdaptionVerdict::Reselect
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AdaptionVerdict {
    Keep,
    Reparameterize,
    Reselect,
}

impl AdaptionVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            AdaptionVerdict::Keep => "keep",
            AdaptionVerdict::Reparameterize => "reparameterize",
            AdaptionVerdict::Reselect => "reselect",
        }
    }
}

/// How a replacement configuration is chosen on reselection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SelectionPolicy {
    pub level: DecisionLevel,
    pub budget: Budget,
    #[serde(default)]
    pub exclude: BTreeSet<String>,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy {
            level: DecisionLevel::Control,
            budget: Budget::default(),
            exclude: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdaptionDecision {
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

/// Splits a `{modelId}#{port}` signal name.
pub fn split_signal(name: &str) -> Option<(&str, &str)> {
    name.split_once('#')
}

pub fn signal_name(model_id: &str, port: &str) -> String {
    format!("{model_id}#{port}")
}

/// Least-squares fit of `outputs = A·inputs + b` on the measured window of
/// one model. Fails with `DegenerateFit` when `[inputs, 1]` is rank
/// deficient.
pub fn refit_surrogate(
    model_id: &str,
    current: &SurrogateSpec,
    measured: &[TelemetrySeries],
    window: f64,
) -> Result<SurrogateSpec, AdaptError> {
    let find = |port: &str| {
        let name = signal_name(model_id, port);
        measured
            .iter()
            .find(|s| s.signal_name == name)
            .ok_or_else(|| AdaptError::SignalMismatch(format!("no measured series `{name}`")))
    };
    let outputs = current
        .outputs
        .iter()
        .map(|p| find(p))
        .collect::<Result<Vec<_>, _>>()?;
    let inputs = current
        .inputs
        .iter()
        .map(|p| find(p))
        .collect::<Result<Vec<_>, _>>()?;
    let Some(reference) = outputs.first() else {
        return Err(AdaptError::DegenerateFit(format!(
            "`{model_id}` has no outputs to fit"
        )));
    };
    let end = reference.last_timestamp().unwrap_or(0.0);
    let times: Vec<f64> = reference.window(end - window, end).map(|s| s.0).collect();

    let cols = inputs.len() + 1;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    let mut targets: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    for t in &times {
        let x: Option<Vec<f64>> = inputs.iter().map(|s| s.value_at(*t)).collect();
        let y: Option<Vec<f64>> = outputs.iter().map(|s| s.value_at(*t)).collect();
        if let (Some(mut x), Some(y)) = (x, y) {
            x.push(1.0);
            rows.push(x);
            targets.push(y);
        }
    }
    if rows.len() < cols {
        return Err(AdaptError::DegenerateFit(format!(
            "`{model_id}`: {} samples for {cols} coefficients per output",
            rows.len()
        )));
    }
    let design = DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]);
    let svd = design.clone().svd(true, true);
    let largest = svd.singular_values.max();
    let cutoff = largest * rows.len().max(cols) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    if largest == 0.0 || rank < cols {
        return Err(AdaptError::DegenerateFit(format!(
            "`{model_id}`: design matrix has rank {rank} < {cols}"
        )));
    }

    let mut a = Vec::with_capacity(outputs.len());
    let mut b = Vec::with_capacity(outputs.len());
    for k in 0..outputs.len() {
        let y = DVector::from_iterator(targets.len(), targets.iter().map(|row| row[k]));
        let theta = svd
            .solve(&y, cutoff)
            .map_err(|e| AdaptError::DegenerateFit(format!("`{model_id}`: {e}")))?;
        a.push(theta.iter().take(cols - 1).copied().collect());
        b.push(theta[cols - 1]);
    }
    Ok(SurrogateSpec {
        inputs: current.inputs.clone(),
        outputs: current.outputs.clone(),
        a,
        b,
    })
}

fn record_evaluation(
    graph: &mut KnowledgeGraph,
    current: &ModelConfiguration,
    deviation: &DeviationReport,
) -> Result<(), AdaptError> {
    let mut per_model: BTreeMap<&str, f64> = current
        .selection
        .values()
        .map(|m| (m.as_str(), 0.0))
        .collect();
    for (name, d) in &deviation.per_signal {
        if let Some(slot) = split_signal(name).and_then(|(m, _)| per_model.get_mut(m)) {
            *slot = slot.max(*d);
        }
    }
    for (model, d) in per_model {
        let id = model_node_id(model);
        let count = graph
            .node(&id)
            .and_then(|n| n.properties.get("evaluationCount"))
            .and_then(Value::as_u64)
            .unwrap_or(0);
        graph.set_node_property(&id, "lastDeviation", json!(d))?;
        graph.set_node_property(&id, "evaluationCount", json!(count + 1))?;
    }
    Ok(())
}

/// One adaption step. Records the evaluation on the selected Model nodes,
/// then keeps, refits the offending model's surrogate (writing the new
/// coefficients into the graph) or reselects without the offender.
pub fn adapt(
    graph: &mut KnowledgeGraph,
    current: &ModelConfiguration,
    deviation: &DeviationReport,
    thresholds: &Thresholds,
    measured: &[TelemetrySeries],
    policy: &SelectionPolicy,
) -> Result<AdaptionDecision, AdaptError> {
    thresholds.validate()?;
    record_evaluation(graph, current, deviation)?;
    let aggregate = deviation.aggregate;
    let verdict = thresholds.verdict(aggregate);
    if verdict == AdaptionVerdict::Keep {
        return Ok(AdaptionDecision {
            verdict,
            aggregate,
            offending_model: None,
            new_parameters: None,
            new_configuration: None,
            rationale: format!("deviation {aggregate} <= epsilon {}", thresholds.epsilon),
        });
    }

    let mut worst: Option<(&str, &str, f64)> = None;
    for (name, d) in &deviation.per_signal {
        let Some((model, _)) = split_signal(name) else {
            continue;
        };
        if current.contains_model(model) && worst.is_none_or(|(_, _, w)| *d > w) {
            worst = Some((model, name, *d));
        }
    }
    let Some((offender, signal, _)) = worst else {
        return Err(AdaptError::SignalMismatch(
            "no deviation signal belongs to a selected model".into(),
        ));
    };
    let offender = offender.to_string();

    let mut rationale = String::new();
    if verdict == AdaptionVerdict::Reparameterize {
        let descriptor = graph.descriptor(&offender)?;
        let fit = match &descriptor.surrogate {
            None => Err(AdaptError::DegenerateFit(format!(
                "`{offender}` has no affine surrogate to refit"
            ))),
            Some(surrogate) => {
                refit_surrogate(&offender, surrogate, measured, deviation.window_seconds)
            }
        };
        match fit {
            Ok(spec) => {
                graph.set_surrogate(&offender, &spec)?;
                return Ok(AdaptionDecision {
                    verdict,
                    aggregate,
                    offending_model: Some(offender.clone()),
                    new_parameters: Some(spec),
                    new_configuration: None,
                    rationale: format!(
                        "deviation {aggregate} within (epsilon, escalation*epsilon]; refit `{offender}` on `{signal}`"
                    ),
                });
            }
            Err(AdaptError::DegenerateFit(why)) => {
                rationale = format!("refit failed ({why}); falling back to reselection; ");
            }
            Err(e) => return Err(e),
        }
    }

    let mut exclude = policy.exclude.clone();
    exclude.insert(offender.clone());
    let configuration = select_configuration(graph, policy.level, &policy.budget, &exclude)?;
    rationale.push_str(&format!(
        "deviation {aggregate} on `{signal}`; reselected without `{offender}`"
    ));
    Ok(AdaptionDecision {
        verdict: AdaptionVerdict::Reselect,
        aggregate,
        offending_model: Some(offender),
        new_parameters: None,
        new_configuration: Some(configuration),
        rationale,
    })
}
