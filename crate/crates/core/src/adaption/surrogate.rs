use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AdaptError;
use crate::aas::SimulationModelDescriptor;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SurrogateOutput {
    pub values: BTreeMap<String, f64>,
    /// Outputs that were clamped to their port range.
    pub clamped: BTreeSet<String>,
}

/// Evaluates `outputs = A·inputs + b`. Outputs are clamped to their port
/// ranges; in strict mode any value outside its range is an error instead.
pub fn evaluate_surrogate(
    descriptor: &SimulationModelDescriptor,
    inputs: &BTreeMap<String, f64>,
    strict: bool,
) -> Result<SurrogateOutput, AdaptError> {
    let surrogate = descriptor
        .surrogate
        .as_ref()
        .ok_or_else(|| AdaptError::NoSurrogate(descriptor.model_id.clone()))?;
    let mut x = Vec::with_capacity(surrogate.inputs.len());
    for name in &surrogate.inputs {
        let value = *inputs.get(name).ok_or_else(|| AdaptError::MissingInput {
            model: descriptor.model_id.clone(),
            port: name.clone(),
        })?;
        if strict {
            if let Some(port) = descriptor.port(name).filter(|p| p.datatype.is_numeric()) {
                if !port.range.contains(value) {
                    return Err(AdaptError::OutOfRange {
                        model: descriptor.model_id.clone(),
                        port: name.clone(),
                        value,
                    });
                }
            }
        }
        x.push(value);
    }

    let mut out = SurrogateOutput::default();
    for ((name, row), offset) in surrogate.outputs.iter().zip(&surrogate.a).zip(&surrogate.b) {
        let raw = row.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() + offset;
        let mut value = raw;
        if let Some(port) = descriptor.port(name).filter(|p| p.datatype.is_numeric()) {
            if !port.range.contains(raw) {
                if strict {
                    return Err(AdaptError::OutOfRange {
                        model: descriptor.model_id.clone(),
                        port: name.clone(),
                        value: raw,
                    });
                }
                value = port.range.clamp(raw);
                out.clamped.insert(name.clone());
            }
        }
        out.values.insert(name.clone(), value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aas::{
        Datatype, DecisionLevel, Direction, LevelOfDetail, Port, PortRange, SolverSpec,
        SurrogateSpec,
    };

    fn descriptor(
        inputs: &[&str],
        outputs: &[&str],
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    ) -> SimulationModelDescriptor {
        let port = |name: &&str, direction| Port {
            name: name.to_string(),
            direction,
            quantity: "q".into(),
            unit: "1".into(),
            range: PortRange::new(-100.0, 100.0),
            datatype: Datatype::Real,
        };
        SimulationModelDescriptor {
            model_id: "M".into(),
            owner_asset_id: "A".into(),
            storage_location: "file:///m".into(),
            simulation_environment: "native".into(),
            solver: SolverSpec {
                method: "none".into(),
                step_size: 1.0,
                tolerance: 1e-6,
            },
            parameters: vec![],
            ports: inputs
                .iter()
                .map(|n| port(n, Direction::Input))
                .chain(outputs.iter().map(|n| port(n, Direction::Output)))
                .collect(),
            level_of_detail: LevelOfDetail::ProcessUnit,
            discipline: "test".into(),
            decision_level: DecisionLevel::Control,
            computing_time: 1.0,
            accuracy: 0.5,
            surrogate: Some(SurrogateSpec {
                inputs: inputs.iter().map(|s| s.to_string()).collect(),
                outputs: outputs.iter().map(|s| s.to_string()).collect(),
                a,
                b,
            }),
        }
    }

    fn inputs(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn scalar_gain() {
        let d = descriptor(&["power"], &["H2"], vec![vec![2.0]], vec![0.0]);
        let out = evaluate_surrogate(&d, &inputs(&[("power", 3.0)]), false).unwrap();
        assert_eq!(out.values["H2"], 6.0);
        assert!(out.clamped.is_empty());
    }

    #[test]
    fn constant_model() {
        let d = descriptor(&["u"], &["y"], vec![vec![0.0]], vec![5.0]);
        for u in [-3.0, 0.0, 42.0] {
            assert_eq!(
                evaluate_surrogate(&d, &inputs(&[("u", u)]), false)
                    .unwrap()
                    .values["y"],
                5.0
            );
        }
    }

    #[test]
    fn identity() {
        let d = descriptor(
            &["a", "b"],
            &["x", "y"],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
        );
        let out = evaluate_surrogate(&d, &inputs(&[("a", 1.5), ("b", -7.0)]), false).unwrap();
        assert_eq!(out.values["x"], 1.5);
        assert_eq!(out.values["y"], -7.0);
    }

    #[test]
    fn clamps_or_rejects_out_of_range() {
        let d = descriptor(&["u"], &["y"], vec![vec![10.0]], vec![0.0]);
        let out = evaluate_surrogate(&d, &inputs(&[("u", 20.0)]), false).unwrap();
        assert_eq!(out.values["y"], 100.0);
        assert!(out.clamped.contains("y"));
        assert!(matches!(
            evaluate_surrogate(&d, &inputs(&[("u", 20.0)]), true),
            Err(AdaptError::OutOfRange { .. })
        ));
        assert!(matches!(
            evaluate_surrogate(&d, &inputs(&[("u", 200.0)]), true),
            Err(AdaptError::OutOfRange { port, .. }) if port == "u"
        ));
    }

    #[test]
    fn missing_input_and_surrogate() {
        let mut d = descriptor(&["u"], &["y"], vec![vec![1.0]], vec![0.0]);
        assert!(matches!(
            evaluate_surrogate(&d, &BTreeMap::new(), false),
            Err(AdaptError::MissingInput { port, .. }) if port == "u"
        ));
        d.surrogate = None;
        assert!(matches!(
            evaluate_surrogate(&d, &BTreeMap::new(), false),
            Err(AdaptError::NoSurrogate(_))
        ));
    }
}
