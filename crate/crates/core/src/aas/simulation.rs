//! Reading simulation model descriptors and Bill-of-Material references out
//! of shell trees, plus the inverse builders used to author fixtures.

use std::collections::HashSet;

use super::{
    is_valid_id_short, AasError, AdministrationShell, ElementPayload, Parameter, Port, PortRange,
    PropertyValue, SimulationModelDescriptor, SolverSpec, Submodel, SubmodelElement, SubmodelKind,
    SurrogateSpec, PATH_SEPARATOR,
};
use crate::aas::Datatype;

pub const BOM_ARCHETYPE_FULL: &str = "Full";

/// One descriptor per model collection in the shell's Simulation submodel.
/// Shells without a Simulation submodel yield an empty list.
pub fn extract_simulation_descriptors(
    shell: &AdministrationShell,
) -> Result<Vec<SimulationModelDescriptor>, AasError> {
    let Some(submodel) = shell.submodel_of_kind(&SubmodelKind::Simulation) else {
        return Ok(Vec::new());
    };
    let mut descriptors = Vec::new();
    let mut ids = HashSet::new();
    for entry in &submodel.elements {
        if !matches!(entry.payload, ElementPayload::Collection(_)) {
            continue;
        }
        let path = join(&submodel.id_short, &entry.id_short);
        let descriptor = descriptor_from(entry, &path, &shell.id)?;
        if !ids.insert(descriptor.model_id.clone()) {
            return Err(AasError::schema(
                path,
                format!("duplicate ModelId `{}`", descriptor.model_id),
            ));
        }
        descriptors.push(descriptor);
    }
    Ok(descriptors)
}

/// Child asset identifiers listed by the shell's Bill of Material, in
/// document order.
pub fn extract_bom(shell: &AdministrationShell) -> Result<Vec<String>, AasError> {
    let Some(submodel) = shell.submodel_of_kind(&SubmodelKind::BillOfMaterial) else {
        return Ok(Vec::new());
    };
    let archetype_path = join(&submodel.id_short, "Archetype");
    let archetype = submodel
        .elements
        .iter()
        .find(|e| e.id_short == "Archetype")
        .ok_or_else(|| AasError::schema(&archetype_path, "missing `Archetype` property"))?;
    match &archetype.payload {
        ElementPayload::Property {
            value: PropertyValue::String(s),
            ..
        } if s == BOM_ARCHETYPE_FULL => {}
        ElementPayload::Property { value, .. } => {
            return Err(AasError::schema(
                archetype_path,
                format!("archetype must be `{BOM_ARCHETYPE_FULL}`, found `{value}`"),
            ))
        }
        _ => {
            return Err(AasError::schema(
                archetype_path,
                "`Archetype` must be a property",
            ))
        }
    }
    Ok(submodel
        .elements
        .iter()
        .filter_map(|e| match &e.payload {
            ElementPayload::Reference(target) => Some(target.clone()),
            _ => None,
        })
        .collect())
}

/// Builds a Simulation submodel laid out the way
/// [`extract_simulation_descriptors`] reads it.
pub fn simulation_submodel(id_short: &str, descriptors: &[SimulationModelDescriptor]) -> Submodel {
    let mut taken = HashSet::new();
    let elements = descriptors
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let name = unique_id_short(&d.model_id, "Model", i, &mut taken);
            descriptor_to_element(name, d)
        })
        .collect();
    Submodel {
        id_short: id_short.to_string(),
        kind: SubmodelKind::Simulation,
        elements,
    }
}

/// Builds a `Full` archetype Bill of Material referencing `children`.
pub fn bom_submodel(id_short: &str, children: &[String]) -> Submodel {
    let mut elements = vec![SubmodelElement::text("Archetype", BOM_ARCHETYPE_FULL)];
    elements.extend(
        children
            .iter()
            .enumerate()
            .map(|(i, child)| SubmodelElement::reference(format!("Part{i}"), child.clone())),
    );
    Submodel {
        id_short: id_short.to_string(),
        kind: SubmodelKind::BillOfMaterial,
        elements,
    }
}

fn descriptor_to_element(id_short: String, d: &SimulationModelDescriptor) -> SubmodelElement {
    let mut port_names = HashSet::new();
    let ports = d
        .ports
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut children = vec![
                SubmodelElement::text("Name", p.name.clone()),
                SubmodelElement::text("Direction", p.direction.as_str()),
                SubmodelElement::text("Quantity", p.quantity.clone()),
                SubmodelElement::text("Unit", p.unit.clone()),
            ];
            if p.datatype.is_numeric() || p.range != PortRange::MARKER {
                children.push(SubmodelElement::number("Min", p.range.min, Some(&p.unit)));
                children.push(SubmodelElement::number("Max", p.range.max, Some(&p.unit)));
            }
            children.push(SubmodelElement::text("Datatype", p.datatype.as_str()));
            SubmodelElement::collection(
                unique_id_short(&p.name, "Port", i, &mut port_names),
                children,
            )
        })
        .collect();

    let mut param_names = HashSet::new();
    let parameters = d
        .parameters
        .iter()
        .enumerate()
        .map(|(i, p)| {
            SubmodelElement::collection(
                unique_id_short(&p.name, "Parameter", i, &mut param_names),
                vec![
                    SubmodelElement::text("Name", p.name.clone()),
                    SubmodelElement::number("Value", p.value, Some(&p.unit)),
                ],
            )
        })
        .collect();

    let mut children = vec![
        SubmodelElement::text("ModelId", d.model_id.clone()),
        SubmodelElement::text("StorageLocation", d.storage_location.clone()),
        SubmodelElement::text("SimulationEnvironment", d.simulation_environment.clone()),
        SubmodelElement::collection(
            "Solver",
            vec![
                SubmodelElement::text("Method", d.solver.method.clone()),
                SubmodelElement::number("StepSize", d.solver.step_size, Some("s")),
                SubmodelElement::number("Tolerance", d.solver.tolerance, None),
            ],
        ),
        SubmodelElement::collection("Parameters", parameters),
        SubmodelElement::collection("Ports", ports),
        SubmodelElement::text("LevelOfDetail", d.level_of_detail.as_str()),
        SubmodelElement::text("Discipline", d.discipline.clone()),
        SubmodelElement::text("DecisionLevel", d.decision_level.as_str()),
        SubmodelElement::number("ComputingTime", d.computing_time, Some("s")),
        SubmodelElement::number("Accuracy", d.accuracy, None),
    ];
    if let Some(s) = &d.surrogate {
        let names = |prefix: &str, list: &[String]| {
            list.iter()
                .enumerate()
                .map(|(i, n)| SubmodelElement::text(format!("{prefix}{i}"), n.clone()))
                .collect::<Vec<_>>()
        };
        let numbers = |prefix: &str, list: &[f64]| {
            list.iter()
                .enumerate()
                .map(|(i, v)| SubmodelElement::number(format!("{prefix}{i}"), *v, None))
                .collect::<Vec<_>>()
        };
        children.push(SubmodelElement::collection(
            "Surrogate",
            vec![
                SubmodelElement::text("Kind", "affine"),
                SubmodelElement::collection("Inputs", names("In", &s.inputs)),
                SubmodelElement::collection("Outputs", names("Out", &s.outputs)),
                SubmodelElement::collection(
                    "A",
                    s.a.iter()
                        .enumerate()
                        .map(|(r, row)| {
                            SubmodelElement::collection(format!("Row{r}"), numbers("C", row))
                        })
                        .collect(),
                ),
                SubmodelElement::collection("b", numbers("C", &s.b)),
            ],
        ));
    }
    SubmodelElement::collection(id_short, children)
}

fn unique_id_short(
    preferred: &str,
    prefix: &str,
    index: usize,
    taken: &mut HashSet<String>,
) -> String {
    let mut candidate = if is_valid_id_short(preferred) {
        preferred.to_string()
    } else {
        format!("{prefix}{index}")
    };
    while taken.contains(&candidate) {
        candidate.push('_');
    }
    taken.insert(candidate.clone());
    candidate
}

fn join(parent: &str, child: &str) -> String {
    format!("{parent}{PATH_SEPARATOR}{child}")
}

fn child<'a>(
    parent: &'a SubmodelElement,
    key: &str,
    path: &str,
) -> Result<&'a SubmodelElement, AasError> {
    parent
        .child(key)
        .ok_or_else(|| AasError::schema(path, format!("missing `{key}`")))
}

fn text(parent: &SubmodelElement, key: &str, path: &str) -> Result<String, AasError> {
    match &child(parent, key, path)?.payload {
        ElementPayload::Property {
            value: PropertyValue::String(s),
            ..
        } => Ok(s.clone()),
        _ => Err(AasError::schema(
            join(path, key),
            format!("`{key}` must be a string property"),
        )),
    }
}

fn token<T: std::str::FromStr<Err = String>>(
    parent: &SubmodelElement,
    key: &str,
    path: &str,
) -> Result<T, AasError> {
    text(parent, key, path)?
        .parse()
        .map_err(|e: String| AasError::schema(join(path, key), e))
}

/// Numeric value of a property. String-typed values are accepted when they
/// parse as a number, as AAS tooling frequently stores numbers as strings.
fn element_number(
    element: &SubmodelElement,
    path: &str,
) -> Result<(f64, Option<String>), AasError> {
    let ElementPayload::Property { value, unit } = &element.payload else {
        return Err(AasError::schema(path, "expected a numeric property"));
    };
    let number = match value {
        PropertyValue::Number(n) => *n,
        PropertyValue::String(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| AasError::schema(path, format!("`{s}` is not a number")))?,
        PropertyValue::Boolean(_) => return Err(AasError::schema(path, "expected a number")),
    };
    if !number.is_finite() {
        return Err(AasError::schema(path, "number must be finite"));
    }
    Ok((number, unit.clone()))
}

fn number(parent: &SubmodelElement, key: &str, path: &str) -> Result<f64, AasError> {
    element_number(child(parent, key, path)?, &join(path, key)).map(|(n, _)| n)
}

fn descriptor_from(
    entry: &SubmodelElement,
    path: &str,
    owner: &str,
) -> Result<SimulationModelDescriptor, AasError> {
    let solver_path = join(path, "Solver");
    let solver_el = child(entry, "Solver", path)?;
    let solver = SolverSpec {
        method: text(solver_el, "Method", &solver_path)?,
        step_size: number(solver_el, "StepSize", &solver_path)?,
        tolerance: number(solver_el, "Tolerance", &solver_path)?,
    };

    let parameters = match entry.child("Parameters") {
        None => Vec::new(),
        Some(params) => {
            let params_path = join(path, "Parameters");
            params
                .children()
                .iter()
                .map(|p| parameter_from(p, &join(&params_path, &p.id_short)))
                .collect::<Result<_, _>>()?
        }
    };

    let ports_path = join(path, "Ports");
    let ports_el = child(entry, "Ports", path)?;
    if !matches!(ports_el.payload, ElementPayload::Collection(_)) {
        return Err(AasError::schema(ports_path, "`Ports` must be a collection"));
    }
    let ports = ports_el
        .children()
        .iter()
        .map(|p| port_from(p, &join(&ports_path, &p.id_short)))
        .collect::<Result<Vec<_>, _>>()?;

    let surrogate = entry
        .child("Surrogate")
        .map(|s| surrogate_from(s, &join(path, "Surrogate")))
        .transpose()?;

    let descriptor = SimulationModelDescriptor {
        model_id: text(entry, "ModelId", path)?,
        owner_asset_id: owner.to_string(),
        storage_location: text(entry, "StorageLocation", path)?,
        simulation_environment: text(entry, "SimulationEnvironment", path)?,
        solver,
        parameters,
        ports,
        level_of_detail: token(entry, "LevelOfDetail", path)?,
        discipline: text(entry, "Discipline", path)?,
        decision_level: token(entry, "DecisionLevel", path)?,
        computing_time: number(entry, "ComputingTime", path)?,
        accuracy: number(entry, "Accuracy", path)?,
        surrogate,
    };
    descriptor
        .check()
        .map_err(|message| AasError::schema(path, message))?;
    Ok(descriptor)
}

fn parameter_from(el: &SubmodelElement, path: &str) -> Result<Parameter, AasError> {
    match &el.payload {
        // compact form: the property itself is the parameter
        ElementPayload::Property { .. } => {
            let (value, unit) = element_number(el, path)?;
            Ok(Parameter {
                name: el.id_short.clone(),
                value,
                unit: unit.unwrap_or_default(),
            })
        }
        ElementPayload::Collection(_) => {
            let value_el = child(el, "Value", path)?;
            let (value, unit) = element_number(value_el, &join(path, "Value"))?;
            Ok(Parameter {
                name: text(el, "Name", path)?,
                value,
                unit: unit.unwrap_or_default(),
            })
        }
        _ => Err(AasError::schema(
            path,
            "parameter must be a property or collection",
        )),
    }
}

fn port_from(el: &SubmodelElement, path: &str) -> Result<Port, AasError> {
    if !matches!(el.payload, ElementPayload::Collection(_)) {
        return Err(AasError::schema(path, "port must be a collection"));
    }
    let name = text(el, "Name", path)?;
    let named = |e: AasError| match e {
        AasError::Schema { path, message } => AasError::Schema {
            path,
            message: format!("port `{name}`: {message}"),
        },
        other => other,
    };
    let unit = text(el, "Unit", path).map_err(named)?;
    if unit.trim().is_empty() {
        return Err(named(AasError::schema(
            join(path, "Unit"),
            "unit symbol is empty",
        )));
    }
    let datatype = match el.child("Datatype") {
        None => Datatype::Real,
        Some(_) => token(el, "Datatype", path).map_err(named)?,
    };
    let range = if datatype.is_numeric() || el.child("Min").is_some() || el.child("Max").is_some() {
        let min = number(el, "Min", path).map_err(named)?;
        let max = number(el, "Max", path).map_err(named)?;
        if min > max {
            return Err(AasError::schema(
                path,
                format!("port `{name}`: Min {min} exceeds Max {max}"),
            ));
        }
        PortRange::new(min, max)
    } else {
        PortRange::MARKER
    };
    Ok(Port {
        direction: token(el, "Direction", path).map_err(named)?,
        quantity: text(el, "Quantity", path).map_err(named)?,
        name,
        unit,
        range,
        datatype,
    })
}

fn surrogate_from(el: &SubmodelElement, path: &str) -> Result<SurrogateSpec, AasError> {
    if let Some(kind) = el.child("Kind") {
        let kind_text = text(el, "Kind", path)?;
        if kind_text != "affine" {
            return Err(AasError::schema(
                join(path, &kind.id_short),
                format!("unsupported surrogate kind `{kind_text}`"),
            ));
        }
    }
    let names = |key: &str| -> Result<Vec<String>, AasError> {
        let list = child(el, key, path)?;
        list.children()
            .iter()
            .map(|n| match &n.payload {
                ElementPayload::Property {
                    value: PropertyValue::String(s),
                    ..
                } => Ok(s.clone()),
                _ => Err(AasError::schema(
                    join(&join(path, key), &n.id_short),
                    "port name must be a string property",
                )),
            })
            .collect()
    };
    let numbers = |list: &SubmodelElement, list_path: &str| -> Result<Vec<f64>, AasError> {
        list.children()
            .iter()
            .map(|n| element_number(n, &join(list_path, &n.id_short)).map(|(v, _)| v))
            .collect()
    };
    let a_path = join(path, "A");
    let a = child(el, "A", path)?
        .children()
        .iter()
        .map(|row| numbers(row, &join(&a_path, &row.id_short)))
        .collect::<Result<_, _>>()?;
    let b = numbers(child(el, "b", path)?, &join(path, "b"))?;
    Ok(SurrogateSpec {
        inputs: names("Inputs")?,
        outputs: names("Outputs")?,
        a,
        b,
    })
}
