//! Canonical JSON document form of a shell.
//!
//! ```json
//! {
//!   "id": "urn:ptx:asset:dac",
//!   "idShort": "DAC",
//!   "assetKind": "instance",
//!   "submodels": [
//!     { "idShort": "SimulationModels", "kind": "Simulation", "elements": [
//!         { "idShort": "StepSize", "property": { "value": 0.1, "unit": "s" } },
//!         { "idShort": "Solver", "collection": [ ... ] },
//!         { "idShort": "Part0", "reference": { "targetId": "urn:..." } }
//!     ] }
//!   ]
//! }
//! ```
//!
//! Elements carry exactly one payload key. An element whose payload key is
//! not one of `property`, `collection` or `reference` is kept as
//! [`ElementPayload::Other`].

use serde_json::{Map, Value};

use super::{
    AasError, AdministrationShell, AssetKind, ElementPayload, PropertyValue, Submodel,
    SubmodelElement, SubmodelKind, PATH_SEPARATOR,
};

pub fn parse_shell(document: &str) -> Result<AdministrationShell, AasError> {
    let value: Value = serde_json::from_str(document).map_err(|e| AasError::Syntax {
        message: e.to_string(),
        line: e.line(),
        column: e.column(),
    })?;
    let shell = shell_from_value(&value)?;
    shell.validate()?;
    Ok(shell)
}

/// Pretty-printed canonical document. Object keys are emitted in sorted
/// order, so equal shells serialize to identical bytes.
pub fn serialize_shell(shell: &AdministrationShell) -> String {
    serde_json::to_string_pretty(&shell_to_value(shell)).expect("shell values are serializable")
}

pub fn shell_to_value(shell: &AdministrationShell) -> Value {
    let mut map = Map::new();
    map.insert("id".into(), Value::String(shell.id.clone()));
    map.insert("idShort".into(), Value::String(shell.id_short.clone()));
    map.insert(
        "assetKind".into(),
        Value::String(shell.asset_kind.as_str().into()),
    );
    map.insert(
        "submodels".into(),
        Value::Array(shell.submodels.iter().map(submodel_to_value).collect()),
    );
    Value::Object(map)
}

fn submodel_to_value(submodel: &Submodel) -> Value {
    let mut map = Map::new();
    map.insert("idShort".into(), Value::String(submodel.id_short.clone()));
    map.insert("kind".into(), Value::String(submodel.kind.as_str().into()));
    map.insert(
        "elements".into(),
        Value::Array(submodel.elements.iter().map(element_to_value).collect()),
    );
    Value::Object(map)
}

fn element_to_value(element: &SubmodelElement) -> Value {
    let mut map = Map::new();
    map.insert("idShort".into(), Value::String(element.id_short.clone()));
    match &element.payload {
        ElementPayload::Property { value, unit } => {
            let mut prop = Map::new();
            let json = match value {
                PropertyValue::String(s) => Value::String(s.clone()),
                PropertyValue::Number(n) => serde_json::Number::from_f64(*n)
                    .map(Value::Number)
                    .unwrap_or(Value::Null),
                PropertyValue::Boolean(b) => Value::Bool(*b),
            };
            prop.insert("value".into(), json);
            if let Some(unit) = unit {
                prop.insert("unit".into(), Value::String(unit.clone()));
            }
            map.insert("property".into(), Value::Object(prop));
        }
        ElementPayload::Collection(children) => {
            map.insert(
                "collection".into(),
                Value::Array(children.iter().map(element_to_value).collect()),
            );
        }
        ElementPayload::Reference(target) => {
            let mut reference = Map::new();
            reference.insert("targetId".into(), Value::String(target.clone()));
            map.insert("reference".into(), Value::Object(reference));
        }
        ElementPayload::Other { kind, value } => {
            map.insert(kind.clone(), value.clone());
        }
    }
    Value::Object(map)
}

fn shell_from_value(value: &Value) -> Result<AdministrationShell, AasError> {
    let obj = value
        .as_object()
        .ok_or_else(|| AasError::schema("", "shell document must be a JSON object"))?;
    let id = required_str(obj, "id", "")?;
    let id_short = required_str(obj, "idShort", "")?;
    let asset_kind = match obj.get("assetKind") {
        None => AssetKind::Instance,
        Some(Value::String(token)) => AssetKind::from_token(token)
            .ok_or_else(|| AasError::schema("", format!("unknown assetKind `{token}`")))?,
        Some(_) => return Err(AasError::schema("", "`assetKind` must be a string")),
    };
    let submodels = match obj.get("submodels") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, item)| submodel_from_value(item, i))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(AasError::schema("", "`submodels` must be an array")),
    };
    Ok(AdministrationShell {
        id,
        id_short,
        asset_kind,
        submodels,
    })
}

fn submodel_from_value(value: &Value, index: usize) -> Result<Submodel, AasError> {
    let fallback = format!("[{index}]");
    let obj = value
        .as_object()
        .ok_or_else(|| AasError::schema(fallback.clone(), "submodel must be a JSON object"))?;
    let id_short = required_str(obj, "idShort", &fallback)?;
    let kind = SubmodelKind::from_token(&required_str(obj, "kind", &id_short)?);
    let elements = elements_from(obj.get("elements"), &id_short, "elements")?;
    Ok(Submodel {
        id_short,
        kind,
        elements,
    })
}

fn elements_from(
    value: Option<&Value>,
    parent_path: &str,
    key: &str,
) -> Result<Vec<SubmodelElement>, AasError> {
    match value {
        None => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, item)| element_from_value(item, parent_path, i))
            .collect(),
        Some(_) => Err(AasError::schema(
            parent_path,
            format!("`{key}` must be an array"),
        )),
    }
}

fn element_from_value(
    value: &Value,
    parent_path: &str,
    index: usize,
) -> Result<SubmodelElement, AasError> {
    let indexed = format!("{parent_path}{PATH_SEPARATOR}[{index}]");
    let obj = value
        .as_object()
        .ok_or_else(|| AasError::schema(indexed.clone(), "element must be a JSON object"))?;
    let id_short = match obj.get("idShort") {
        Some(Value::String(s)) => s.clone(),
        _ => return Err(AasError::schema(indexed, "missing string field `idShort`")),
    };
    let path = format!("{parent_path}{PATH_SEPARATOR}{id_short}");

    let mut payload_keys = obj.keys().filter(|k| k.as_str() != "idShort");
    let (key, payload_value) = match (payload_keys.next(), payload_keys.next()) {
        (Some(key), None) => (key.as_str(), &obj[key]),
        (None, _) => return Err(AasError::schema(path, "element has no payload")),
        (Some(_), Some(_)) => {
            return Err(AasError::schema(path, "element has more than one payload"))
        }
    };

    let payload = match key {
        "property" => {
            let prop = payload_value
                .as_object()
                .ok_or_else(|| AasError::schema(path.clone(), "`property` must be an object"))?;
            let value = match prop.get("value") {
                Some(Value::String(s)) => PropertyValue::String(s.clone()),
                Some(Value::Bool(b)) => PropertyValue::Boolean(*b),
                Some(Value::Number(n)) => PropertyValue::Number(n.as_f64().ok_or_else(|| {
                    AasError::schema(path.clone(), "property number is not representable")
                })?),
                Some(_) => {
                    return Err(AasError::schema(
                        path,
                        "property value must be a string, number or boolean",
                    ))
                }
                None => return Err(AasError::schema(path, "property has no `value`")),
            };
            let unit = match prop.get("unit") {
                None | Some(Value::Null) => None,
                Some(Value::String(u)) => Some(u.clone()),
                Some(_) => return Err(AasError::schema(path, "`unit` must be a string")),
            };
            ElementPayload::Property { value, unit }
        }
        "collection" => {
            ElementPayload::Collection(elements_from(Some(payload_value), &path, "collection")?)
        }
        "reference" => {
            let target = payload_value
                .as_object()
                .and_then(|r| r.get("targetId"))
                .and_then(Value::as_str)
                .ok_or_else(|| {
                    AasError::schema(path.clone(), "reference needs a string `targetId`")
                })?;
            ElementPayload::Reference(target.to_string())
        }
        other => ElementPayload::Other {
            kind: other.to_string(),
            value: payload_value.clone(),
        },
    };
    Ok(SubmodelElement { id_short, payload })
}

fn required_str(obj: &Map<String, Value>, key: &str, path: &str) -> Result<String, AasError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(AasError::schema(path, format!("`{key}` must be a string"))),
        None => Err(AasError::schema(path, format!("missing field `{key}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let shell = parse_shell(r#"{"id":"urn:x","idShort":"X"}"#).unwrap();
        assert!(shell.submodels.is_empty());
        assert_eq!(shell.asset_kind, AssetKind::Instance);
    }

    #[test]
    fn kind_tagged_submodels() {
        let doc = r#"{
          "id": "urn:ptx:asset:methanation", "idShort": "Methanation", "assetKind": "instance",
          "submodels": [
            {"idShort": "SimulationModels", "kind": "Simulation", "elements": []},
            {"idShort": "BillOfMaterial", "kind": "BillOfMaterial", "elements": [
              {"idShort": "Archetype", "property": {"value": "Full"}}
            ]},
            {"idShort": "Nameplate", "kind": "DigitalNameplate", "elements": [
              {"idShort": "Manual", "file": {"path": "/docs/manual.pdf"}}
            ]}
          ]
        }"#;
        let shell = parse_shell(doc).unwrap();
        let kinds: Vec<_> = shell.submodels.iter().map(|s| s.kind.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                SubmodelKind::Simulation,
                SubmodelKind::BillOfMaterial,
                SubmodelKind::Other("DigitalNameplate".into())
            ]
        );
        // the unknown element type survives a round trip
        let again = parse_shell(&serialize_shell(&shell)).unwrap();
        assert_eq!(again, shell);
    }

    #[test]
    fn duplicate_sibling_reports_path() {
        let doc = r#"{"id":"urn:x","idShort":"X","submodels":[
            {"idShort":"SimulationModels","kind":"Simulation","elements":[
              {"idShort":"Solver","collection":[]},
              {"idShort":"Solver","property":{"value":1}}
            ]}]}"#;
        assert_eq!(
            parse_shell(doc).unwrap_err(),
            AasError::Schema {
                path: "SimulationModels/Solver".into(),
                message: "duplicate sibling idShort".into()
            }
        );
    }

    #[test]
    fn missing_id_is_schema_error() {
        assert!(matches!(
            parse_shell(r#"{"idShort":"X"}"#),
            Err(AasError::Schema { message, .. }) if message.contains("`id`")
        ));
        assert!(matches!(
            parse_shell(r#"{"id":"urn:x"}"#),
            Err(AasError::Schema { .. })
        ));
    }

    #[test]
    fn malformed_json_is_syntax_error() {
        assert!(matches!(
            parse_shell("{\"id\": "),
            Err(AasError::Syntax { .. })
        ));
    }

    #[test]
    fn element_without_id_short_uses_index_path() {
        let doc = r#"{"id":"urn:x","idShort":"X","submodels":[
            {"idShort":"S","kind":"Other","elements":[{"property":{"value":1}}]}]}"#;
        assert_eq!(parse_shell(doc).unwrap_err().path(), Some("S/[0]"));
    }

    #[test]
    fn ambiguous_payload_rejected() {
        let doc = r#"{"id":"urn:x","idShort":"X","submodels":[
            {"idShort":"S","kind":"Other","elements":[
              {"idShort":"P","property":{"value":1},"collection":[]}]}]}"#;
        assert!(parse_shell(doc).is_err());
    }
}
