//! Asset Administration Shell subset used by the integration pipeline.
//!
//! Shells are trees of submodels and submodel elements addressed by their
//! ID-Short. The canonical on-disk form is a single JSON document per shell
//! (see [`parse_shell`] and [`serialize_shell`]). Simulation model
//! descriptors and Bill-of-Material references are read out of that tree by
//! [`extract_simulation_descriptors`] and [`extract_bom`].

mod descriptor;
mod document;
mod simulation;

use std::borrow::Cow;
use std::fmt;

use thiserror::Error;

pub use descriptor::{
    Datatype, DecisionLevel, Direction, LevelOfDetail, Parameter, Port, PortRange,
    SimulationModelDescriptor, SolverSpec, SurrogateSpec,
};
pub use document::{parse_shell, serialize_shell, shell_to_value};
pub use simulation::{
    bom_submodel, extract_bom, extract_simulation_descriptors, simulation_submodel,
    BOM_ARCHETYPE_FULL,
};

/// Separator between segments of an ID-Short path.
pub const PATH_SEPARATOR: char = '/';

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AasError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        message: String,
        line: usize,
        column: usize,
    },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("no element at `{path}`")]
    NotFound { path: String },
}

impl AasError {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        AasError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Path of the offending element, when the error carries one.
    pub fn path(&self) -> Option<&str> {
        match self {
            AasError::Syntax { .. } => None,
            AasError::Schema { path, .. } | AasError::NotFound { path } => Some(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssetKind {
    Instance,
    Type,
}

impl AssetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AssetKind::Instance => "instance",
            AssetKind::Type => "type",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "instance" => Some(AssetKind::Instance),
            "type" => Some(AssetKind::Type),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdministrationShell {
    pub id: String,
    pub id_short: String,
    pub asset_kind: AssetKind,
    pub submodels: Vec<Submodel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SubmodelKind {
    Simulation,
    BillOfMaterial,
    Other(String),
}

impl SubmodelKind {
    pub fn as_str(&self) -> &str {
        match self {
            SubmodelKind::Simulation => "Simulation",
            SubmodelKind::BillOfMaterial => "BillOfMaterial",
            SubmodelKind::Other(name) => name,
        }
    }

    pub fn from_token(token: &str) -> Self {
        match token {
            "Simulation" => SubmodelKind::Simulation,
            "BillOfMaterial" => SubmodelKind::BillOfMaterial,
            other => SubmodelKind::Other(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submodel {
    pub id_short: String,
    pub kind: SubmodelKind,
    pub elements: Vec<SubmodelElement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmodelElement {
    pub id_short: String,
    pub payload: ElementPayload,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementPayload {
    Property {
        value: PropertyValue,
        unit: Option<String>,
    },
    Collection(Vec<SubmodelElement>),
    Reference(String),
    /// Element type this crate does not interpret, kept as found.
    Other {
        kind: String,
        value: serde_json::Value,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropertyValue {
    String(String),
    Number(f64),
    Boolean(bool),
}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyValue::String(s) => f.write_str(s),
            PropertyValue::Number(n) => write!(f, "{n}"),
            PropertyValue::Boolean(b) => write!(f, "{b}"),
        }
    }
}

impl SubmodelElement {
    pub fn property(id_short: impl Into<String>, value: PropertyValue, unit: Option<&str>) -> Self {
        SubmodelElement {
            id_short: id_short.into(),
            payload: ElementPayload::Property {
                value,
                unit: unit.map(str::to_string),
            },
        }
    }

    pub fn text(id_short: impl Into<String>, value: impl Into<String>) -> Self {
        Self::property(id_short, PropertyValue::String(value.into()), None)
    }

    pub fn number(id_short: impl Into<String>, value: f64, unit: Option<&str>) -> Self {
        Self::property(id_short, PropertyValue::Number(value), unit)
    }

    pub fn collection(id_short: impl Into<String>, children: Vec<SubmodelElement>) -> Self {
        SubmodelElement {
            id_short: id_short.into(),
            payload: ElementPayload::Collection(children),
        }
    }

    pub fn reference(id_short: impl Into<String>, target_id: impl Into<String>) -> Self {
        SubmodelElement {
            id_short: id_short.into(),
            payload: ElementPayload::Reference(target_id.into()),
        }
    }

    pub fn children(&self) -> &[SubmodelElement] {
        match &self.payload {
            ElementPayload::Collection(children) => children,
            _ => &[],
        }
    }

    pub fn child(&self, id_short: &str) -> Option<&SubmodelElement> {
        self.children().iter().find(|c| c.id_short == id_short)
    }
}

/// True when `token` is a valid ID-Short: `[A-Za-z][A-Za-z0-9_]*`.
pub fn is_valid_id_short(token: &str) -> bool {
    let mut chars = token.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl AdministrationShell {
    pub fn new(id: impl Into<String>, id_short: impl Into<String>, asset_kind: AssetKind) -> Self {
        AdministrationShell {
            id: id.into(),
            id_short: id_short.into(),
            asset_kind,
            submodels: Vec::new(),
        }
    }

    pub fn with_submodel(mut self, submodel: Submodel) -> Self {
        self.submodels.push(submodel);
        self
    }

    pub fn submodel(&self, id_short: &str) -> Option<&Submodel> {
        self.submodels.iter().find(|s| s.id_short == id_short)
    }

    /// First submodel of the given kind, in document order.
    pub fn submodel_of_kind(&self, kind: &SubmodelKind) -> Option<&Submodel> {
        self.submodels.iter().find(|s| &s.kind == kind)
    }

    /// Checks the structural invariants: non-empty id, valid ID-Shorts,
    /// unique submodel ID-Shorts and unique sibling ID-Shorts.
    pub fn validate(&self) -> Result<(), AasError> {
        if self.id.trim().is_empty() {
            return Err(AasError::schema("", "shell `id` must be non-empty"));
        }
        if !is_valid_id_short(&self.id_short) {
            return Err(AasError::schema(
                "",
                format!("invalid shell idShort `{}`", self.id_short),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for submodel in &self.submodels {
            if !is_valid_id_short(&submodel.id_short) {
                return Err(AasError::schema(
                    submodel.id_short.clone(),
                    format!("invalid submodel idShort `{}`", submodel.id_short),
                ));
            }
            if !seen.insert(submodel.id_short.as_str()) {
                return Err(AasError::schema(
                    submodel.id_short.clone(),
                    "duplicate submodel idShort",
                ));
            }
            validate_siblings(&submodel.id_short, &submodel.elements)?;
        }
        Ok(())
    }

    /// Resolves a slash-separated, case-sensitive ID-Short path. The first
    /// segment names a submodel; a single-segment path yields the
    /// submodel's root collection.
    pub fn resolve_id_short(&self, path: &str) -> Result<Cow<'_, SubmodelElement>, AasError> {
        let not_found = || AasError::NotFound {
            path: path.to_string(),
        };
        let mut segments = path.split(PATH_SEPARATOR);
        let first = segments
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(not_found)?;
        let submodel = self.submodel(first).ok_or_else(not_found)?;

        let mut siblings = submodel.elements.as_slice();
        let mut found: Option<&SubmodelElement> = None;
        for segment in segments {
            let element = siblings
                .iter()
                .find(|e| e.id_short == segment)
                .ok_or_else(not_found)?;
            siblings = element.children();
            found = Some(element);
        }
        Ok(match found {
            Some(element) => Cow::Borrowed(element),
            None => Cow::Owned(SubmodelElement::collection(
                submodel.id_short.clone(),
                submodel.elements.clone(),
            )),
        })
    }
}

/// Free-function form of [`AdministrationShell::resolve_id_short`].
pub fn resolve_id_short<'a>(
    shell: &'a AdministrationShell,
    path: &str,
) -> Result<Cow<'a, SubmodelElement>, AasError> {
    shell.resolve_id_short(path)
}

fn validate_siblings(parent_path: &str, elements: &[SubmodelElement]) -> Result<(), AasError> {
    let mut seen = std::collections::HashSet::new();
    for element in elements {
        let path = format!("{parent_path}{PATH_SEPARATOR}{}", element.id_short);
        if !is_valid_id_short(&element.id_short) {
            return Err(AasError::schema(
                path,
                format!("invalid idShort `{}`", element.id_short),
            ));
        }
        if !seen.insert(element.id_short.as_str()) {
            return Err(AasError::schema(path, "duplicate sibling idShort"));
        }
        match &element.payload {
            ElementPayload::Collection(children) => validate_siblings(&path, children)?,
            ElementPayload::Property {
                value: PropertyValue::Number(n),
                ..
            } if !n.is_finite() => {
                return Err(AasError::schema(path, "property number must be finite"));
            }
            _ => {}
        }
    }
    Ok(())
}
