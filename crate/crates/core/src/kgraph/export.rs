//! Canonical JSON persistence and Cypher statement export.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EdgeKind, GraphError, KnowledgeGraph, NodeKind, Properties};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Statements,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "statements" | "cypher" => Ok(ExportFormat::Statements),
            other => Err(format!("unknown export format `{other}`")),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    kind: NodeKind,
    #[serde(default)]
    properties: Properties,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    src: String,
    kind: EdgeKind,
    dst: String,
    #[serde(default)]
    properties: Properties,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
}

pub fn export_graph(graph: &KnowledgeGraph, format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => to_json(graph),
        ExportFormat::Statements => to_statements(graph),
    }
}

/// Nodes sorted by id, edges by (src, kind, dst), object keys sorted.
fn to_json(graph: &KnowledgeGraph) -> String {
    let doc = GraphDoc {
        nodes: graph
            .nodes()
            .map(|n| NodeDoc {
                id: n.id.clone(),
                kind: n.kind,
                properties: n.properties.clone(),
            })
            .collect(),
        edges: graph
            .edges()
            .map(|e| EdgeDoc {
                src: e.src.to_string(),
                kind: e.kind,
                dst: e.dst.to_string(),
                properties: e.properties.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("graph documents serialize");
    text.push('\n');
    text
}

/// Rebuilds a graph from its canonical JSON document, enforcing every edge
/// signature and the whole-graph invariants.
pub fn import_graph(text: &str) -> Result<KnowledgeGraph, GraphError> {
    let doc: GraphDoc = serde_json::from_str(text).map_err(|e| {
        if e.is_syntax() || e.is_eof() {
            GraphError::Syntax(e.to_string())
        } else {
            GraphError::Schema(e.to_string())
        }
    })?;
    let mut graph = KnowledgeGraph::new();
    for node in doc.nodes {
        graph.add_node(node.id, node.kind, node.properties)?;
    }
    for edge in doc.edges {
        graph.add_edge(&edge.src, edge.kind, &edge.dst, edge.properties)?;
    }
    graph.validate()?;
    Ok(graph)
}

/// One Cypher statement per node and per edge. Nodes are merged on their
/// `id` property, so replaying the script is idempotent.
fn to_statements(graph: &KnowledgeGraph) -> String {
    let mut out = String::new();
    for node in graph.nodes() {
        write!(
            out,
            "MERGE (n:{} {{id: {}}})",
            node.kind.as_str(),
            cypher_string(&node.id)
        )
        .expect("writing to a String");
        if !node.properties.is_empty() {
            write!(out, " SET n += {}", cypher_map(&node.properties)).expect("writing to a String");
        }
        out.push_str(";\n");
    }
    for edge in graph.edges() {
        write!(
            out,
            "MATCH (a {{id: {}}}), (b {{id: {}}}) MERGE (a)-[r:{}]->(b)",
            cypher_string(edge.src),
            cypher_string(edge.dst),
            edge.kind.as_str()
        )
        .expect("writing to a String");
        if !edge.properties.is_empty() {
            write!(out, " SET r += {}", cypher_map(edge.properties)).expect("writing to a String");
        }
        out.push_str(";\n");
    }
    out
}

fn cypher_map(properties: &Properties) -> String {
    let entries: Vec<String> = properties
        .iter()
        .map(|(k, v)| format!("{}: {}", cypher_key(k), cypher_value(v)))
        .collect();
    format!("{{{}}}", entries.join(", "))
}

fn cypher_key(key: &str) -> String {
    let plain = key
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain {
        key.to_string()
    } else {
        format!("`{}`", key.replace('`', "``"))
    }
}

fn cypher_value(value: &Value) -> String {
    match value {
        Value::Null => "null".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.to_string(),
        Value::String(s) => cypher_string(s),
        Value::Array(items) => {
            let items: Vec<String> = items.iter().map(cypher_value).collect();
            format!("[{}]", items.join(", "))
        }
        // nested maps are not valid property values; store them as JSON text
        Value::Object(_) => cypher_string(&value.to_string()),
    }
}

fn cypher_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}
