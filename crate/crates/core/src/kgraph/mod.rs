//! Embedded typed property graph holding the twin's model comprehension:
//! production system, assets, models and ports with their relations.
//!
//! Node ids follow `system:{systemId}`, `asset:{assetId}`,
//! `model:{modelId}` and `port:{modelId}#{portName}`, so rebuilding from
//! the same sources yields the same graph.

mod build;
mod export;
mod query;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, RwLock, RwLockReadGuard};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::aas::Direction;

pub use build::build_graph;
pub use export::{export_graph, import_graph, ExportFormat};
pub use query::{query_models, ModelFilter};

pub type Properties = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("consistency error: {0}")]
    Consistency(String),
}

impl GraphError {
    pub fn code(&self) -> &'static str {
        match self {
            GraphError::Syntax(_) => "SyntaxError",
            GraphError::Schema(_) => "SchemaError",
            GraphError::Consistency(_) => "ConsistencyError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    ProductionSystem,
    Asset,
    Model,
    Port,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::ProductionSystem => "ProductionSystem",
            NodeKind::Asset => "Asset",
            NodeKind::Model => "Model",
            NodeKind::Port => "Port",
        }
    }
}

/// Relation types. Variants are declared in the lexical order of their
/// names so the derived ordering matches a sort on the name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EdgeKind {
    ConnectsWith,
    DescribedBy,
    FollowedBy,
    HasPart,
    HasPort,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::ConnectsWith => "connectsWith",
            EdgeKind::DescribedBy => "describedBy",
            EdgeKind::FollowedBy => "followedBy",
            EdgeKind::HasPart => "hasPart",
            EdgeKind::HasPort => "hasPort",
        }
    }

    fn allows(self, src: NodeKind, dst: NodeKind) -> bool {
        use NodeKind::*;
        matches!(
            (self, src, dst),
            (EdgeKind::HasPart, Asset | ProductionSystem, Asset)
                | (EdgeKind::FollowedBy, Asset, Asset)
                | (EdgeKind::DescribedBy, Asset, Model)
                | (EdgeKind::HasPort, Model, Port)
                | (EdgeKind::ConnectsWith, Port, Port)
        )
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Monotonic version stamp returned by every mutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Version(pub u64);

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub properties: Properties,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge<'a> {
    pub src: &'a str,
    pub kind: EdgeKind,
    pub dst: &'a str,
    pub properties: &'a Properties,
}

type EdgeKey = (String, EdgeKind, String);

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    nodes: BTreeMap<String, Node>,
    edges: BTreeMap<EdgeKey, Properties>,
    by_kind: BTreeMap<NodeKind, BTreeSet<String>>,
    by_asset: BTreeMap<String, BTreeSet<String>>,
    version: u64,
}

/// Structural equality: same nodes and edges with the same properties.
/// The version stamp is not part of the content.
impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

pub fn asset_node_id(asset_id: &str) -> String {
    format!("asset:{asset_id}")
}

pub fn model_node_id(model_id: &str) -> String {
    format!("model:{model_id}")
}

pub fn port_node_id(model_id: &str, port_name: &str) -> String {
    format!("port:{model_id}#{port_name}")
}

pub fn system_node_id(system_id: &str) -> String {
    format!("system:{system_id}")
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> Version {
        Version(self.version)
    }

    fn bump(&mut self) -> Version {
        self.version += 1;
        Version(self.version)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.by_kind
            .get(&kind)
            .into_iter()
            .flatten()
            .map(|id| &self.nodes[id])
    }

    /// Model and port node ids owned by an asset.
    pub fn owned_by(&self, asset_id: &str) -> impl Iterator<Item = &Node> {
        self.by_asset
            .get(asset_id)
            .into_iter()
            .flatten()
            .map(|id| &self.nodes[id])
    }

    /// Edges ordered by (src, kind, dst).
    pub fn edges(&self) -> impl Iterator<Item = Edge<'_>> {
        self.edges
            .iter()
            .map(|((src, kind, dst), properties)| Edge {
                src,
                kind: *kind,
                dst,
                properties,
            })
    }

    pub fn edges_of_kind(&self, kind: EdgeKind) -> impl Iterator<Item = Edge<'_>> {
        self.edges().filter(move |e| e.kind == kind)
    }

    pub fn edge(&self, src: &str, kind: EdgeKind, dst: &str) -> Option<&Properties> {
        self.edges.get(&(src.to_string(), kind, dst.to_string()))
    }

    pub fn outgoing<'a>(&'a self, src: &'a str, kind: EdgeKind) -> impl Iterator<Item = Edge<'a>> {
        let start = (src.to_string(), kind, String::new());
        self.edges
            .range(start..)
            .take_while(move |((s, k, _), _)| s == src && *k == kind)
            .map(|((src, kind, dst), properties)| Edge {
                src,
                kind: *kind,
                dst,
                properties,
            })
    }

    pub fn incoming<'a>(&'a self, dst: &'a str, kind: EdgeKind) -> impl Iterator<Item = Edge<'a>> {
        self.edges_of_kind(kind).filter(move |e| e.dst == dst)
    }

    pub fn add_node(
        &mut self,
        id: impl Into<String>,
        kind: NodeKind,
        properties: Properties,
    ) -> Result<Version, GraphError> {
        let id = id.into();
        if self.nodes.contains_key(&id) {
            return Err(GraphError::Schema(format!("duplicate node id `{id}`")));
        }
        if matches!(kind, NodeKind::Model | NodeKind::Port) {
            if let Some(owner) = properties.get("ownerAssetId").and_then(Value::as_str) {
                self.by_asset
                    .entry(owner.to_string())
                    .or_default()
                    .insert(id.clone());
            }
        }
        self.by_kind.entry(kind).or_default().insert(id.clone());
        self.nodes.insert(
            id.clone(),
            Node {
                id,
                kind,
                properties,
            },
        );
        Ok(self.bump())
    }

    /// Inserts an edge after checking that both endpoints exist, that their
    /// kinds fit the edge signature and, for `connectsWith`, that it runs
    /// from an output port to an input port.
    pub fn add_edge(
        &mut self,
        src: &str,
        kind: EdgeKind,
        dst: &str,
        properties: Properties,
    ) -> Result<Version, GraphError> {
        let lookup = |id: &str| {
            self.nodes.get(id).ok_or_else(|| {
                GraphError::Schema(format!("{kind} edge references missing node `{id}`"))
            })
        };
        let (src_node, dst_node) = (lookup(src)?, lookup(dst)?);
        if !kind.allows(src_node.kind, dst_node.kind) {
            return Err(GraphError::Schema(format!(
                "{kind} cannot link {} `{src}` to {} `{dst}`",
                src_node.kind.as_str(),
                dst_node.kind.as_str()
            )));
        }
        if kind == EdgeKind::ConnectsWith {
            let direction = |node: &Node| {
                node.properties
                    .get("direction")
                    .and_then(Value::as_str)
                    .and_then(|d| d.parse::<Direction>().ok())
            };
            if direction(src_node) != Some(Direction::Output)
                || direction(dst_node) != Some(Direction::Input)
            {
                return Err(GraphError::Schema(format!(
                    "connectsWith must run from an output port to an input port (`{src}` -> `{dst}`)"
                )));
            }
            match properties.get("conversionFactor").and_then(Value::as_f64) {
                Some(f) if f > 0.0 && f.is_finite() => {}
                _ => {
                    return Err(GraphError::Schema(format!(
                        "connectsWith `{src}` -> `{dst}` needs a positive conversionFactor"
                    )))
                }
            }
        }
        let key = (src.to_string(), kind, dst.to_string());
        if self.edges.contains_key(&key) {
            return Err(GraphError::Schema(format!(
                "duplicate {kind} edge `{src}` -> `{dst}`"
            )));
        }
        self.edges.insert(key, properties);
        Ok(self.bump())
    }

    pub fn remove_edges_of_kind(&mut self, kind: EdgeKind) -> Version {
        self.edges.retain(|(_, k, _), _| *k != kind);
        self.bump()
    }

    pub fn set_node_property(
        &mut self,
        id: &str,
        key: &str,
        value: Value,
    ) -> Result<Version, GraphError> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| GraphError::Schema(format!("unknown node `{id}`")))?;
        if key == "ownerAssetId" || key == "direction" {
            return Err(GraphError::Schema(format!("property `{key}` is immutable")));
        }
        node.properties.insert(key.to_string(), value);
        Ok(self.bump())
    }

    pub fn remove_node_property(&mut self, id: &str, key: &str) -> Result<Version, GraphError> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| GraphError::Schema(format!("unknown node `{id}`")))?;
        node.properties.remove(key);
        Ok(self.bump())
    }

    /// Checks the whole-graph invariants that single inserts cannot:
    /// every model has a port, every port belongs to exactly one model,
    /// assets have at most one parent and `followedBy` forms one simple
    /// path (matching the production system's sequence when recorded).
    pub fn validate(&self) -> Result<(), GraphError> {
        for model in self.nodes_of_kind(NodeKind::Model) {
            if self.outgoing(&model.id, EdgeKind::HasPort).next().is_none() {
                return Err(GraphError::Schema(format!(
                    "model `{}` has no port",
                    model.id
                )));
            }
        }
        let mut indegree: BTreeMap<(&str, EdgeKind), usize> = BTreeMap::new();
        let mut outdegree: BTreeMap<&str, usize> = BTreeMap::new();
        for edge in self.edges() {
            *indegree.entry((edge.dst, edge.kind)).or_default() += 1;
            if edge.kind == EdgeKind::FollowedBy {
                *outdegree.entry(edge.src).or_default() += 1;
            }
        }
        for port in self.nodes_of_kind(NodeKind::Port) {
            if indegree.get(&(port.id.as_str(), EdgeKind::HasPort)) != Some(&1) {
                return Err(GraphError::Schema(format!(
                    "port `{}` must belong to exactly one model",
                    port.id
                )));
            }
        }
        for ((node, kind), count) in &indegree {
            if *count > 1 && matches!(kind, EdgeKind::HasPart | EdgeKind::FollowedBy) {
                return Err(GraphError::Schema(format!(
                    "asset `{node}` has {count} incoming {kind} edges"
                )));
            }
        }
        if let Some((node, _)) = outdegree.iter().find(|(_, c)| **c > 1) {
            return Err(GraphError::Schema(format!(
                "asset `{node}` has several followedBy successors"
            )));
        }

        let chain = self.followed_by_chain()?;
        for system in self.nodes_of_kind(NodeKind::ProductionSystem) {
            if let Some(Value::Array(sequence)) = system.properties.get("sequence") {
                let expected: Vec<String> = sequence
                    .iter()
                    .filter_map(Value::as_str)
                    .map(asset_node_id)
                    .collect();
                if expected.len() > 1 && chain != expected {
                    return Err(GraphError::Schema(format!(
                        "followedBy chain does not match the sequence of `{}`",
                        system.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Asset node ids along the `followedBy` path, or empty when there are
    /// no such edges.
    pub fn followed_by_chain(&self) -> Result<Vec<String>, GraphError> {
        let edges: Vec<_> = self.edges_of_kind(EdgeKind::FollowedBy).collect();
        if edges.is_empty() {
            return Ok(Vec::new());
        }
        let targets: BTreeSet<&str> = edges.iter().map(|e| e.dst).collect();
        let starts: Vec<&str> = edges
            .iter()
            .map(|e| e.src)
            .filter(|s| !targets.contains(s))
            .collect();
        if starts.len() != 1 {
            return Err(GraphError::Schema(
                "followedBy edges do not form a single simple path".into(),
            ));
        }
        let mut chain = vec![starts[0].to_string()];
        loop {
            let last = chain.last().expect("non-empty").clone();
            let Some(next) = self.outgoing(&last, EdgeKind::FollowedBy).next() else {
                break;
            };
            chain.push(next.dst.to_string());
            if chain.len() > edges.len() + 1 {
                return Err(GraphError::Schema("followedBy edges form a cycle".into()));
            }
        }
        if chain.len() != edges.len() + 1 {
            return Err(GraphError::Schema(
                "followedBy edges do not form a single simple path".into(),
            ));
        }
        Ok(chain)
    }

    /// Model node ids attached to an asset through `describedBy`.
    pub fn models_of_asset(&self, asset_id: &str) -> Vec<&Node> {
        let asset = asset_node_id(asset_id);
        self.outgoing(&asset, EdgeKind::DescribedBy)
            .filter_map(|e| self.nodes.get(e.dst))
            .collect()
    }

    /// Port nodes of a model in declaration order.
    pub fn ports_of_model(&self, model_node: &str) -> Vec<&Node> {
        let mut ports: Vec<&Node> = self
            .outgoing(model_node, EdgeKind::HasPort)
            .filter_map(|e| self.nodes.get(e.dst))
            .collect();
        ports.sort_by_key(|p| {
            p.properties
                .get("index")
                .and_then(Value::as_u64)
                .unwrap_or(u64::MAX)
        });
        ports
    }
}

/// A graph shared between many readers and a single writer.
#[derive(Debug, Clone, Default)]
pub struct SharedGraph {
    inner: Arc<RwLock<KnowledgeGraph>>,
}

impl SharedGraph {
    pub fn new(graph: KnowledgeGraph) -> Self {
        SharedGraph {
            inner: Arc::new(RwLock::new(graph)),
        }
    }

    pub fn read(&self) -> RwLockReadGuard<'_, KnowledgeGraph> {
        self.inner.read().expect("graph lock poisoned")
    }

    /// Owned copy for queries that must not hold the lock.
    pub fn snapshot(&self) -> KnowledgeGraph {
        self.read().clone()
    }

    /// Runs `mutate` under the writer lock and returns the resulting
    /// version.
    pub fn write<T>(
        &self,
        mutate: impl FnOnce(&mut KnowledgeGraph) -> Result<T, GraphError>,
    ) -> Result<(T, Version), GraphError> {
        let mut graph = self.inner.write().expect("graph lock poisoned");
        let out = mutate(&mut graph)?;
        Ok((out, graph.version()))
    }
}
