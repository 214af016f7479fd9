use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{check_unique_ids, IngestError};
use crate::aas::{extract_bom, AdministrationShell};

/// Asset tree formed from Bill-of-Material references. Every asset reachable
/// from the root is a key of `children`, leaves map to an empty list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HierarchyTree {
    pub root_asset_id: String,
    pub children: BTreeMap<String, Vec<String>>,
}

impl HierarchyTree {
    pub fn contains(&self, asset_id: &str) -> bool {
        self.children.contains_key(asset_id)
    }

    pub fn children_of(&self, asset_id: &str) -> &[String] {
        self.children
            .get(asset_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn parent_of(&self, asset_id: &str) -> Option<&str> {
        self.children
            .iter()
            .find(|(_, kids)| kids.iter().any(|k| k == asset_id))
            .map(|(parent, _)| parent.as_str())
    }

    /// Assets in depth-first pre-order starting at the root.
    pub fn assets(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.children.len());
        let mut stack = vec![self.root_asset_id.as_str()];
        while let Some(asset) = stack.pop() {
            out.push(asset);
            stack.extend(self.children_of(asset).iter().rev().map(String::as_str));
        }
        out
    }

    /// Parent-child pairs in pre-order.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        self.assets()
            .into_iter()
            .flat_map(|parent| {
                self.children_of(parent)
                    .iter()
                    .map(move |child| (parent, child.as_str()))
            })
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.children.values().map(Vec::len).sum()
    }
}

struct Builder<'a> {
    shells: HashMap<&'a str, &'a AdministrationShell>,
    children: BTreeMap<String, Vec<String>>,
    parent: HashMap<String, String>,
    stack: Vec<String>,
}

impl Builder<'_> {
    fn visit(&mut self, asset: &str) -> Result<(), IngestError> {
        let shell = self.shells[asset];
        let bom = extract_bom(shell).map_err(|source| IngestError::Shell {
            id: asset.to_string(),
            source,
        })?;
        self.stack.push(asset.to_string());
        self.children.insert(asset.to_string(), Vec::new());
        for child in bom {
            if let Some(start) = self.stack.iter().position(|a| *a == child) {
                let mut path = self.stack[start..].to_vec();
                path.push(child);
                return Err(IngestError::Cycle { path });
            }
            if let Some(first) = self.parent.get(&child) {
                return Err(IngestError::MultipleParents {
                    asset: child,
                    first: first.clone(),
                    second: asset.to_string(),
                });
            }
            if !self.shells.contains_key(child.as_str()) {
                return Err(IngestError::DanglingReference {
                    from: asset.to_string(),
                    to: child,
                });
            }
            self.parent.insert(child.clone(), asset.to_string());
            self.children
                .get_mut(asset)
                .expect("inserted above")
                .push(child.clone());
            self.visit(&child)?;
        }
        self.stack.pop();
        Ok(())
    }
}

/// Builds the asset hierarchy by recursive depth-first traversal of the
/// Bills of Material, starting at `root_asset_id`.
///
/// Each asset may have at most one parent; references back onto the
/// current traversal path are reported as cycles.
pub fn build_hierarchy(
    shells: &[AdministrationShell],
    root_asset_id: &str,
) -> Result<HierarchyTree, IngestError> {
    check_unique_ids(shells)?;
    let by_id: HashMap<&str, &AdministrationShell> =
        shells.iter().map(|s| (s.id.as_str(), s)).collect();
    if !by_id.contains_key(root_asset_id) {
        return Err(IngestError::UnknownAsset(root_asset_id.to_string()));
    }
    let mut builder = Builder {
        shells: by_id,
        children: BTreeMap::new(),
        parent: HashMap::new(),
        stack: Vec::new(),
    };
    builder.visit(root_asset_id)?;
    Ok(HierarchyTree {
        root_asset_id: root_asset_id.to_string(),
        children: builder.children,
    })
}

/// Shells that no Bill of Material references; a well-formed collection
/// has exactly one.
pub fn unreferenced_shells(shells: &[AdministrationShell]) -> Result<Vec<String>, IngestError> {
    let mut referenced = HashSet::new();
    for shell in shells {
        let bom = extract_bom(shell).map_err(|source| IngestError::Shell {
            id: shell.id.clone(),
            source,
        })?;
        referenced.extend(bom);
    }
    Ok(shells
        .iter()
        .filter(|s| !referenced.contains(&s.id))
        .map(|s| s.id.clone())
        .collect())
}
