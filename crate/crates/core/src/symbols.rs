//! Label ↔ node mapping used by the file formats and change scripts.

use std::collections::{BTreeMap, HashMap};

use crate::store::NodeId;

/// Two-way map between document labels and store nodes.
#[derive(Clone, Default, Debug)]
pub struct SymbolTable {
    by_label: BTreeMap<String, NodeId>,
    by_node: HashMap<NodeId, String>,
}

impl SymbolTable {
    pub fn new() -> Self {
        SymbolTable::default()
    }

    /// Binds a label; returns `false` when the label is already taken.
    pub fn insert(&mut self, label: &str, id: NodeId) -> bool {
        if self.by_label.contains_key(label) {
            return false;
        }
        self.by_label.insert(label.to_string(), id);
        self.by_node.insert(id, label.to_string());
        true
    }

    pub fn resolve(&self, label: &str) -> Option<NodeId> {
        self.by_label.get(label).copied()
    }

    pub fn label_of(&self, id: NodeId) -> Option<&str> {
        self.by_node.get(&id).map(|s| s.as_str())
    }

    pub fn remove_label(&mut self, label: &str) -> Option<NodeId> {
        let id = self.by_label.remove(label)?;
        self.by_node.remove(&id);
        Some(id)
    }

    pub fn remove_node(&mut self, id: NodeId) {
        if let Some(label) = self.by_node.remove(&id) {
            self.by_label.remove(&label);
        }
    }

    /// Entries sorted by label.
    pub fn iter(&self) -> impl Iterator<Item = (&str, NodeId)> {
        self.by_label.iter().map(|(l, &id)| (l.as_str(), id))
    }

    pub fn len(&self) -> usize {
        self.by_label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_label.is_empty()
    }
}
