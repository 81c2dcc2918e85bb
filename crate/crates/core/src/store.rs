//! Mutable typed graph with attributes and a synchronous change-event stream.
//!
//! The store is the single source of truth for every model (net, statechart,
//! trace). All derived state — match sets, agendas, views — is maintained by
//! observing the event stream, so replaying the emitted events against an
//! empty store reproduces the live store exactly.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::rc::{Rc, Weak};

use thiserror::Error;

/// Identifier of a node. Ids are allocated from a per-store counter, are
/// totally ordered, and are never reused within a store's lifetime.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(u64);

impl NodeId {
    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn from_raw(raw: u64) -> Self {
        NodeId(raw)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Node type tag. Tags are interned static strings; ordering is lexicographic.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeType(pub &'static str);

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

/// Edge kind tag.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct EdgeKind(pub &'static str);

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

/// One element of the change stream. Events carry enough information that a
/// listener never has to read the store while handling them.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ChangeEvent {
    NodeAdded {
        ty: NodeType,
        id: NodeId,
    },
    NodeRemoved {
        ty: NodeType,
        id: NodeId,
    },
    EdgeAdded {
        kind: EdgeKind,
        src: NodeId,
        dst: NodeId,
    },
    EdgeRemoved {
        kind: EdgeKind,
        src: NodeId,
        dst: NodeId,
    },
    /// `old` is `None` when the attribute was previously unset.
    AttrSet {
        id: NodeId,
        key: String,
        old: Option<String>,
        new: String,
    },
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum StoreError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// Receives every store event synchronously, in mutation order, before the
/// mutating call returns. Listeners must not mutate the store from `on_event`.
pub trait EventListener {
    fn on_event(&mut self, event: &ChangeEvent);
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SubscriptionId(u64);

#[derive(Default)]
struct Inner {
    next_id: u64,
    nodes: HashMap<NodeId, NodeType>,
    by_type: BTreeMap<NodeType, BTreeSet<NodeId>>,
    out_adj: HashMap<NodeId, BTreeSet<(EdgeKind, NodeId)>>,
    in_adj: HashMap<NodeId, BTreeSet<(EdgeKind, NodeId)>>,
    by_kind: BTreeMap<EdgeKind, BTreeSet<(NodeId, NodeId)>>,
    attrs: HashMap<NodeId, BTreeMap<String, String>>,
    edge_count: usize,
    subscribers: Vec<(u64, Weak<RefCell<dyn EventListener>>)>,
    next_sub: u64,
    markers: BTreeSet<String>,
    queue: VecDeque<ChangeEvent>,
    dispatching: bool,
}

impl Inner {
    fn remove_edge_raw(&mut self, kind: EdgeKind, src: NodeId, dst: NodeId) -> bool {
        let present = self
            .by_kind
            .get_mut(&kind)
            .map(|s| s.remove(&(src, dst)))
            .unwrap_or(false);
        if present {
            if let Some(s) = self.out_adj.get_mut(&src) {
                s.remove(&(kind, dst));
            }
            if let Some(s) = self.in_adj.get_mut(&dst) {
                s.remove(&(kind, src));
            }
            self.edge_count -= 1;
        }
        present
    }
}

/// Cheaply cloneable handle to a shared graph store. All mutations notify
/// subscribers before returning; the single-writer contract means only one
/// logical thread of control mutates at a time.
#[derive(Clone, Default)]
pub struct Store {
    inner: Rc<RefCell<Inner>>,
}

impl Store {
    pub fn new() -> Self {
        Store::default()
    }

    pub fn create_node(&self, ty: NodeType) -> NodeId {
        let id = {
            let mut s = self.inner.borrow_mut();
            let id = NodeId(s.next_id);
            s.next_id += 1;
            s.nodes.insert(id, ty);
            s.by_type.entry(ty).or_default().insert(id);
            id
        };
        self.dispatch(vec![ChangeEvent::NodeAdded { ty, id }]);
        id
    }

    /// Removes a node. Incident edges are removed first, in order sorted by
    /// (kind, src, dst), so the emitted event sequence is deterministic.
    pub fn delete_node(&self, id: NodeId) -> Result<(), StoreError> {
        let events = {
            let mut s = self.inner.borrow_mut();
            let ty = *s.nodes.get(&id).ok_or(StoreError::UnknownNode(id))?;
            let mut incident: BTreeSet<(EdgeKind, NodeId, NodeId)> = BTreeSet::new();
            if let Some(out) = s.out_adj.get(&id) {
                incident.extend(out.iter().map(|&(k, dst)| (k, id, dst)));
            }
            if let Some(inn) = s.in_adj.get(&id) {
                incident.extend(inn.iter().map(|&(k, src)| (k, src, id)));
            }
            let mut events = Vec::with_capacity(incident.len() + 1);
            for (kind, src, dst) in incident {
                s.remove_edge_raw(kind, src, dst);
                events.push(ChangeEvent::EdgeRemoved { kind, src, dst });
            }
            s.nodes.remove(&id);
            if let Some(set) = s.by_type.get_mut(&ty) {
                set.remove(&id);
            }
            s.out_adj.remove(&id);
            s.in_adj.remove(&id);
            s.attrs.remove(&id);
            events.push(ChangeEvent::NodeRemoved { ty, id });
            events
        };
        self.dispatch(events);
        Ok(())
    }

    /// Adds an edge; edges are sets, so a duplicate is rejected silently
    /// (returns `false`, no event).
    pub fn add_edge(&self, kind: EdgeKind, src: NodeId, dst: NodeId) -> Result<bool, StoreError> {
        let added = {
            let mut s = self.inner.borrow_mut();
            if !s.nodes.contains_key(&src) {
                return Err(StoreError::UnknownNode(src));
            }
            if !s.nodes.contains_key(&dst) {
                return Err(StoreError::UnknownNode(dst));
            }
            let fresh = s.by_kind.entry(kind).or_default().insert((src, dst));
            if fresh {
                s.out_adj.entry(src).or_default().insert((kind, dst));
                s.in_adj.entry(dst).or_default().insert((kind, src));
                s.edge_count += 1;
            }
            fresh
        };
        if added {
            self.dispatch(vec![ChangeEvent::EdgeAdded { kind, src, dst }]);
        }
        Ok(added)
    }

    pub fn remove_edge(&self, kind: EdgeKind, src: NodeId, dst: NodeId) -> bool {
        let removed = self.inner.borrow_mut().remove_edge_raw(kind, src, dst);
        if removed {
            self.dispatch(vec![ChangeEvent::EdgeRemoved { kind, src, dst }]);
        }
        removed
    }

    /// Sets an attribute. No event is emitted when the value is unchanged.
    pub fn set_attr(&self, id: NodeId, key: &str, value: &str) -> Result<(), StoreError> {
        let old = {
            let mut s = self.inner.borrow_mut();
            if !s.nodes.contains_key(&id) {
                return Err(StoreError::UnknownNode(id));
            }
            let map = s.attrs.entry(id).or_default();
            let old = map.get(key).cloned();
            if old.as_deref() == Some(value) {
                return Ok(());
            }
            map.insert(key.to_string(), value.to_string());
            old
        };
        self.dispatch(vec![ChangeEvent::AttrSet {
            id,
            key: key.to_string(),
            old,
            new: value.to_string(),
        }]);
        Ok(())
    }

    pub fn subscribe(&self, listener: Rc<RefCell<dyn EventListener>>) -> SubscriptionId {
        let mut s = self.inner.borrow_mut();
        let id = s.next_sub;
        s.next_sub += 1;
        s.subscribers.push((id, Rc::downgrade(&listener)));
        SubscriptionId(id)
    }

    pub fn unsubscribe(&self, sub: SubscriptionId) {
        self.inner
            .borrow_mut()
            .subscribers
            .retain(|(id, _)| *id != sub.0);
    }

    fn dispatch(&self, events: Vec<ChangeEvent>) {
        if events.is_empty() {
            return;
        }
        {
            let mut s = self.inner.borrow_mut();
            s.queue.extend(events);
            if s.dispatching {
                // An outer dispatch loop is already draining the queue.
                return;
            }
            s.dispatching = true;
        }
        loop {
            let event = {
                let mut s = self.inner.borrow_mut();
                match s.queue.pop_front() {
                    Some(e) => e,
                    None => {
                        s.dispatching = false;
                        return;
                    }
                }
            };
            let listeners: Vec<Rc<RefCell<dyn EventListener>>> = {
                let mut s = self.inner.borrow_mut();
                s.subscribers.retain(|(_, w)| w.strong_count() > 0);
                s.subscribers
                    .iter()
                    .filter_map(|(_, w)| w.upgrade())
                    .collect()
            };
            for listener in listeners {
                listener.borrow_mut().on_event(&event);
            }
        }
    }

    // ---- queries -----------------------------------------------------------

    pub fn contains(&self, id: NodeId) -> bool {
        self.inner.borrow().nodes.contains_key(&id)
    }

    pub fn node_type(&self, id: NodeId) -> Option<NodeType> {
        self.inner.borrow().nodes.get(&id).copied()
    }

    /// Live nodes of a type, sorted by id.
    pub fn nodes_of(&self, ty: NodeType) -> Vec<NodeId> {
        self.inner
            .borrow()
            .by_type
            .get(&ty)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    /// All live nodes with their types, sorted by id.
    pub fn all_nodes(&self) -> Vec<(NodeId, NodeType)> {
        let s = self.inner.borrow();
        let mut v: Vec<_> = s.nodes.iter().map(|(&id, &ty)| (id, ty)).collect();
        v.sort_unstable();
        v
    }

    pub fn has_edge(&self, kind: EdgeKind, src: NodeId, dst: NodeId) -> bool {
        self.inner
            .borrow()
            .by_kind
            .get(&kind)
            .map(|s| s.contains(&(src, dst)))
            .unwrap_or(false)
    }

    /// Edges of a kind, sorted by (src, dst).
    pub fn edges_of(&self, kind: EdgeKind) -> Vec<(NodeId, NodeId)> {
        self.inner
            .borrow()
            .by_kind
            .get(&kind)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    /// All edges, sorted by (kind, src, dst).
    pub fn all_edges(&self) -> Vec<(EdgeKind, NodeId, NodeId)> {
        let s = self.inner.borrow();
        let mut v = Vec::with_capacity(s.edge_count);
        for (&kind, set) in &s.by_kind {
            v.extend(set.iter().map(|&(a, b)| (kind, a, b)));
        }
        v
    }

    /// Targets of `kind`-edges leaving `src`, sorted by id.
    pub fn targets(&self, src: NodeId, kind: EdgeKind) -> Vec<NodeId> {
        self.inner
            .borrow()
            .out_adj
            .get(&src)
            .map(|s| {
                s.range((kind, NodeId(0))..=(kind, NodeId(u64::MAX)))
                    .map(|&(_, dst)| dst)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Sources of `kind`-edges entering `dst`, sorted by id.
    pub fn sources(&self, dst: NodeId, kind: EdgeKind) -> Vec<NodeId> {
        self.inner
            .borrow()
            .in_adj
            .get(&dst)
            .map(|s| {
                s.range((kind, NodeId(0))..=(kind, NodeId(u64::MAX)))
                    .map(|&(_, src)| src)
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn attr(&self, id: NodeId, key: &str) -> Option<String> {
        self.inner
            .borrow()
            .attrs
            .get(&id)
            .and_then(|m| m.get(key).cloned())
    }

    /// All attributes of a node, sorted by key.
    pub fn attrs_of(&self, id: NodeId) -> Vec<(String, String)> {
        self.inner
            .borrow()
            .attrs
            .get(&id)
            .map(|m| m.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
            .unwrap_or_default()
    }

    pub fn node_count(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.inner.borrow().edge_count
    }

    /// Claims a named marker on the store; returns `false` when already held.
    /// Used to guard exclusive facilities such as a propagation session.
    pub fn claim_marker(&self, name: &str) -> bool {
        self.inner.borrow_mut().markers.insert(name.to_string())
    }

    pub fn release_marker(&self, name: &str) {
        self.inner.borrow_mut().markers.remove(name);
    }

    /// Referential-integrity scan: every edge endpoint must be live.
    pub fn check_integrity(&self) -> Result<(), String> {
        let s = self.inner.borrow();
        for (kind, set) in &s.by_kind {
            for &(src, dst) in set {
                if !s.nodes.contains_key(&src) || !s.nodes.contains_key(&dst) {
                    return Err(format!("edge {kind}({src}, {dst}) has a dead endpoint"));
                }
            }
        }
        Ok(())
    }
}
