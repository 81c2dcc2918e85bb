//! Typed views over the store for the three models (Petri net, statechart,
//! trace), the well-formedness validators, and the size metric.
//!
//! Trace entries are first-class store nodes (`PlaceTrace`, `TransitionTrace`)
//! so that change-propagation preconditions can pattern-match them.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::store::{EdgeKind, NodeId, NodeType, Store};

pub const PLACE: NodeType = NodeType("Place");
pub const TRANSITION: NodeType = NodeType("Transition");
pub const BASIC: NodeType = NodeType("Basic");
pub const OR_STATE: NodeType = NodeType("Or");
pub const AND_STATE: NodeType = NodeType("And");
pub const HYPER_EDGE: NodeType = NodeType("HyperEdge");
pub const PLACE_TRACE: NodeType = NodeType("PlaceTrace");
pub const TRAN_TRACE: NodeType = NodeType("TransitionTrace");

pub const PRE_ARC: EdgeKind = EdgeKind("preArc");
pub const POST_ARC: EdgeKind = EdgeKind("postArc");
pub const CONTAINS: EdgeKind = EdgeKind("contains");
pub const H_SOURCE: EdgeKind = EdgeKind("hSource");
pub const H_TARGET: EdgeKind = EdgeKind("hTarget");
pub const TRACE_PLACE: EdgeKind = EdgeKind("tracePlace");
pub const TRACE_OR: EdgeKind = EdgeKind("traceOr");
pub const TRACE_BASIC: EdgeKind = EdgeKind("traceBasic");
pub const TRACE_TRAN: EdgeKind = EdgeKind("traceTransition");
pub const TRACE_HEDGE: EdgeKind = EdgeKind("traceHyperEdge");

pub const NAME: &str = "name";

/// Sum of all live nodes and edges, the paper-style size metric.
pub fn model_size(store: &Store) -> usize {
    store.node_count() + store.edge_count()
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Violation {
    pub rule: &'static str,
    pub nodes: Vec<NodeId>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

fn violation(rule: &'static str, nodes: Vec<NodeId>, detail: String) -> Violation {
    Violation {
        rule,
        nodes,
        detail,
    }
}

/// Read-only Petri-net view.
#[derive(Clone, Copy)]
pub struct PetriNetView<'a> {
    store: &'a Store,
}

impl<'a> PetriNetView<'a> {
    pub fn new(store: &'a Store) -> Self {
        PetriNetView { store }
    }

    pub fn places(&self) -> Vec<NodeId> {
        self.store.nodes_of(PLACE)
    }

    pub fn transitions(&self) -> Vec<NodeId> {
        self.store.nodes_of(TRANSITION)
    }

    /// Places feeding `t`, sorted.
    pub fn pre(&self, t: NodeId) -> Vec<NodeId> {
        self.store.sources(t, PRE_ARC)
    }

    /// Places fed by `t`, sorted.
    pub fn post(&self, t: NodeId) -> Vec<NodeId> {
        self.store.targets(t, POST_ARC)
    }

    /// Transitions fed by place `p` (its post-transitions), sorted.
    pub fn post_transitions(&self, p: NodeId) -> Vec<NodeId> {
        self.store.targets(p, PRE_ARC)
    }

    /// Transitions feeding place `p` (its pre-transitions), sorted.
    pub fn pre_transitions(&self, p: NodeId) -> Vec<NodeId> {
        self.store.sources(p, POST_ARC)
    }

    /// Net-scoped size: places + transitions + arcs.
    pub fn size(&self) -> usize {
        self.places().len()
            + self.transitions().len()
            + self.store.edges_of(PRE_ARC).len()
            + self.store.edges_of(POST_ARC).len()
    }
}

/// Read-only statechart view.
#[derive(Clone, Copy)]
pub struct StatechartView<'a> {
    store: &'a Store,
}

pub fn is_state_type(ty: NodeType) -> bool {
    ty == BASIC || ty == OR_STATE || ty == AND_STATE
}

impl<'a> StatechartView<'a> {
    pub fn new(store: &'a Store) -> Self {
        StatechartView { store }
    }

    pub fn states(&self) -> Vec<NodeId> {
        let mut v = self.store.nodes_of(BASIC);
        v.extend(self.store.nodes_of(OR_STATE));
        v.extend(self.store.nodes_of(AND_STATE));
        v.sort_unstable();
        v
    }

    pub fn hyperedges(&self) -> Vec<NodeId> {
        self.store.nodes_of(HYPER_EDGE)
    }

    pub fn children(&self, state: NodeId) -> Vec<NodeId> {
        self.store.targets(state, CONTAINS)
    }

    pub fn parent(&self, state: NodeId) -> Option<NodeId> {
        self.store.sources(state, CONTAINS).first().copied()
    }

    /// States with no containment parent, sorted by id.
    pub fn top_level(&self) -> Vec<NodeId> {
        self.states()
            .into_iter()
            .filter(|&s| self.parent(s).is_none())
            .collect()
    }

    pub fn hyperedge_sources(&self, h: NodeId) -> Vec<NodeId> {
        self.store.targets(h, H_SOURCE)
    }

    pub fn hyperedge_targets(&self, h: NodeId) -> Vec<NodeId> {
        self.store.targets(h, H_TARGET)
    }
}

/// Read-only trace view: the place ↔ state correspondence.
#[derive(Clone, Copy)]
pub struct TraceView<'a> {
    store: &'a Store,
}

impl<'a> TraceView<'a> {
    pub fn new(store: &'a Store) -> Self {
        TraceView { store }
    }

    pub fn trace_of_place(&self, p: NodeId) -> Option<NodeId> {
        self.store.sources(p, TRACE_PLACE).first().copied()
    }

    pub fn trace_of_transition(&self, t: NodeId) -> Option<NodeId> {
        self.store.sources(t, TRACE_TRAN).first().copied()
    }

    /// The OR state a live place maps to.
    pub fn equiv(&self, p: NodeId) -> Option<NodeId> {
        let tr = self.trace_of_place(p)?;
        self.store.targets(tr, TRACE_OR).first().copied()
    }

    /// The Basic state created for a place at initialization.
    pub fn basic_of(&self, p: NodeId) -> Option<NodeId> {
        let tr = self.trace_of_place(p)?;
        self.store.targets(tr, TRACE_BASIC).first().copied()
    }

    /// The hyperedge a transition maps to.
    pub fn hedge_of(&self, t: NodeId) -> Option<NodeId> {
        let tr = self.trace_of_transition(t)?;
        self.store.targets(tr, TRACE_HEDGE).first().copied()
    }
}

/// Structural statechart validation: containment forest, OR/AND/Basic
/// alternation, hyperedge endpoints.
pub fn validate_statechart(store: &Store) -> Vec<Violation> {
    let sc = StatechartView::new(store);
    let mut out = Vec::new();

    let states = sc.states();
    let state_set: HashSet<NodeId> = states.iter().copied().collect();

    for &s in &states {
        let parents = store.sources(s, CONTAINS);
        if parents.len() > 1 {
            out.push(violation(
                "forest/multi-parent",
                parents.clone(),
                format!("state {s} has {} parents", parents.len()),
            ));
        }
        if let Some(&p) = parents.first() {
            if !state_set.contains(&p) {
                out.push(violation(
                    "forest/non-state-parent",
                    vec![p, s],
                    format!("parent {p} of {s} is not a state"),
                ));
            }
        }
    }

    // Cycle check over containment, following the single-parent chain.
    for &s in &states {
        let mut seen = HashSet::new();
        let mut cur = s;
        while let Some(p) = sc.parent(cur) {
            if !seen.insert(p) || p == s {
                out.push(violation(
                    "forest/cycle",
                    vec![s],
                    format!("containment cycle through {s}"),
                ));
                break;
            }
            cur = p;
        }
    }

    for &s in &states {
        let ty = store.node_type(s).unwrap();
        for c in sc.children(s) {
            let cty = match store.node_type(c) {
                Some(t) => t,
                None => continue,
            };
            let ok = match ty {
                OR_STATE => cty == BASIC || cty == AND_STATE,
                AND_STATE => cty == OR_STATE,
                _ => false,
            };
            if !ok {
                out.push(violation(
                    "alternation",
                    vec![s, c],
                    format!("{ty} state {s} contains {cty} state {c}"),
                ));
            }
        }
    }

    for h in sc.hyperedges() {
        for b in sc.hyperedge_sources(h).into_iter().chain(sc.hyperedge_targets(h)) {
            if store.node_type(b) != Some(BASIC) {
                out.push(violation(
                    "hyperedge/non-basic-endpoint",
                    vec![h, b],
                    format!("hyperedge {h} endpoint {b} is not a Basic state"),
                ));
            }
        }
    }

    out
}

/// Trace validation against the current net and statechart: every live place
/// has exactly one trace with live OR and Basic targets, `equiv` is injective,
/// no trace dangles, and the analogous checks hold for transitions.
pub fn validate_trace(store: &Store) -> Vec<Violation> {
    let mut out = Vec::new();
    let trace = TraceView::new(store);

    let mut or_owner: HashMap<NodeId, NodeId> = HashMap::new();

    for p in store.nodes_of(PLACE) {
        let traces = store.sources(p, TRACE_PLACE);
        if traces.len() != 1 {
            out.push(violation(
                "trace/place-trace-count",
                vec![p],
                format!("place {p} has {} trace entries", traces.len()),
            ));
            continue;
        }
        match trace.equiv(p) {
            Some(o) if store.node_type(o) == Some(OR_STATE) => {
                if let Some(&other) = or_owner.get(&o) {
                    out.push(violation(
                        "trace/equiv-not-injective",
                        vec![other, p, o],
                        format!("places {other} and {p} both map to OR {o}"),
                    ));
                }
                or_owner.insert(o, p);
            }
            got => out.push(violation(
                "trace/equiv-missing",
                vec![p],
                format!("place {p} has no live OR mapping (found {got:?})"),
            )),
        }
        match trace.basic_of(p) {
            Some(b) if store.node_type(b) == Some(BASIC) => {}
            got => out.push(violation(
                "trace/basic-missing",
                vec![p],
                format!("place {p} has no live Basic mapping (found {got:?})"),
            )),
        }
    }

    for tr in store.nodes_of(PLACE_TRACE) {
        if store.targets(tr, TRACE_PLACE).is_empty() {
            out.push(violation(
                "trace/dangling-place-trace",
                vec![tr],
                format!("trace {tr} references no live place"),
            ));
        }
    }

    for t in store.nodes_of(TRANSITION) {
        let traces = store.sources(t, TRACE_TRAN);
        if traces.len() != 1 {
            out.push(violation(
                "trace/transition-trace-count",
                vec![t],
                format!("transition {t} has {} trace entries", traces.len()),
            ));
            continue;
        }
        match trace.hedge_of(t) {
            Some(h) if store.node_type(h) == Some(HYPER_EDGE) => {}
            got => out.push(violation(
                "trace/hyperedge-missing",
                vec![t],
                format!("transition {t} has no live hyperedge mapping (found {got:?})"),
            )),
        }
    }

    for tr in store.nodes_of(TRAN_TRACE) {
        if store.targets(tr, TRACE_TRAN).is_empty() {
            out.push(violation(
                "trace/dangling-transition-trace",
                vec![tr],
                format!("trace {tr} references no live transition"),
            ));
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_size_counts_nodes_and_edges() {
        let store = Store::new();
        assert_eq!(model_size(&store), 0);
        // fork-join: 4 places, 2 transitions, 6 arcs
        let p: Vec<_> = (0..4).map(|_| store.create_node(PLACE)).collect();
        let tf = store.create_node(TRANSITION);
        let tj = store.create_node(TRANSITION);
        store.add_edge(PRE_ARC, p[0], tf).unwrap();
        store.add_edge(POST_ARC, tf, p[1]).unwrap();
        store.add_edge(POST_ARC, tf, p[2]).unwrap();
        store.add_edge(PRE_ARC, p[1], tj).unwrap();
        store.add_edge(PRE_ARC, p[2], tj).unwrap();
        store.add_edge(POST_ARC, tj, p[3]).unwrap();
        assert_eq!(model_size(&store), 12);
        assert_eq!(PetriNetView::new(&store).size(), 12);
    }

    #[test]
    fn alternation_accepts_or_basic_and_rejects_or_or() {
        let store = Store::new();
        let o = store.create_node(OR_STATE);
        let b = store.create_node(BASIC);
        store.add_edge(CONTAINS, o, b).unwrap();
        assert!(validate_statechart(&store).is_empty());

        let o2 = store.create_node(OR_STATE);
        store.add_edge(CONTAINS, o, o2).unwrap();
        let violations = validate_statechart(&store);
        assert!(violations.iter().any(|v| v.rule == "alternation"));
    }

    #[test]
    fn two_parents_is_a_forest_violation() {
        let store = Store::new();
        let o1 = store.create_node(OR_STATE);
        let o2 = store.create_node(OR_STATE);
        let a = store.create_node(AND_STATE);
        store.add_edge(CONTAINS, o1, a).unwrap();
        store.add_edge(CONTAINS, o2, a).unwrap();
        let violations = validate_statechart(&store);
        assert!(violations.iter().any(|v| v.rule == "forest/multi-parent"));
    }

    #[test]
    fn containment_cycle_detected() {
        let store = Store::new();
        let o = store.create_node(OR_STATE);
        let a = store.create_node(AND_STATE);
        store.add_edge(CONTAINS, o, a).unwrap();
        store.add_edge(CONTAINS, a, o).unwrap();
        let violations = validate_statechart(&store);
        assert!(violations.iter().any(|v| v.rule == "forest/cycle"));
    }

    #[test]
    fn hyperedge_endpoint_must_be_basic() {
        let store = Store::new();
        let h = store.create_node(HYPER_EDGE);
        let o = store.create_node(OR_STATE);
        store.add_edge(H_SOURCE, h, o).unwrap();
        let violations = validate_statechart(&store);
        assert!(violations
            .iter()
            .any(|v| v.rule == "hyperedge/non-basic-endpoint"));
    }

    fn traced_place(store: &Store, name: &str) -> (NodeId, NodeId, NodeId) {
        let p = store.create_node(PLACE);
        store.set_attr(p, NAME, name).unwrap();
        let b = store.create_node(BASIC);
        let o = store.create_node(OR_STATE);
        store.add_edge(CONTAINS, o, b).unwrap();
        let tr = store.create_node(PLACE_TRACE);
        store.add_edge(TRACE_PLACE, tr, p).unwrap();
        store.add_edge(TRACE_OR, tr, o).unwrap();
        store.add_edge(TRACE_BASIC, tr, b).unwrap();
        (p, o, b)
    }

    #[test]
    fn trace_validation_passes_on_consistent_model() {
        let store = Store::new();
        traced_place(&store, "p0");
        assert!(validate_trace(&store).is_empty());
    }

    #[test]
    fn dangling_trace_detected() {
        let store = Store::new();
        let (p, _, _) = traced_place(&store, "p0");
        store.delete_node(p).unwrap();
        let violations = validate_trace(&store);
        assert!(violations
            .iter()
            .any(|v| v.rule == "trace/dangling-place-trace"));
    }

    #[test]
    fn equiv_injectivity_violation_detected() {
        let store = Store::new();
        let (_, o, _) = traced_place(&store, "p0");
        let (p2, o2, _) = traced_place(&store, "p1");
        // re-point p2's trace at p0's OR
        let tr2 = TraceView::new(&store).trace_of_place(p2).unwrap();
        store.remove_edge(TRACE_OR, tr2, o2);
        store.add_edge(TRACE_OR, tr2, o).unwrap();
        let violations = validate_trace(&store);
        assert!(violations
            .iter()
            .any(|v| v.rule == "trace/equiv-not-injective"));
    }
}
