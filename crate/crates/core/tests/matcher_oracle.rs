//! Equivalence of the incremental matcher against the brute-force reference
//! evaluator: the master property, exercised with the spec'd fixture deltas
//! and with randomized typed graphs under randomized mutation scripts.

mod common;

use common::fork_join;
use pn2sc_core::eval::eval_patterns;
use pn2sc_core::models::{
    AND_STATE, BASIC, CONTAINS, HYPER_EDGE, NAME, OR_STATE, PLACE, PLACE_TRACE, POST_ARC, PRE_ARC,
    TRACE_BASIC, TRACE_HEDGE, TRACE_OR, TRACE_PLACE, TRACE_TRAN, TRAN_TRACE, TRANSITION,
};
use pn2sc_core::pn2sc::{AND_PRECOND, OR_PRECOND};
use pn2sc_core::propagate::full_library;
use pn2sc_core::rete::{compile, Matcher};
use pn2sc_core::store::{EdgeKind, NodeId, NodeType, Store};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const WATCHED: &[&str] = &[
    AND_PRECOND,
    OR_PRECOND,
    "nonCommonTPre",
    "untracedPlace",
    "untracedTransition",
    "danglingPlaceTrace",
    "danglingTransitionTrace",
    "placeRenameMismatch",
    "transitionRenameMismatch",
];

fn watched_matcher(store: &Store) -> Matcher {
    Matcher::attach(compile(WATCHED, &full_library()).unwrap(), store)
}

fn assert_oracle_equivalence(store: &Store, matcher: &Matcher, context: &str) {
    let sets = eval_patterns(store, &full_library(), WATCHED).unwrap();
    for &pattern in WATCHED {
        let incremental = matcher.current_matches(pattern).unwrap();
        assert_eq!(
            incremental.tuples, sets[pattern].tuples,
            "divergence on {pattern} {context}"
        );
    }
}

#[test]
fn fork_join_attach_has_four_and_matches() {
    let (store, _, _) = fork_join();
    let matcher = watched_matcher(&store);
    assert_eq!(matcher.current_matches(AND_PRECOND).unwrap().len(), 4);
    assert_oracle_equivalence(&store, &matcher, "after attach");
}

#[test]
fn removing_and_restoring_a_join_arc_round_trips_the_deltas() {
    let (store, p, t) = fork_join();
    let matcher = watched_matcher(&store);
    matcher.take_deltas();

    store.remove_edge(PRE_ARC, p[1], t[1]);
    assert_oracle_equivalence(&store, &matcher, "after arc removal");
    let deltas = matcher.take_deltas();
    let and_delta = deltas.iter().find(|d| d.pattern == AND_PRECOND).unwrap();
    assert_eq!(and_delta.disappeared.len(), 4);
    assert!(and_delta.appeared.is_empty());

    store.add_edge(PRE_ARC, p[1], t[1]).unwrap();
    assert_oracle_equivalence(&store, &matcher, "after arc restore");
    let deltas = matcher.take_deltas();
    let and_delta = deltas.iter().find(|d| d.pattern == AND_PRECOND).unwrap();
    assert_eq!(and_delta.appeared.len(), 4);
    assert!(and_delta.disappeared.is_empty());
}

#[test]
fn attr_change_without_rename_rows_produces_no_deltas() {
    let (store, p, _) = fork_join();
    let matcher = watched_matcher(&store);
    matcher.take_deltas();
    store.set_attr(p[0], NAME, "renamed").unwrap();
    // No trace entries exist, so no rename-mismatch rows can change.
    assert!(matcher.take_deltas().is_empty());
    assert_oracle_equivalence(&store, &matcher, "after rename");
}

#[test]
fn add_then_delete_between_takes_is_a_net_noop() {
    let store = Store::new();
    let matcher = watched_matcher(&store);
    matcher.take_deltas();
    let p = store.create_node(PLACE);
    store.delete_node(p).unwrap();
    assert!(matcher.take_deltas().is_empty());
}

const NODE_TYPES: &[NodeType] = &[
    PLACE, TRANSITION, BASIC, OR_STATE, AND_STATE, HYPER_EDGE, PLACE_TRACE, TRAN_TRACE,
];
const EDGE_KINDS: &[EdgeKind] = &[
    PRE_ARC,
    POST_ARC,
    CONTAINS,
    TRACE_PLACE,
    TRACE_OR,
    TRACE_BASIC,
    TRACE_TRAN,
    TRACE_HEDGE,
];

pub struct FuzzModel {
    pub store: Store,
    nodes: Vec<NodeId>,
    max_nodes: usize,
}

impl FuzzModel {
    pub fn new(max_nodes: usize) -> FuzzModel {
        FuzzModel {
            store: Store::new(),
            nodes: Vec::new(),
            max_nodes,
        }
    }

    fn pick(&self, rng: &mut StdRng) -> Option<NodeId> {
        if self.nodes.is_empty() {
            None
        } else {
            Some(self.nodes[rng.random_range(0..self.nodes.len())])
        }
    }

    /// Applies one random mutation; the vocabulary covers every node type and
    /// edge kind the watched patterns mention, including ill-typed edges.
    pub fn mutate(&mut self, rng: &mut StdRng) {
        match rng.random_range(0..100) {
            0..30 => {
                if self.nodes.len() < self.max_nodes {
                    let ty = NODE_TYPES[rng.random_range(0..NODE_TYPES.len())];
                    let id = self.store.create_node(ty);
                    if rng.random_bool(0.5) {
                        let name = format!("n{}", rng.random_range(0..4));
                        self.store.set_attr(id, NAME, &name).unwrap();
                    }
                    self.nodes.push(id);
                }
            }
            30..42 => {
                if let Some(id) = self.pick(rng) {
                    self.store.delete_node(id).unwrap();
                    self.nodes.retain(|&n| n != id);
                }
            }
            42..72 => {
                if let (Some(a), Some(b)) = (self.pick(rng), self.pick(rng)) {
                    let kind = EDGE_KINDS[rng.random_range(0..EDGE_KINDS.len())];
                    let _ = self.store.add_edge(kind, a, b);
                }
            }
            72..88 => {
                if let (Some(a), Some(b)) = (self.pick(rng), self.pick(rng)) {
                    let kind = EDGE_KINDS[rng.random_range(0..EDGE_KINDS.len())];
                    self.store.remove_edge(kind, a, b);
                }
            }
            _ => {
                if let Some(id) = self.pick(rng) {
                    let name = format!("n{}", rng.random_range(0..4));
                    self.store.set_attr(id, NAME, &name).unwrap();
                }
            }
        }
    }
}

/// Seeded fuzz: smaller than the acceptance-level run but exercising the same
/// oracle equivalence after every single mutation.
#[test]
fn randomized_models_agree_with_reference_after_every_mutation() {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for round in 0..60 {
        let mut model = FuzzModel::new(12);
        // random initial net
        for _ in 0..rng.random_range(0..20) {
            model.mutate(&mut rng);
        }
        let matcher = watched_matcher(&model.store);
        assert_oracle_equivalence(&model.store, &matcher, &format!("round {round} seed"));
        for step in 0..50 {
            model.mutate(&mut rng);
            assert_oracle_equivalence(
                &model.store,
                &matcher,
                &format!("round {round} step {step}"),
            );
        }
    }
}

/// Delta soundness on randomized runs: applying the flushed deltas to the
/// previous match set reproduces the current one, with no spurious sides.
#[test]
fn deltas_apply_cleanly_under_fuzz() {
    use std::collections::BTreeMap;
    use std::collections::BTreeSet;

    let mut rng = StdRng::seed_from_u64(0xd017a);
    for _ in 0..40 {
        let mut model = FuzzModel::new(10);
        let matcher = watched_matcher(&model.store);
        let mut view: BTreeMap<String, BTreeSet<Vec<NodeId>>> = BTreeMap::new();
        for &p in WATCHED {
            view.insert(p.to_string(), BTreeSet::new());
        }
        for _ in 0..60 {
            model.mutate(&mut rng);
            if rng.random_bool(0.3) {
                for delta in matcher.take_deltas() {
                    let set = view.get_mut(&delta.pattern).unwrap();
                    for tuple in delta.disappeared {
                        assert!(set.remove(&tuple), "disappear of absent tuple");
                    }
                    for tuple in delta.appeared {
                        assert!(set.insert(tuple), "appear of present tuple");
                    }
                }
                for &p in WATCHED {
                    assert_eq!(view[p], matcher.current_matches(p).unwrap().tuples);
                }
            }
        }
    }
}
