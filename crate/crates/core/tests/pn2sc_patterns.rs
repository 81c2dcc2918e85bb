//! Oracle tests for the transformation patterns: expected match sets below
//! were derived by hand-enumerating all candidate tuples on the fixtures and
//! are asserted against the brute-force reference evaluator.

mod common;

use common::{chain2, fork_join, non_reducible};
use pn2sc_core::eval::eval_reference;
use pn2sc_core::models::{PLACE, POST_ARC, PRE_ARC, TRANSITION};
use pn2sc_core::pattern::well_formed_library;
use pn2sc_core::pn2sc::{
    and_precondition, or_precondition, transformation_library, AND_PRECOND, OR_PRECOND,
};
use pn2sc_core::propagate::full_library;
use pn2sc_core::rete::compile;
use pn2sc_core::store::{NodeId, Store};

fn tuples(store: &Store, pattern: &str) -> Vec<Vec<NodeId>> {
    eval_reference(store, pattern, &transformation_library())
        .unwrap()
        .tuples
        .into_iter()
        .collect()
}

#[test]
fn libraries_are_well_formed() {
    assert_eq!(well_formed_library(&transformation_library()).unwrap(), vec![]);
    assert_eq!(well_formed_library(&full_library()).unwrap(), vec![]);
}

#[test]
fn and_precondition_matches_fork_join_pairs() {
    let (store, p, t) = fork_join();
    // Hand enumeration: tf qualifies on the post side (p1, p2 share pre set
    // {tf} and post set {tj}), tj on the pre side with the same place pair.
    let expected = vec![
        vec![p[1], t[0]],
        vec![p[1], t[1]],
        vec![p[2], t[0]],
        vec![p[2], t[1]],
    ];
    assert_eq!(tuples(&store, AND_PRECOND), expected);
}

#[test]
fn and_precondition_rejects_single_pre_place_chain() {
    let (store, _, _) = chain2();
    assert!(tuples(&store, AND_PRECOND).is_empty());
}

#[test]
fn and_precondition_rejects_places_with_differing_pre_sets() {
    let (store, _, t) = non_reducible();
    // q1, q2 are fed by different transitions, so the NAC blocks t3.
    assert_eq!(tuples(&store, "nonCommonTPre"), vec![vec![t[2]]]);
    assert!(tuples(&store, AND_PRECOND).is_empty());
}

#[test]
fn removing_one_join_arc_empties_the_and_matches() {
    let (store, p, t) = fork_join();
    store.remove_edge(PRE_ARC, p[1], t[1]);
    // p1 now has no post-transition while p2 still feeds tj, so the post-side
    // NAC fires for tf; tj is left with a single pre-place.
    assert!(tuples(&store, "nonCommonTPre").is_empty());
    assert_eq!(tuples(&store, "nonCommonTPost"), vec![vec![t[0]]]);
    assert!(tuples(&store, AND_PRECOND).is_empty());
}

#[test]
fn or_precondition_matches_plain_chain() {
    let (store, p, t) = chain2();
    assert_eq!(tuples(&store, OR_PRECOND), vec![vec![p[0], t, p[1]]]);
}

#[test]
fn or_precondition_rejects_fork_join_arities() {
    let (store, _, _) = fork_join();
    assert!(tuples(&store, OR_PRECOND).is_empty());
}

#[test]
fn or_precondition_rejects_parallel_transitions() {
    let store = Store::new();
    let p0 = store.create_node(PLACE);
    let p1 = store.create_node(PLACE);
    for _ in 0..2 {
        let t = store.create_node(TRANSITION);
        store.add_edge(PRE_ARC, p0, t).unwrap();
        store.add_edge(POST_ARC, t, p1).unwrap();
    }
    assert!(tuples(&store, OR_PRECOND).is_empty());
}

#[test]
fn or_precondition_rejects_self_loop() {
    let store = Store::new();
    let p = store.create_node(PLACE);
    let t = store.create_node(TRANSITION);
    store.add_edge(PRE_ARC, p, t).unwrap();
    store.add_edge(POST_ARC, t, p).unwrap();
    assert!(tuples(&store, OR_PRECOND).is_empty());
}

#[test]
fn or_precondition_rejects_reverse_link() {
    // p0 → t → p1 plus p1 → t2 → p0: merging would lose the cycle.
    let (store, p, _) = chain2();
    let t2 = store.create_node(TRANSITION);
    store.add_edge(PRE_ARC, p[1], t2).unwrap();
    store.add_edge(POST_ARC, t2, p[0]).unwrap();
    assert!(tuples(&store, OR_PRECOND).is_empty());
}

#[test]
fn and_pre_side_symmetry_every_pre_place_matches() {
    // When (P, T) matches on the pre side, all pre-places of T match: the
    // NAC requires every pre-place pair to share pre/post sets.
    let (store, _, t) = fork_join();
    let matches = eval_reference(&store, AND_PRECOND, &transformation_library()).unwrap();
    for tr in [t[0], t[1]] {
        let pre: Vec<NodeId> = store.sources(tr, PRE_ARC);
        let matched: Vec<NodeId> = matches
            .tuples
            .iter()
            .filter(|tup| tup[1] == tr)
            .map(|tup| tup[0])
            .collect();
        if pre.len() >= 2 && pre.iter().all(|&q| matched.contains(&q)) {
            for q in pre {
                assert!(matches.contains(&[q, tr]));
            }
        }
    }
}

#[test]
fn compiled_and_library_contains_count_and_anti_join_nodes() {
    let net = compile(&[AND_PRECOND], &transformation_library()).unwrap();
    let stats = net.stats();
    assert!(stats.count_joins >= 1, "expected a count node: {stats:?}");
    assert!(stats.anti_joins >= 1, "expected an anti-join node: {stats:?}");
}

#[test]
fn shared_subpatterns_compile_once_with_multiple_consumers() {
    let net = compile(&[AND_PRECOND, OR_PRECOND], &transformation_library()).unwrap();
    // prePlaceOf is counted by both preconditions and negatively called from
    // one body of each NAC pattern: one sub-network, four consumers.
    assert_eq!(net.consumers_of("prePlaceOf"), 4);
    // tranWithTwoPrePlaces feeds both or-ed bodies of nonCommonTPre.
    assert_eq!(net.consumers_of("tranWithTwoPrePlaces"), 2);
}

#[test]
fn and_precondition_dump_golden() {
    let expected = "\
pattern andPrecond(P, T)
  body
    edge preArc(P, T)
    count countPrePlaces = prePlaceOf(_, T)
    check countPrePlaces >= 2
    neg nonCommonTPre(T)
  body
    edge postArc(T, P)
    count countPostPlaces = postPlaceOf(T, _)
    check countPostPlaces >= 2
    neg nonCommonTPost(T)
";
    assert_eq!(and_precondition().dump(), expected);
}

#[test]
fn or_precondition_dump_golden() {
    let expected = "\
pattern orPrecond(Q, T, R)
  body
    edge preArc(Q, T)
    edge postArc(T, R)
    neg samePlace(Q, R)
    count c1 = prePlaceOf(_, T)
    check c1 == 1
    count c2 = postPlaceOf(T, _)
    check c2 == 1
    count cForward = linkVia(Q, R, _)
    check cForward == 1
    neg linkVia(R, Q, _)
";
    assert_eq!(or_precondition().dump(), expected);
}

#[test]
fn eval_is_order_insensitive_for_and_precondition() {
    // Same semantics with the constraint list of each body reversed.
    use pn2sc_core::pattern::Pattern;
    let (store, _, _) = fork_join();
    let lib = transformation_library();
    let baseline = eval_reference(&store, AND_PRECOND, &lib).unwrap();

    let mut permuted_lib = pn2sc_core::pattern::PatternLibrary::new();
    for name in lib.names() {
        let mut p: Pattern = lib.get(name).unwrap().clone();
        for body in &mut p.bodies {
            body.constraints.reverse();
        }
        permuted_lib.add(p).unwrap();
    }
    let permuted = eval_reference(&store, AND_PRECOND, &permuted_lib).unwrap();
    assert_eq!(baseline.tuples, permuted.tuples);

    // The incremental matcher accepts the permuted bodies as well.
    let net = compile(&[AND_PRECOND], &permuted_lib).unwrap();
    let matcher = pn2sc_core::rete::Matcher::attach(net, &store);
    assert_eq!(
        matcher.current_matches(AND_PRECOND).unwrap().tuples,
        baseline.tuples
    );
}
