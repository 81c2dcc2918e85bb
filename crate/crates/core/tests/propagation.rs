//! Change-propagation tests: session lifecycle, the add/dangle/rename rules,
//! inverse-command round trips, and the name-coherence invariant.

mod common;

use common::{fork_join, non_reducible};
use pn2sc_core::eval::eval_reference;
use pn2sc_core::models::{
    validate_statechart, validate_trace, StatechartView, TraceView, BASIC, HYPER_EDGE, NAME,
    OR_STATE, PLACE, TRANSITION,
};
use pn2sc_core::pn2sc::{transform, MatcherKind, TransformOptions};
use pn2sc_core::propagate::{
    propagation_library, ChangeCommand, PropagateError, Session,
};
use pn2sc_core::store::{NodeId, Store};
use pn2sc_core::symbols::SymbolTable;

fn transformed_fork_join() -> (Store, SymbolTable, Option<NodeId>) {
    let (store, p, t) = fork_join();
    let mut symbols = SymbolTable::new();
    for (i, &place) in p.iter().enumerate() {
        symbols.insert(&format!("p{i}"), place);
    }
    symbols.insert("tf", t[0]);
    symbols.insert("tj", t[1]);
    let result = transform(&store, &TransformOptions::default()).unwrap();
    // labels of deleted places drop out of the table
    for id in [p[1], p[2], p[3], t[0], t[1]] {
        if !store.contains(id) {
            symbols.remove_node(id);
        }
    }
    let root = result.root;
    (store, symbols, root)
}

fn open(store: &Store, symbols: &SymbolTable, root: Option<NodeId>) -> Session {
    Session::open(store.clone(), symbols.clone(), root, MatcherKind::Incremental).unwrap()
}

fn assert_cp_fixpoint(store: &Store) {
    let lib = propagation_library();
    for pattern in [
        "untracedPlace",
        "untracedTransition",
        "danglingPlaceTrace",
        "danglingTransitionTrace",
        "placeRenameMismatch",
        "transitionRenameMismatch",
    ] {
        assert!(
            eval_reference(store, pattern, &lib).unwrap().is_empty(),
            "cp pattern {pattern} still matches"
        );
    }
}

fn assert_name_coherence(store: &Store) {
    let trace = TraceView::new(store);
    for p in store.nodes_of(PLACE) {
        let name = store.attr(p, NAME).unwrap_or_default();
        let or = trace.equiv(p).unwrap();
        let basic = trace.basic_of(p).unwrap();
        assert_eq!(store.attr(or, NAME).unwrap_or_default(), name);
        assert_eq!(store.attr(basic, NAME).unwrap_or_default(), name);
    }
    for t in store.nodes_of(TRANSITION) {
        let name = store.attr(t, NAME).unwrap_or_default();
        let h = trace.hedge_of(t).unwrap();
        assert_eq!(store.attr(h, NAME).unwrap_or_default(), name);
    }
}

#[test]
fn open_session_on_fresh_transform_has_empty_agenda() {
    let (store, symbols, root) = transformed_fork_join();
    let session = open(&store, &symbols, root);
    assert!(session.agenda().is_empty());
    assert_cp_fixpoint(&store);
}

#[test]
fn second_session_on_same_store_fails() {
    let (store, symbols, root) = transformed_fork_join();
    let _first = open(&store, &symbols, root);
    let second = Session::open(store.clone(), symbols.clone(), root, MatcherKind::Incremental);
    assert!(matches!(second, Err(PropagateError::SessionExists)));
}

#[test]
fn session_slot_frees_on_drop() {
    let (store, symbols, root) = transformed_fork_join();
    drop(open(&store, &symbols, root));
    let _second = open(&store, &symbols, root);
}

#[test]
fn added_place_gets_or_basic_and_trace() {
    let (store, symbols, root) = transformed_fork_join();
    let mut session = open(&store, &symbols, root);

    // Applying the command makes exactly one cpAdd activation appear.
    let log = session
        .propagate(&[ChangeCommand::AddPlace {
            label: "p9".into(),
            name: "P9".into(),
        }])
        .unwrap();
    assert_eq!(log.len(), 1);
    assert_eq!(log.entries[0].rule, "cpAddPlace");

    let p9 = session.symbols().resolve("p9").unwrap();
    let trace = TraceView::new(&store);
    let or = trace.equiv(p9).unwrap();
    let basic = trace.basic_of(p9).unwrap();
    assert_eq!(store.node_type(or), Some(OR_STATE));
    assert_eq!(store.attr(or, NAME).as_deref(), Some("P9"));
    assert_eq!(store.attr(basic, NAME).as_deref(), Some("P9"));
    // Fresh top-level OR, not merged into the root.
    assert!(StatechartView::new(&store).parent(or).is_none());

    assert_cp_fixpoint(&store);
    assert_name_coherence(&store);
    assert!(validate_statechart(&store).is_empty());
    assert!(validate_trace(&store).is_empty());
}

#[test]
fn added_transition_gets_hyperedge_and_trace() {
    let (store, symbols, root) = transformed_fork_join();
    let mut session = open(&store, &symbols, root);
    let log = session
        .propagate(&[ChangeCommand::AddTransition {
            label: "t9".into(),
            name: "T9".into(),
        }])
        .unwrap();
    assert_eq!(log.entries[0].rule, "cpAddTransition");
    let t9 = session.symbols().resolve("t9").unwrap();
    let h = TraceView::new(&store).hedge_of(t9).unwrap();
    assert_eq!(store.node_type(h), Some(HYPER_EDGE));
    assert_eq!(store.attr(h, NAME).as_deref(), Some("T9"));
    assert_cp_fixpoint(&store);
}

#[test]
fn rename_propagates_to_or_and_basic() {
    let (store, symbols, root) = transformed_fork_join();
    let mut session = open(&store, &symbols, root);
    let log = session
        .propagate(&[ChangeCommand::RenamePlace {
            label: "p0".into(),
            name: "Main".into(),
        }])
        .unwrap();
    assert_eq!(log.len(), 1);
    assert_eq!(log.entries[0].rule, "cpRenamePlace");

    let p0 = session.symbols().resolve("p0").unwrap();
    let trace = TraceView::new(&store);
    assert_eq!(store.attr(trace.equiv(p0).unwrap(), NAME).as_deref(), Some("Main"));
    assert_eq!(store.attr(trace.basic_of(p0).unwrap(), NAME).as_deref(), Some("Main"));
    assert_cp_fixpoint(&store);
    assert_name_coherence(&store);
}

#[test]
fn repeating_a_rename_fires_the_rule_exactly_once() {
    let (store, symbols, root) = transformed_fork_join();
    let mut session = open(&store, &symbols, root);
    let rename = ChangeCommand::RenamePlace {
        label: "p0".into(),
        name: "Main".into(),
    };
    let log = session.propagate(&[rename.clone(), rename]).unwrap();
    assert_eq!(log.count_for("cpRenamePlace"), 1);
}

#[test]
fn transition_rename_propagates_to_hyperedge() {
    // The non-reducible net keeps live transitions after the transform.
    let (store, q, t) = non_reducible();
    let mut symbols = SymbolTable::new();
    symbols.insert("q1", q[0]);
    symbols.insert("q2", q[1]);
    for (i, &tr) in t.iter().enumerate() {
        symbols.insert(&format!("t{}", i + 1), tr);
    }
    let result = transform(&store, &TransformOptions::default()).unwrap();
    let mut session = open(&store, &symbols, result.root);

    let log = session
        .propagate(&[ChangeCommand::RenameTransition {
            label: "t1".into(),
            name: "Loader".into(),
        }])
        .unwrap();
    assert_eq!(log.entries[0].rule, "cpRenameTransition");
    let h = TraceView::new(&store).hedge_of(t[0]).unwrap();
    assert_eq!(store.attr(h, NAME).as_deref(), Some("Loader"));
    assert_cp_fixpoint(&store);
    assert_name_coherence(&store);
}

#[test]
fn add_rename_remove_round_trip_restores_the_statechart() {
    let (store, symbols, root) = transformed_fork_join();
    let before: (Vec<_>, Vec<_>) = (store.all_nodes(), store.all_edges());
    let basic_count = store.nodes_of(BASIC).len();

    let mut session = open(&store, &symbols, root);
    let log = session
        .propagate(&[
            ChangeCommand::AddPlace {
                label: "p9".into(),
                name: "P9".into(),
            },
            ChangeCommand::RenamePlace {
                label: "p9".into(),
                name: "Nine".into(),
            },
            ChangeCommand::RemovePlace {
                label: "p9".into(),
            },
        ])
        .unwrap();
    assert_eq!(log.count_for("cpAddPlace"), 1);
    assert_eq!(log.count_for("cpRenamePlace"), 1);
    assert_eq!(log.count_for("cpDanglePlace"), 1);

    // Everything the script created is gone again.
    let after: (Vec<_>, Vec<_>) = (store.all_nodes(), store.all_edges());
    assert_eq!(before, after);
    assert_eq!(store.nodes_of(BASIC).len(), basic_count);
    assert!(session.symbols().resolve("p9").is_none());
    assert_cp_fixpoint(&store);
    assert_name_coherence(&store);
}

#[test]
fn remove_transition_deletes_its_hyperedge() {
    let (store, q, t) = non_reducible();
    let mut symbols = SymbolTable::new();
    symbols.insert("q1", q[0]);
    symbols.insert("q2", q[1]);
    symbols.insert("t1", t[0]);
    symbols.insert("t2", t[1]);
    symbols.insert("t3", t[2]);
    let result = transform(&store, &TransformOptions::default()).unwrap();
    let h1 = TraceView::new(&store).hedge_of(t[0]).unwrap();

    let mut session = open(&store, &symbols, result.root);
    let log = session
        .propagate(&[ChangeCommand::RemoveTransition { label: "t1".into() }])
        .unwrap();
    assert_eq!(log.entries[0].rule, "cpDangleTransition");
    assert!(!store.contains(h1));
    assert_cp_fixpoint(&store);
}

#[test]
fn unknown_and_duplicate_labels_are_rejected() {
    let (store, symbols, root) = transformed_fork_join();
    let mut session = open(&store, &symbols, root);
    let err = session
        .propagate(&[ChangeCommand::RemovePlace {
            label: "nope".into(),
        }])
        .unwrap_err();
    assert!(matches!(err, PropagateError::UnknownLabel(_)));

    // p1 was merged away during reduction, so its label no longer resolves.
    let err = session
        .propagate(&[ChangeCommand::RenamePlace {
            label: "p1".into(),
            name: "X".into(),
        }])
        .unwrap_err();
    assert!(matches!(err, PropagateError::UnknownLabel(_)));

    let err = session
        .propagate(&[ChangeCommand::AddPlace {
            label: "p0".into(),
            name: "Dup".into(),
        }])
        .unwrap_err();
    assert!(matches!(err, PropagateError::DuplicateLabel(_)));
}

#[test]
fn per_command_hook_sees_each_fixpoint() {
    let (store, symbols, root) = transformed_fork_join();
    let mut session = open(&store, &symbols, root);
    let mut seen = Vec::new();
    session
        .propagate_with(
            &[
                ChangeCommand::AddPlace {
                    label: "x".into(),
                    name: "X".into(),
                },
                ChangeCommand::RenamePlace {
                    label: "x".into(),
                    name: "Y".into(),
                },
            ],
            |session, index, _| {
                assert!(session.agenda().is_empty(), "hook must run at fixpoint");
                assert_cp_fixpoint(session.store());
                seen.push(index);
                Ok(())
            },
        )
        .unwrap();
    assert_eq!(seen, vec![0, 1]);
}

#[test]
fn reference_matcher_session_agrees() {
    let run = |kind: MatcherKind| {
        let (store, symbols, root) = transformed_fork_join();
        let mut session = Session::open(store.clone(), symbols, root, kind).unwrap();
        let log = session
            .propagate(&[
                ChangeCommand::AddPlace {
                    label: "p9".into(),
                    name: "P9".into(),
                },
                ChangeCommand::RenamePlace {
                    label: "p9".into(),
                    name: "Nine".into(),
                },
            ])
            .unwrap();
        let rules: Vec<String> = log.entries.iter().map(|f| f.rule.clone()).collect();
        rules
    };
    assert_eq!(run(MatcherKind::Incremental), run(MatcherKind::Reference));
}
