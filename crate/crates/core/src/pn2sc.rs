//! The Petri-net-to-statechart transformation: initialization mapping, the
//! AND and OR reduction rules, termination, and the end-to-end pipeline.
//!
//! Reduction destructs the net: the AND rule merges all pre-places (or
//! post-places) of a transition that share identical pre- and post-transition
//! sets into an AND state, the OR rule contracts a place–transition–place
//! chain whose transition has single pre- and post-places. Places' mapped OR
//! states are only ever re-parented; Basic states and hyperedges created at
//! initialization are never deleted by reduction.

use std::time::Instant;

use thiserror::Error;

use crate::engine::{
    run_phase, ActionError, EngineError, EngineOptions, MatchProvider, Phase, ReferenceProvider,
    Rule,
};
use crate::engine::FiringLog;
use crate::models::{
    model_size, PetriNetView, StatechartView, TraceView, AND_STATE, BASIC, CONTAINS, HYPER_EDGE,
    H_SOURCE, H_TARGET, NAME, OR_STATE, PLACE, PLACE_TRACE, POST_ARC, PRE_ARC, TRACE_BASIC,
    TRACE_HEDGE, TRACE_OR, TRACE_PLACE, TRACE_TRAN, TRAN_TRACE,
};
use crate::pattern::{any, v, CmpOp, Pattern, PatternLibrary};
use crate::rete::{compile, CompileError, Matcher};
use crate::store::{NodeId, Store};

pub const AND_PRECOND: &str = "andPrecond";
pub const OR_PRECOND: &str = "orPrecond";

#[derive(Error, Debug)]
pub enum TransformError {
    #[error("store already holds trace entries; initialization must run on a fresh model")]
    AlreadyInitialized,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum MatcherKind {
    #[default]
    Incremental,
    Reference,
}

#[derive(Clone, Default)]
pub struct TransformOptions {
    pub matcher: MatcherKind,
    /// Overrides the default firing limit of 10 × initial model size.
    pub max_firings: Option<u64>,
    /// Print one line per firing to stderr.
    pub log_firings: bool,
    /// Validate statechart and trace after every firing (slow; for tests).
    pub validate_each_firing: bool,
}

/// Outcome summary of a transformation run.
#[derive(Clone, PartialEq, Debug)]
pub struct TransformResult {
    pub place_count: usize,
    pub transition_count: usize,
    pub root: Option<NodeId>,
    pub top_level: Vec<NodeId>,
    /// True exactly when the reduced net is a single place with no
    /// transitions, in which case `root` is set.
    pub reducible: bool,
    pub firing_log: FiringLog,
    pub read_seconds: f64,
    pub transform_seconds: f64,
}

// ---- patterns -----------------------------------------------------------------

/// `prePlaceOf(P, T)`: place P feeds transition T.
pub fn pre_place_of() -> Pattern {
    Pattern::builder("prePlaceOf", ["P", "T"])
        .body(|b| {
            b.edge(PRE_ARC, "P", "T");
        })
        .build()
}

/// `postPlaceOf(T, P)`: transition T feeds place P.
pub fn post_place_of() -> Pattern {
    Pattern::builder("postPlaceOf", ["T", "P"])
        .body(|b| {
            b.edge(POST_ARC, "T", "P");
        })
        .build()
}

fn tran_with_two_pre_places() -> Pattern {
    Pattern::builder("tranWithTwoPrePlaces", ["T", "P1", "P2"])
        .body(|b| {
            b.edge(PRE_ARC, "P1", "T").edge(PRE_ARC, "P2", "T");
        })
        .build()
}

fn tran_with_two_post_places() -> Pattern {
    Pattern::builder("tranWithTwoPostPlaces", ["T", "P1", "P2"])
        .body(|b| {
            b.edge(POST_ARC, "T", "P1").edge(POST_ARC, "T", "P2");
        })
        .build()
}

/// `nonCommonTPre(T)`: two pre-places of T differ in their post-transitions
/// (first body) or their pre-transitions (second body); the AND rule's
/// negative application condition on the pre side.
pub fn non_common_t_pre() -> Pattern {
    Pattern::builder("nonCommonTPre", ["T"])
        .body(|b| {
            b.find("tranWithTwoPrePlaces", &["T", "P1", "P2"])
                .edge(PRE_ARC, "P1", "TX")
                .neg("prePlaceOf", &[v("P2"), v("TX")]);
        })
        .body(|b| {
            b.find("tranWithTwoPrePlaces", &["T", "P1", "P2"])
                .edge(POST_ARC, "TX", "P1")
                .neg("postPlaceOf", &[v("TX"), v("P2")]);
        })
        .build()
}

/// Symmetric NAC over the post-places of T.
pub fn non_common_t_post() -> Pattern {
    Pattern::builder("nonCommonTPost", ["T"])
        .body(|b| {
            b.find("tranWithTwoPostPlaces", &["T", "P1", "P2"])
                .edge(PRE_ARC, "P1", "TX")
                .neg("prePlaceOf", &[v("P2"), v("TX")]);
        })
        .body(|b| {
            b.find("tranWithTwoPostPlaces", &["T", "P1", "P2"])
                .edge(POST_ARC, "TX", "P1")
                .neg("postPlaceOf", &[v("TX"), v("P2")]);
        })
        .build()
}

/// Identity pattern over places: matches (p, p) for every place p. Calling it
/// negatively encodes a distinctness constraint.
pub fn same_place() -> Pattern {
    Pattern::builder("samePlace", ["X", "Y"])
        .body(|b| {
            b.bind_param("Y", "X");
            b.node("X", PLACE);
        })
        .build()
}

/// `linkVia(A, B, TX)`: some transition TX leads from place A to place B.
fn link_via() -> Pattern {
    Pattern::builder("linkVia", ["A", "B", "TX"])
        .body(|b| {
            b.edge(PRE_ARC, "A", "TX").edge(POST_ARC, "TX", "B");
        })
        .build()
}

/// AND-rule precondition: (P, T) such that T has at least two pre-places (or
/// post-places) which all share identical pre- and post-transition sets, with
/// P one of them.
pub fn and_precondition() -> Pattern {
    Pattern::builder(AND_PRECOND, ["P", "T"])
        .body(|b| {
            b.edge(PRE_ARC, "P", "T")
                .count("countPrePlaces", "prePlaceOf", &[any(), v("T")])
                .check_const("countPrePlaces", CmpOp::Ge, 2)
                .neg("nonCommonTPre", &[v("T")]);
        })
        .body(|b| {
            b.edge(POST_ARC, "T", "P")
                .count("countPostPlaces", "postPlaceOf", &[v("T"), any()])
                .check_const("countPostPlaces", CmpOp::Ge, 2)
                .neg("nonCommonTPost", &[v("T")]);
        })
        .build()
}

/// OR-rule precondition: (Q, T, R) with pre(T) = {Q}, post(T) = {R}, Q ≠ R,
/// T the only transition from Q to R, and no transition from R back to Q.
pub fn or_precondition() -> Pattern {
    Pattern::builder(OR_PRECOND, ["Q", "T", "R"])
        .body(|b| {
            b.edge(PRE_ARC, "Q", "T")
                .edge(POST_ARC, "T", "R")
                .neg("samePlace", &[v("Q"), v("R")])
                .count("c1", "prePlaceOf", &[any(), v("T")])
                .check_const("c1", CmpOp::Eq, 1)
                .count("c2", "postPlaceOf", &[v("T"), any()])
                .check_const("c2", CmpOp::Eq, 1)
                .count("cForward", "linkVia", &[v("Q"), v("R"), any()])
                .check_const("cForward", CmpOp::Eq, 1)
                .neg("linkVia", &[v("R"), v("Q"), any()]);
        })
        .build()
}

/// Pattern library of the reduction phase.
pub fn transformation_library() -> PatternLibrary {
    let mut lib = PatternLibrary::new();
    for p in [
        pre_place_of(),
        post_place_of(),
        tran_with_two_pre_places(),
        tran_with_two_post_places(),
        non_common_t_pre(),
        non_common_t_post(),
        same_place(),
        link_via(),
        and_precondition(),
        or_precondition(),
    ] {
        lib.add(p).expect("library patterns have unique names");
    }
    lib
}

// ---- initialization -----------------------------------------------------------

/// Maps one place: Basic inside OR, names copied, trace entry created.
/// Shared by initialization and by the change-propagation add rule.
pub fn map_place(store: &Store, p: NodeId) -> (NodeId, NodeId) {
    let basic = store.create_node(BASIC);
    let or = store.create_node(OR_STATE);
    if let Some(name) = store.attr(p, NAME) {
        store.set_attr(basic, NAME, &name).unwrap();
        store.set_attr(or, NAME, &name).unwrap();
    }
    store.add_edge(CONTAINS, or, basic).unwrap();
    let tr = store.create_node(PLACE_TRACE);
    store.add_edge(TRACE_PLACE, tr, p).unwrap();
    store.add_edge(TRACE_OR, tr, or).unwrap();
    store.add_edge(TRACE_BASIC, tr, basic).unwrap();
    (or, basic)
}

/// Maps one transition: hyperedge named after it, sources and targets wired
/// to the Basic states of its pre- and post-places, trace entry created.
pub fn map_transition(store: &Store, t: NodeId) -> NodeId {
    let trace = TraceView::new(store);
    let net = PetriNetView::new(store);
    let h = store.create_node(HYPER_EDGE);
    if let Some(name) = store.attr(t, NAME) {
        store.set_attr(h, NAME, &name).unwrap();
    }
    for q in net.pre(t) {
        if let Some(b) = trace.basic_of(q) {
            store.add_edge(H_SOURCE, h, b).unwrap();
        }
    }
    for r in net.post(t) {
        if let Some(b) = trace.basic_of(r) {
            store.add_edge(H_TARGET, h, b).unwrap();
        }
    }
    let tr = store.create_node(TRAN_TRACE);
    store.add_edge(TRACE_TRAN, tr, t).unwrap();
    store.add_edge(TRACE_HEDGE, tr, h).unwrap();
    h
}

/// Initialization phase: per place a Basic inside an OR plus a trace entry,
/// per transition a hyperedge over the places' Basic states.
pub fn initialize(store: &Store) -> Result<(), TransformError> {
    if !store.nodes_of(PLACE_TRACE).is_empty() || !store.nodes_of(TRAN_TRACE).is_empty() {
        return Err(TransformError::AlreadyInitialized);
    }
    let net = PetriNetView::new(store);
    for p in net.places() {
        map_place(store, p);
    }
    for t in net.transitions() {
        map_transition(store, t);
    }
    Ok(())
}

// ---- actions ------------------------------------------------------------------

fn stale(rule: &str, detail: String) -> ActionError {
    ActionError::StaleMatch {
        rule: rule.to_string(),
        detail,
    }
}

/// All places in `set` share identical pre- and post-transition sets.
fn places_mergeable(store: &Store, set: &[NodeId]) -> bool {
    if set.len() < 2 {
        return false;
    }
    let net = PetriNetView::new(store);
    let pre0 = net.pre_transitions(set[0]);
    let post0 = net.post_transitions(set[0]);
    set[1..]
        .iter()
        .all(|&p| net.pre_transitions(p) == pre0 && net.post_transitions(p) == post0)
}

fn detach_from_parent(store: &Store, state: NodeId) {
    for parent in store.sources(state, CONTAINS) {
        store.remove_edge(CONTAINS, parent, state);
    }
}

fn delete_place_trace(store: &Store, p: NodeId) {
    for tr in store.sources(p, TRACE_PLACE) {
        store.delete_node(tr).unwrap();
    }
}

fn delete_transition_trace(store: &Store, t: NodeId) {
    for tr in store.sources(t, TRACE_TRAN) {
        store.delete_node(tr).unwrap();
    }
}

/// AND action for a match (P, T): merge all pre-places (or post-places) of T
/// under a new AND state, keep P as the surviving place mapped to a fresh OR
/// around the AND, and delete the other merged places from the net.
pub fn and_action(binding: &[NodeId], store: &Store) -> Result<(), ActionError> {
    let (p, t) = (binding[0], binding[1]);
    if !store.contains(p) || !store.contains(t) {
        return Err(stale("and", format!("node {p} or {t} is gone")));
    }
    let net = PetriNetView::new(store);
    let pre = net.pre(t);
    let post = net.post(t);
    // The pre side wins when P qualifies on both sides.
    let place_set = if pre.contains(&p) && places_mergeable(store, &pre) {
        pre
    } else if post.contains(&p) && places_mergeable(store, &post) {
        post
    } else {
        return Err(stale("and", format!("({p}, {t}) no longer mergeable")));
    };

    let trace = TraceView::new(store);
    let and = store.create_node(AND_STATE);
    let or = store.create_node(OR_STATE);
    if let Some(name) = store.attr(p, NAME) {
        store.set_attr(and, NAME, &name).unwrap();
        store.set_attr(or, NAME, &name).unwrap();
    }
    store.add_edge(CONTAINS, or, and).unwrap();

    for &q in &place_set {
        let equiv = trace
            .equiv(q)
            .ok_or_else(|| stale("and", format!("place {q} has no trace")))?;
        detach_from_parent(store, equiv);
        store.add_edge(CONTAINS, and, equiv).unwrap();
    }

    let basic = trace
        .basic_of(p)
        .ok_or_else(|| stale("and", format!("place {p} has no basic state")))?;
    delete_place_trace(store, p);
    let tr = store.create_node(PLACE_TRACE);
    store.add_edge(TRACE_PLACE, tr, p).unwrap();
    store.add_edge(TRACE_OR, tr, or).unwrap();
    store.add_edge(TRACE_BASIC, tr, basic).unwrap();

    for &q in &place_set {
        if q == p {
            continue;
        }
        delete_place_trace(store, q);
        store.delete_node(q).unwrap();
    }
    Ok(())
}

/// OR action for a match (Q, T, R): fuse R's OR into Q's, redirect R's other
/// arcs to Q, and delete T and R from the net. R's trace goes, T's hyperedge
/// stays.
pub fn or_action(binding: &[NodeId], store: &Store) -> Result<(), ActionError> {
    let (q, t, r) = (binding[0], binding[1], binding[2]);
    if !store.contains(q) || !store.contains(t) || !store.contains(r) {
        return Err(stale("or", "an endpoint is gone".to_string()));
    }
    if q == r || !store.has_edge(PRE_ARC, q, t) || !store.has_edge(POST_ARC, t, r) {
        return Err(stale("or", format!("({q}, {t}, {r}) is not a chain")));
    }
    let trace = TraceView::new(store);
    let equiv_q = trace
        .equiv(q)
        .ok_or_else(|| stale("or", format!("place {q} has no trace")))?;
    let equiv_r = trace
        .equiv(r)
        .ok_or_else(|| stale("or", format!("place {r} has no trace")))?;

    for child in store.targets(equiv_r, CONTAINS) {
        store.remove_edge(CONTAINS, equiv_r, child);
        store.add_edge(CONTAINS, equiv_q, child).unwrap();
    }
    store.delete_node(equiv_r).unwrap();
    delete_place_trace(store, r);

    let net = PetriNetView::new(store);
    for t2 in net.pre_transitions(r) {
        if t2 != t {
            store.add_edge(POST_ARC, t2, q).unwrap();
        }
    }
    for t2 in net.post_transitions(r) {
        store.add_edge(PRE_ARC, q, t2).unwrap();
    }

    delete_transition_trace(store, t);
    store.delete_node(t).unwrap();
    store.delete_node(r).unwrap();
    Ok(())
}

/// The reduction phase: AND before OR.
pub fn reduction_phase() -> Phase {
    Phase::new(
        "reduction",
        vec![
            Rule::new("and", AND_PRECOND, and_action),
            Rule::new("or", OR_PRECOND, or_action),
        ],
    )
}

// ---- termination ---------------------------------------------------------------

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Termination {
    pub root: Option<NodeId>,
    pub top_level: Vec<NodeId>,
    pub reducible: bool,
}

/// Termination phase: the single remaining top-level state becomes the root
/// when the net reduced to one place and no transitions; otherwise the top
/// elements are reported and no root is designated.
pub fn terminate(store: &Store) -> Termination {
    let top_level = StatechartView::new(store).top_level();
    let net = PetriNetView::new(store);
    let reducible = net.places().len() == 1 && net.transitions().is_empty();
    let root = if reducible && top_level.len() == 1 {
        Some(top_level[0])
    } else {
        None
    };
    Termination {
        root,
        top_level,
        reducible: root.is_some(),
    }
}

// ---- pipeline ------------------------------------------------------------------

fn invariant_hook(store: &Store) -> Result<(), String> {
    let violations = crate::models::validate_statechart(store);
    if !violations.is_empty() {
        return Err(format!("statechart invalid: {}", violations[0]));
    }
    let violations = crate::models::validate_trace(store);
    if !violations.is_empty() {
        return Err(format!("trace invalid: {}", violations[0]));
    }
    Ok(())
}

/// Runs initialization, the reduction phase to fixpoint, and termination over
/// an already-parsed net in `store`. `read_seconds` is left at zero; callers
/// that parse from files fill it in.
pub fn transform(store: &Store, opts: &TransformOptions) -> Result<TransformResult, TransformError> {
    let started = Instant::now();
    let limit = opts
        .max_firings
        .unwrap_or_else(|| 10 * model_size(store).max(1) as u64);

    initialize(store)?;

    let lib = transformation_library();
    let phase = reduction_phase();
    let engine_opts = EngineOptions {
        limit,
        log_firings: opts.log_firings,
        after_firing: opts
            .validate_each_firing
            .then(|| std::rc::Rc::new(invariant_hook) as std::rc::Rc<dyn Fn(&Store) -> Result<(), String>>),
    };

    let firing_log = match opts.matcher {
        MatcherKind::Incremental => {
            let network = compile(&[AND_PRECOND, OR_PRECOND], &lib)?;
            let mut matcher = Matcher::attach(network, store);
            run_phase(&phase, store, &mut matcher, engine_opts)?
        }
        MatcherKind::Reference => {
            let mut provider = ReferenceProvider::new(store, &lib, &[AND_PRECOND, OR_PRECOND]);
            run_phase(&phase, store, &mut provider, engine_opts)?
        }
    };

    let termination = terminate(store);
    let net = PetriNetView::new(store);
    Ok(TransformResult {
        place_count: net.places().len(),
        transition_count: net.transitions().len(),
        root: termination.root,
        top_level: termination.top_level,
        reducible: termination.reducible,
        firing_log,
        read_seconds: 0.0,
        transform_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Convenience wrapper bundling the store a transformation ran on with its
/// result.
pub struct Transformed {
    pub store: Store,
    pub result: TransformResult,
}

impl MatchProvider for Box<dyn MatchProvider> {
    fn take_deltas(&mut self) -> Vec<crate::rete::MatchDelta> {
        (**self).take_deltas()
    }

    fn current_matches(
        &self,
        pattern: &str,
    ) -> Result<crate::pattern::MatchSet, crate::rete::MatcherError> {
        (**self).current_matches(pattern)
    }
}
