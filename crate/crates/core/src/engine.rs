//! Rule execution: preconditions paired with imperative actions, an agenda of
//! activations kept in sync through match deltas, and a deterministic firing
//! loop that runs each phase to fixpoint.
//!
//! Conflict resolution is (rule index, lexicographic node-id tuple), lowest
//! first. The selected activation is fired without being removed from the
//! agenda; it leaves the agenda through its own disappear delta, so an action
//! that fails to invalidate its own match is caught by the firing limit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::eval::eval_patterns;
use crate::pattern::{MatchSet, PatternLibrary};
use crate::rete::{Matcher, MatchDelta, MatcherError};
use crate::store::{NodeId, Store};

#[derive(Error, Debug)]
pub enum ActionError {
    #[error("stale match for rule {rule}: {detail}")]
    StaleMatch { rule: String, detail: String },
    #[error("action of rule {rule} failed: {detail}")]
    Failed { rule: String, detail: String },
}

#[derive(Error, Debug)]
pub enum EngineError {
    #[error("firing limit {0} exceeded; the rule set does not terminate")]
    FiringLimitExceeded(u64),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("invariant violated after firing {rule}: {detail}")]
    InvariantViolated { rule: String, detail: String },
    #[error(transparent)]
    Matcher(#[from] MatcherError),
}

pub type ActionFn = dyn Fn(&[NodeId], &Store) -> Result<(), ActionError>;

/// Precondition (a compiled pattern, referenced by name) plus an imperative
/// action. Actions mutate only through the store API so every effect is
/// observable as events.
#[derive(Clone)]
pub struct Rule {
    pub name: String,
    pub precondition: String,
    pub action: Rc<ActionFn>,
}

impl Rule {
    pub fn new(
        name: &str,
        precondition: &str,
        action: impl Fn(&[NodeId], &Store) -> Result<(), ActionError> + 'static,
    ) -> Rule {
        Rule {
            name: name.to_string(),
            precondition: precondition.to_string(),
            action: Rc::new(action),
        }
    }
}

/// Ordered rule list; the list index is the rule priority (0 highest).
#[derive(Clone)]
pub struct Phase {
    pub name: String,
    pub rules: Vec<Rule>,
}

impl Phase {
    pub fn new(name: &str, rules: Vec<Rule>) -> Phase {
        Phase {
            name: name.to_string(),
            rules,
        }
    }

    pub fn precondition_names(&self) -> Vec<&str> {
        self.rules.iter().map(|r| r.precondition.as_str()).collect()
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Firing {
    pub rule: String,
    pub binding: Vec<NodeId>,
}

/// Replayable record of rule firings.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct FiringLog {
    pub entries: Vec<Firing>,
}

impl FiringLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count_for(&self, rule: &str) -> usize {
        self.entries.iter().filter(|f| f.rule == rule).count()
    }

    pub fn extend(&mut self, other: FiringLog) {
        self.entries.extend(other.entries);
    }
}

impl fmt::Display for FiringLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            write!(f, "{} (", e.rule)?;
            for (i, id) in e.binding.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{id}")?;
            }
            writeln!(f, ")")?;
        }
        Ok(())
    }
}

/// Source of match deltas and current matches for the engine; implemented by
/// the incremental matcher and by a recompute-and-diff reference provider.
pub trait MatchProvider {
    fn take_deltas(&mut self) -> Vec<MatchDelta>;
    fn current_matches(&self, pattern: &str) -> Result<MatchSet, MatcherError>;
}

impl MatchProvider for Matcher {
    fn take_deltas(&mut self) -> Vec<MatchDelta> {
        Matcher::take_deltas(self)
    }

    fn current_matches(&self, pattern: &str) -> Result<MatchSet, MatcherError> {
        Matcher::current_matches(self, pattern)
    }
}

/// Non-incremental provider: re-evaluates the registered patterns with the
/// reference evaluator on every flush and diffs against the previous state.
pub struct ReferenceProvider {
    store: Store,
    lib: PatternLibrary,
    registered: Vec<String>,
    last: BTreeMap<String, BTreeSet<Vec<NodeId>>>,
}

impl ReferenceProvider {
    pub fn new(store: &Store, lib: &PatternLibrary, registered: &[&str]) -> ReferenceProvider {
        ReferenceProvider {
            store: store.clone(),
            lib: lib.clone(),
            registered: registered.iter().map(|s| s.to_string()).collect(),
            last: BTreeMap::new(),
        }
    }
}

impl MatchProvider for ReferenceProvider {
    fn take_deltas(&mut self) -> Vec<MatchDelta> {
        let roots: Vec<&str> = self.registered.iter().map(|s| s.as_str()).collect();
        let sets = eval_patterns(&self.store, &self.lib, &roots)
            .expect("registered patterns evaluate");
        let mut out = Vec::new();
        for name in &self.registered {
            let new = sets[name].tuples.clone();
            let old = self.last.entry(name.clone()).or_default();
            let appeared: Vec<_> = new.difference(old).cloned().collect();
            let disappeared: Vec<_> = old.difference(&new).cloned().collect();
            *old = new;
            if !appeared.is_empty() || !disappeared.is_empty() {
                out.push(MatchDelta {
                    pattern: name.clone(),
                    appeared,
                    disappeared,
                });
            }
        }
        out
    }

    fn current_matches(&self, pattern: &str) -> Result<MatchSet, MatcherError> {
        crate::eval::eval_reference(&self.store, pattern, &self.lib)
            .map_err(|_| MatcherError::UnknownPattern(pattern.to_string()))
    }
}

/// Engine configuration for one phase run.
#[derive(Clone)]
pub struct EngineOptions {
    /// Hard bound on firings; exceeding it means the rule set diverges.
    pub limit: u64,
    /// Print one `FIRE <phase>/<rule> (<ids>)` line per firing to stderr.
    pub log_firings: bool,
    /// Invariant hook evaluated after every firing.
    pub after_firing: Option<Rc<dyn Fn(&Store) -> Result<(), String>>>,
}

impl EngineOptions {
    pub fn with_limit(limit: u64) -> EngineOptions {
        EngineOptions {
            limit,
            log_firings: false,
            after_firing: None,
        }
    }
}

/// Activation ordering key: (rule index, binding tuple), lowest first.
type Activation = (usize, Vec<NodeId>);

/// In-progress run of one phase; `step` fires a single activation, `run`
/// drives to fixpoint.
pub struct PhaseRun<'a> {
    phase: &'a Phase,
    store: Store,
    opts: EngineOptions,
    agenda: BTreeSet<Activation>,
    rules_by_pattern: BTreeMap<String, Vec<usize>>,
    log: FiringLog,
    fired: u64,
}

impl<'a> PhaseRun<'a> {
    pub fn new(phase: &'a Phase, store: &Store, opts: EngineOptions) -> PhaseRun<'a> {
        let mut rules_by_pattern: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, rule) in phase.rules.iter().enumerate() {
            rules_by_pattern
                .entry(rule.precondition.clone())
                .or_default()
                .push(i);
        }
        PhaseRun {
            phase,
            store: store.clone(),
            opts,
            agenda: BTreeSet::new(),
            rules_by_pattern,
            log: FiringLog::default(),
            fired: 0,
        }
    }

    fn sync(&mut self, provider: &mut dyn MatchProvider) {
        for delta in provider.take_deltas() {
            let Some(rules) = self.rules_by_pattern.get(&delta.pattern) else {
                continue;
            };
            for &rule in rules {
                for tuple in &delta.disappeared {
                    self.agenda.remove(&(rule, tuple.clone()));
                }
                for tuple in &delta.appeared {
                    self.agenda.insert((rule, tuple.clone()));
                }
            }
        }
    }

    /// Fires the least activation, if any. The activation stays in the agenda
    /// until its own disappear delta removes it.
    pub fn step(
        &mut self,
        provider: &mut dyn MatchProvider,
    ) -> Result<Option<Firing>, EngineError> {
        self.sync(provider);
        let Some((rule_idx, binding)) = self.agenda.iter().next().cloned() else {
            return Ok(None);
        };
        if self.fired >= self.opts.limit {
            return Err(EngineError::FiringLimitExceeded(self.opts.limit));
        }
        self.fired += 1;
        let rule = &self.phase.rules[rule_idx];
        if self.opts.log_firings {
            let ids: Vec<String> = binding.iter().map(|id| id.to_string()).collect();
            eprintln!("FIRE {}/{} ({})", self.phase.name, rule.name, ids.join(", "));
        }
        (rule.action)(&binding, &self.store)?;
        if let Some(hook) = &self.opts.after_firing {
            hook(&self.store).map_err(|detail| EngineError::InvariantViolated {
                rule: rule.name.clone(),
                detail,
            })?;
        }
        let firing = Firing {
            rule: rule.name.clone(),
            binding,
        };
        self.log.entries.push(firing.clone());
        Ok(Some(firing))
    }

    /// Runs to fixpoint: on return no precondition of any rule in the phase
    /// has a match.
    pub fn run(&mut self, provider: &mut dyn MatchProvider) -> Result<(), EngineError> {
        while self.step(provider)?.is_some() {}
        Ok(())
    }

    pub fn into_log(self) -> FiringLog {
        self.log
    }

    pub fn log(&self) -> &FiringLog {
        &self.log
    }
}

/// Runs a phase to fixpoint and returns its firing log.
pub fn run_phase(
    phase: &Phase,
    store: &Store,
    provider: &mut dyn MatchProvider,
    opts: EngineOptions,
) -> Result<FiringLog, EngineError> {
    let mut run = PhaseRun::new(phase, store, opts);
    run.run(provider)?;
    Ok(run.into_log())
}

/// Current activations of a phase in firing order; a pure read computed from
/// current matches rather than the delta stream.
pub fn agenda_snapshot(
    provider: &dyn MatchProvider,
    phase: &Phase,
) -> Result<Vec<(String, Vec<NodeId>)>, MatcherError> {
    let mut agenda: BTreeSet<Activation> = BTreeSet::new();
    for (i, rule) in phase.rules.iter().enumerate() {
        for tuple in provider.current_matches(&rule.precondition)?.tuples {
            agenda.insert((i, tuple));
        }
    }
    Ok(agenda
        .into_iter()
        .map(|(i, tuple)| (phase.rules[i].name.clone(), tuple))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{PLACE, PRE_ARC, TRANSITION};
    use crate::pattern::{any, v, Pattern, PatternLibrary};
    use crate::rete::{compile, Matcher};

    fn lib() -> PatternLibrary {
        let mut lib = PatternLibrary::new();
        lib.add(
            Pattern::builder("prePlaceOf", ["P", "T"])
                .body(|b| {
                    b.edge(PRE_ARC, "P", "T");
                })
                .build(),
        )
        .unwrap();
        lib.add(
            Pattern::builder("fedTransition", ["T"])
                .body(|b| {
                    b.node("T", TRANSITION).find("prePlaceOf", &["P", "T"]);
                })
                .build(),
        )
        .unwrap();
        lib.add(
            Pattern::builder("isolatedPlace", ["P"])
                .body(|b| {
                    b.node("P", PLACE).neg("prePlaceOf", &[v("P"), any()]);
                })
                .build(),
        )
        .unwrap();
        lib
    }

    fn consume_rule() -> Rule {
        // deletes the matched place's arcs, invalidating its own match
        Rule::new("consume", "fedTransition", |binding, store| {
            let t = binding[0];
            for p in store.sources(t, PRE_ARC) {
                store.remove_edge(PRE_ARC, p, t);
            }
            Ok(())
        })
    }

    #[test]
    fn empty_phase_returns_immediately() {
        let store = Store::new();
        let lib = lib();
        let phase = Phase::new("test", vec![consume_rule()]);
        let mut matcher = Matcher::attach(compile(&["fedTransition"], &lib).unwrap(), &store);
        let log = run_phase(&phase, &store, &mut matcher, EngineOptions::with_limit(10)).unwrap();
        assert!(log.is_empty());
    }

    #[test]
    fn runs_to_fixpoint_and_log_is_deterministic() {
        let build = || {
            let store = Store::new();
            let library = lib();
            let p1 = store.create_node(PLACE);
            let p2 = store.create_node(PLACE);
            let t1 = store.create_node(TRANSITION);
            let t2 = store.create_node(TRANSITION);
            store.add_edge(PRE_ARC, p1, t1).unwrap();
            store.add_edge(PRE_ARC, p2, t1).unwrap();
            store.add_edge(PRE_ARC, p1, t2).unwrap();
            let phase = Phase::new("test", vec![consume_rule()]);
            let mut matcher =
                Matcher::attach(compile(&["fedTransition"], &library).unwrap(), &store);
            let log =
                run_phase(&phase, &store, &mut matcher, EngineOptions::with_limit(100)).unwrap();
            assert!(matcher.current_matches("fedTransition").unwrap().is_empty());
            log
        };
        let a = build();
        let b = build();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn non_terminating_rule_hits_firing_limit() {
        let store = Store::new();
        let library = lib();
        let p = store.create_node(PLACE);
        let t = store.create_node(TRANSITION);
        store.add_edge(PRE_ARC, p, t).unwrap();
        // action keeps the match alive
        let stubborn = Rule::new("stubborn", "fedTransition", |_, _| Ok(()));
        let phase = Phase::new("test", vec![stubborn]);
        let mut matcher = Matcher::attach(compile(&["fedTransition"], &library).unwrap(), &store);
        let err =
            run_phase(&phase, &store, &mut matcher, EngineOptions::with_limit(10)).unwrap_err();
        assert!(matches!(err, EngineError::FiringLimitExceeded(10)));
    }

    #[test]
    fn stepping_matches_run_phase() {
        let setup = || {
            let store = Store::new();
            let library = lib();
            let p1 = store.create_node(PLACE);
            let p2 = store.create_node(PLACE);
            let t1 = store.create_node(TRANSITION);
            store.add_edge(PRE_ARC, p1, t1).unwrap();
            store.add_edge(PRE_ARC, p2, t1).unwrap();
            let matcher = Matcher::attach(compile(&["fedTransition"], &library).unwrap(), &store);
            (store, matcher)
        };
        let phase = Phase::new("test", vec![consume_rule()]);

        let (store, mut matcher) = setup();
        let mut stepped = PhaseRun::new(&phase, &store, EngineOptions::with_limit(100));
        while stepped.step(&mut matcher).unwrap().is_some() {}
        let (store2, mut matcher2) = setup();
        let ran = run_phase(&phase, &store2, &mut matcher2, EngineOptions::with_limit(100)).unwrap();
        assert_eq!(stepped.into_log(), ran);
    }

    #[test]
    fn agenda_snapshot_is_ordered_and_stable() {
        let store = Store::new();
        let library = lib();
        let p1 = store.create_node(PLACE);
        let _p2 = store.create_node(PLACE);
        let t1 = store.create_node(TRANSITION);
        store.add_edge(PRE_ARC, p1, t1).unwrap();
        let phase = Phase::new(
            "test",
            vec![
                Rule::new("hi", "fedTransition", |_, _| Ok(())),
                Rule::new("lo", "isolatedPlace", |_, _| Ok(())),
            ],
        );
        let matcher = Matcher::attach(
            compile(&["fedTransition", "isolatedPlace"], &library).unwrap(),
            &store,
        );
        let snap = agenda_snapshot(&matcher, &phase).unwrap();
        let again = agenda_snapshot(&matcher, &phase).unwrap();
        assert_eq!(snap, again);
        assert_eq!(snap[0].0, "hi");
        assert_eq!(snap[1].0, "lo");
        assert_eq!(snap.len(), 2);
    }

    #[test]
    fn reference_provider_matches_incremental() {
        let store = Store::new();
        let library = lib();
        let p1 = store.create_node(PLACE);
        let p2 = store.create_node(PLACE);
        let t1 = store.create_node(TRANSITION);
        store.add_edge(PRE_ARC, p1, t1).unwrap();
        store.add_edge(PRE_ARC, p2, t1).unwrap();

        let phase = Phase::new("test", vec![consume_rule()]);
        let mut reference = ReferenceProvider::new(&store, &library, &["fedTransition"]);
        let log_ref =
            run_phase(&phase, &store, &mut reference, EngineOptions::with_limit(100)).unwrap();

        let store2 = Store::new();
        let q1 = store2.create_node(PLACE);
        let q2 = store2.create_node(PLACE);
        let s1 = store2.create_node(TRANSITION);
        store2.add_edge(PRE_ARC, q1, s1).unwrap();
        store2.add_edge(PRE_ARC, q2, s1).unwrap();
        let mut matcher = Matcher::attach(compile(&["fedTransition"], &library).unwrap(), &store2);
        let log_inc =
            run_phase(&phase, &store2, &mut matcher, EngineOptions::with_limit(100)).unwrap();
        assert_eq!(log_ref, log_inc);
        let _ = (p1, p2, t1);
    }
}
