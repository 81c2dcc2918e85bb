//! Brute-force reference evaluator for the pattern IR.
//!
//! This evaluator defines the semantics: positive constraints enumerate
//! candidate assignments directly against the store, filters are applied to
//! fully-bound assignments, and called patterns are evaluated bottom-up over
//! the acyclic call graph. It is deliberately kept independent of the
//! incremental matcher so the two can be checked against each other.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::pattern::{Body, CallArg, Constraint, MatchSet, Pattern, PatternError, PatternLibrary};
use crate::store::{NodeId, Store};

/// Evaluates every pattern reachable from `roots`, returning all match sets.
pub fn eval_patterns(
    store: &Store,
    lib: &PatternLibrary,
    roots: &[&str],
) -> Result<BTreeMap<String, MatchSet>, PatternError> {
    let order = lib.topo_from(roots)?;
    let mut sets: BTreeMap<String, MatchSet> = BTreeMap::new();
    for name in order {
        let pattern = lib
            .get(&name)
            .ok_or_else(|| PatternError::UnknownPattern(name.clone()))?;
        let set = eval_pattern(store, pattern, &sets);
        sets.insert(name, set);
    }
    Ok(sets)
}

/// Exact match set of one pattern under the reference semantics.
pub fn eval_reference(
    store: &Store,
    name: &str,
    lib: &PatternLibrary,
) -> Result<MatchSet, PatternError> {
    let mut sets = eval_patterns(store, lib, &[name])?;
    sets.remove(name)
        .ok_or_else(|| PatternError::UnknownPattern(name.to_string()))
}

fn eval_pattern(store: &Store, pattern: &Pattern, sets: &BTreeMap<String, MatchSet>) -> MatchSet {
    let mut tuples = BTreeSet::new();
    for body in &pattern.bodies {
        eval_body(store, body, sets, &mut tuples);
    }
    MatchSet {
        pattern: pattern.name.clone(),
        tuples,
    }
}

fn eval_body(
    store: &Store,
    body: &Body,
    sets: &BTreeMap<String, MatchSet>,
    out: &mut BTreeSet<Vec<NodeId>>,
) {
    let positives: Vec<&Constraint> = body.constraints.iter().filter(|c| c.is_positive()).collect();
    let filters: Vec<&Constraint> = body
        .constraints
        .iter()
        .filter(|c| !c.is_positive())
        .collect();
    let mut assignment: Vec<Option<NodeId>> = vec![None; body.var_names.len()];
    extend(store, body, sets, &positives, &filters, &mut assignment, out);
}

fn extend(
    store: &Store,
    body: &Body,
    sets: &BTreeMap<String, MatchSet>,
    positives: &[&Constraint],
    filters: &[&Constraint],
    assignment: &mut Vec<Option<NodeId>>,
    out: &mut BTreeSet<Vec<NodeId>>,
) {
    let Some((first, rest)) = positives.split_first() else {
        if filters.iter().all(|f| filter_ok(store, body, sets, f, assignment)) {
            let tuple: Vec<NodeId> = body
                .param_binding
                .iter()
                .map(|&var| assignment[var].expect("well-formed bodies bind every parameter"))
                .collect();
            out.insert(tuple);
        }
        return;
    };
    match first {
        Constraint::NodeType { var, ty } => match assignment[*var] {
            Some(id) => {
                if store.node_type(id) == Some(*ty) {
                    extend(store, body, sets, rest, filters, assignment, out);
                }
            }
            None => {
                for id in store.nodes_of(*ty) {
                    assignment[*var] = Some(id);
                    extend(store, body, sets, rest, filters, assignment, out);
                }
                assignment[*var] = None;
            }
        },
        Constraint::Edge { kind, src, dst } => match (assignment[*src], assignment[*dst]) {
            (Some(s), Some(d)) => {
                if store.has_edge(*kind, s, d) {
                    extend(store, body, sets, rest, filters, assignment, out);
                }
            }
            (Some(s), None) => {
                for d in store.targets(s, *kind) {
                    assignment[*dst] = Some(d);
                    extend(store, body, sets, rest, filters, assignment, out);
                }
                assignment[*dst] = None;
            }
            (None, Some(d)) => {
                for s in store.sources(d, *kind) {
                    assignment[*src] = Some(s);
                    extend(store, body, sets, rest, filters, assignment, out);
                }
                assignment[*src] = None;
            }
            (None, None) => {
                for (s, d) in store.edges_of(*kind) {
                    if src == dst && s != d {
                        continue;
                    }
                    assignment[*src] = Some(s);
                    assignment[*dst] = Some(d);
                    extend(store, body, sets, rest, filters, assignment, out);
                }
                assignment[*src] = None;
                assignment[*dst] = None;
            }
        },
        Constraint::PosCall { callee, args } => {
            let callee_set = &sets[callee.as_str()];
            let mut touched: Vec<usize> = Vec::new();
            'tuples: for tuple in &callee_set.tuples {
                for t in touched.drain(..) {
                    assignment[t] = None;
                }
                for (pos, &var) in args.iter().enumerate() {
                    match assignment[var] {
                        Some(id) if id == tuple[pos] => {}
                        Some(_) => continue 'tuples,
                        None => {
                            assignment[var] = Some(tuple[pos]);
                            touched.push(var);
                        }
                    }
                }
                extend(store, body, sets, rest, filters, assignment, out);
            }
            for t in touched {
                assignment[t] = None;
            }
        }
        _ => unreachable!("positives contain only generator constraints"),
    }
}

fn filter_ok(
    store: &Store,
    body: &Body,
    sets: &BTreeMap<String, MatchSet>,
    filter: &Constraint,
    assignment: &[Option<NodeId>],
) -> bool {
    match filter {
        Constraint::NegCall { callee, args } => {
            !sets[callee.as_str()]
                .tuples
                .iter()
                .any(|tuple| call_agrees(tuple, args, assignment))
        }
        Constraint::CountCall { .. } => true, // counted below, inside Check
        Constraint::Check(check) => {
            let counts = eval_counts(body, sets, assignment);
            check.eval(&counts)
        }
        Constraint::AttrNeq {
            left,
            left_key,
            right,
            right_key,
        } => {
            let lv = store
                .attr(assignment[*left].unwrap(), left_key)
                .unwrap_or_default();
            let rv = store
                .attr(assignment[*right].unwrap(), right_key)
                .unwrap_or_default();
            lv != rv
        }
        _ => true,
    }
}

fn eval_counts(
    body: &Body,
    sets: &BTreeMap<String, MatchSet>,
    assignment: &[Option<NodeId>],
) -> Vec<i64> {
    let mut counts = vec![0i64; body.count_names.len()];
    for c in &body.constraints {
        if let Constraint::CountCall { callee, args, result } = c {
            counts[*result] = sets[callee.as_str()]
                .tuples
                .iter()
                .filter(|tuple| call_agrees(tuple, args, assignment))
                .count() as i64;
        }
    }
    counts
}

fn call_agrees(tuple: &[NodeId], args: &[CallArg], assignment: &[Option<NodeId>]) -> bool {
    args.iter().enumerate().all(|(pos, arg)| match arg {
        CallArg::Var(var) => assignment[*var] == Some(tuple[pos]),
        CallArg::Any => true,
    })
}
