//! Declarative precondition IR: patterns with disjunctive bodies over
//! node-type, edge, call, count, check, and attribute constraints.
//!
//! Patterns are immutable after construction and built through
//! [`PatternBuilder`]. A pattern matches a parameter tuple when at least one
//! body has an extension of its local variables satisfying every constraint.
//! Negative calls introduce existential positions (`Any`) scoped to the call;
//! count calls bind an integer result usable only in check expressions.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::store::{EdgeKind, NodeId, NodeType};

/// Index into a body's variable list.
pub type VarId = usize;
/// Index into a body's count-variable list.
pub type CountId = usize;

/// Argument of a negative or counting call: a bound caller variable or an
/// existential position enumerated by the callee.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CallArg {
    Var(VarId),
    Any,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl CmpOp {
    fn apply(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// Sum of count variables (with ±1 style integer coefficients) plus a
/// constant. The check language is restricted to linear integer comparisons.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct LinearExpr {
    pub terms: Vec<(i64, CountId)>,
    pub constant: i64,
}

impl LinearExpr {
    pub fn count(c: CountId) -> Self {
        LinearExpr {
            terms: vec![(1, c)],
            constant: 0,
        }
    }

    pub fn constant(v: i64) -> Self {
        LinearExpr {
            terms: Vec::new(),
            constant: v,
        }
    }

    pub fn eval(&self, counts: &[i64]) -> i64 {
        self.terms
            .iter()
            .map(|&(coeff, c)| coeff * counts[c])
            .sum::<i64>()
            + self.constant
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CheckExpr {
    pub lhs: LinearExpr,
    pub op: CmpOp,
    pub rhs: LinearExpr,
}

impl CheckExpr {
    pub fn eval(&self, counts: &[i64]) -> bool {
        self.op.apply(self.lhs.eval(counts), self.rhs.eval(counts))
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Constraint {
    NodeType {
        var: VarId,
        ty: NodeType,
    },
    Edge {
        kind: EdgeKind,
        src: VarId,
        dst: VarId,
    },
    PosCall {
        callee: String,
        args: Vec<VarId>,
    },
    NegCall {
        callee: String,
        args: Vec<CallArg>,
    },
    CountCall {
        callee: String,
        args: Vec<CallArg>,
        result: CountId,
    },
    Check(CheckExpr),
    /// Satisfied when the two attribute values differ; an unset attribute
    /// compares equal to the empty string.
    AttrNeq {
        left: VarId,
        left_key: String,
        right: VarId,
        right_key: String,
    },
}

impl Constraint {
    /// True for the constraints that bind variables (generators).
    pub fn is_positive(&self) -> bool {
        matches!(
            self,
            Constraint::NodeType { .. } | Constraint::Edge { .. } | Constraint::PosCall { .. }
        )
    }

    /// Variables bound when the constraint is positive.
    pub fn bound_vars(&self) -> Vec<VarId> {
        match self {
            Constraint::NodeType { var, .. } => vec![*var],
            Constraint::Edge { src, dst, .. } => vec![*src, *dst],
            Constraint::PosCall { args, .. } => args.clone(),
            _ => Vec::new(),
        }
    }

    /// Variables the constraint reads (must be bound elsewhere in the body).
    pub fn used_vars(&self) -> Vec<VarId> {
        match self {
            Constraint::NegCall { args, .. } | Constraint::CountCall { args, .. } => args
                .iter()
                .filter_map(|a| match a {
                    CallArg::Var(v) => Some(*v),
                    CallArg::Any => None,
                })
                .collect(),
            Constraint::AttrNeq { left, right, .. } => vec![*left, *right],
            _ => Vec::new(),
        }
    }
}

/// One disjunct of a pattern. Parameters are bound per body through
/// `param_binding`, which allows two parameters to share one variable (the
/// identity-pattern encoding used for distinctness checks).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Body {
    pub var_names: Vec<String>,
    pub count_names: Vec<String>,
    pub param_binding: Vec<VarId>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Pattern {
    pub name: String,
    pub params: Vec<String>,
    pub bodies: Vec<Body>,
}

impl Pattern {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn builder<I, S>(name: &str, params: I) -> PatternBuilder
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        PatternBuilder::new(name, params)
    }

    /// Stable one-constraint-per-line dump, used by golden tests.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "pattern {}({})", self.name, self.params.join(", "));
        for body in &self.bodies {
            let _ = writeln!(out, "  body");
            for (i, param) in self.params.iter().enumerate() {
                let var = body.param_binding[i];
                let bound = &body.var_names[var];
                if bound != param {
                    let _ = writeln!(out, "    bind {param} = {bound}");
                }
            }
            for c in &body.constraints {
                let v = |id: VarId| body.var_names[id].clone();
                let arg = |a: &CallArg| match a {
                    CallArg::Var(id) => v(*id),
                    CallArg::Any => "_".to_string(),
                };
                let expr = |e: &LinearExpr| {
                    let mut s = String::new();
                    for (i, (coeff, c)) in e.terms.iter().enumerate() {
                        let name = &body.count_names[*c];
                        match (*coeff, i) {
                            (1, 0) => {
                                let _ = write!(s, "{name}");
                            }
                            (1, _) => {
                                let _ = write!(s, " + {name}");
                            }
                            (-1, 0) => {
                                let _ = write!(s, "-{name}");
                            }
                            (-1, _) => {
                                let _ = write!(s, " - {name}");
                            }
                            (k, 0) => {
                                let _ = write!(s, "{k}*{name}");
                            }
                            (k, _) => {
                                let _ = write!(s, " + {k}*{name}");
                            }
                        }
                    }
                    if e.constant != 0 || e.terms.is_empty() {
                        if e.terms.is_empty() {
                            let _ = write!(s, "{}", e.constant);
                        } else if e.constant > 0 {
                            let _ = write!(s, " + {}", e.constant);
                        } else {
                            let _ = write!(s, " - {}", -e.constant);
                        }
                    }
                    s
                };
                let line = match c {
                    Constraint::NodeType { var, ty } => format!("type {}: {ty}", v(*var)),
                    Constraint::Edge { kind, src, dst } => {
                        format!("edge {kind}({}, {})", v(*src), v(*dst))
                    }
                    Constraint::PosCall { callee, args } => format!(
                        "find {callee}({})",
                        args.iter().map(|&a| v(a)).collect::<Vec<_>>().join(", ")
                    ),
                    Constraint::NegCall { callee, args } => format!(
                        "neg {callee}({})",
                        args.iter().map(arg).collect::<Vec<_>>().join(", ")
                    ),
                    Constraint::CountCall {
                        callee,
                        args,
                        result,
                    } => format!(
                        "count {} = {callee}({})",
                        body.count_names[*result],
                        args.iter().map(arg).collect::<Vec<_>>().join(", ")
                    ),
                    Constraint::Check(check) => {
                        format!(
                            "check {} {} {}",
                            expr(&check.lhs),
                            check.op.symbol(),
                            expr(&check.rhs)
                        )
                    }
                    Constraint::AttrNeq {
                        left,
                        left_key,
                        right,
                        right_key,
                    } => format!(
                        "attr-neq {}.{left_key} != {}.{right_key}",
                        v(*left),
                        v(*right)
                    ),
                };
                let _ = writeln!(out, "    {line}");
            }
        }
        out
    }
}

/// Set of parameter tuples currently satisfying a pattern.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MatchSet {
    pub pattern: String,
    pub tuples: BTreeSet<Vec<NodeId>>,
}

impl MatchSet {
    pub fn empty(pattern: &str) -> Self {
        MatchSet {
            pattern: pattern.to_string(),
            tuples: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, tuple: &[NodeId]) -> bool {
        self.tuples.contains(tuple)
    }
}

impl fmt::Display for MatchSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {{", self.pattern)?;
        for (i, t) in self.tuples.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "(")?;
            for (j, id) in t.iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{id}")?;
            }
            write!(f, ")")?;
        }
        write!(f, "}}")
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum PatternError {
    #[error("unknown pattern {0:?}")]
    UnknownPattern(String),
    #[error("duplicate pattern {0:?}")]
    DuplicatePattern(String),
    #[error("arity mismatch calling {callee:?}: got {got}, expected {expected}")]
    ArityMismatch {
        callee: String,
        got: usize,
        expected: usize,
    },
}

/// Named collection of patterns; the call graph over a library must be
/// acyclic.
#[derive(Clone, Default, Debug)]
pub struct PatternLibrary {
    patterns: BTreeMap<String, Pattern>,
}

impl PatternLibrary {
    pub fn new() -> Self {
        PatternLibrary::default()
    }

    pub fn add(&mut self, pattern: Pattern) -> Result<(), PatternError> {
        if self.patterns.contains_key(&pattern.name) {
            return Err(PatternError::DuplicatePattern(pattern.name));
        }
        self.patterns.insert(pattern.name.clone(), pattern);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Pattern> {
        self.patterns.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.patterns.keys().map(|s| s.as_str())
    }

    pub fn merge(&mut self, other: PatternLibrary) -> Result<(), PatternError> {
        for (_, p) in other.patterns {
            self.add(p)?;
        }
        Ok(())
    }

    /// Patterns reachable from `roots` in callee-first (topological) order.
    pub fn topo_from(&self, roots: &[&str]) -> Result<Vec<String>, PatternError> {
        let mut order = Vec::new();
        let mut state: HashMap<String, u8> = HashMap::new(); // 1 = visiting, 2 = done
        let mut stack: Vec<(String, usize)> = Vec::new();
        for &root in roots {
            if !self.patterns.contains_key(root) {
                return Err(PatternError::UnknownPattern(root.to_string()));
            }
            if state.get(root).copied() == Some(2) {
                continue;
            }
            stack.push((root.to_string(), 0));
            state.insert(root.to_string(), 1);
            while let Some((name, idx)) = stack.pop() {
                let callees = self.callees_of(&name);
                if idx < callees.len() {
                    let next = callees[idx].clone();
                    stack.push((name.clone(), idx + 1));
                    match state.get(&next).copied() {
                        Some(2) => {}
                        Some(1) => { /* cycle; well_formed reports it */ }
                        _ => {
                            if !self.patterns.contains_key(&next) {
                                return Err(PatternError::UnknownPattern(next));
                            }
                            state.insert(next.clone(), 1);
                            stack.push((next, 0));
                        }
                    }
                } else {
                    state.insert(name.clone(), 2);
                    order.push(name);
                }
            }
        }
        Ok(order)
    }

    fn callees_of(&self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(p) = self.patterns.get(name) {
            for body in &p.bodies {
                for c in &body.constraints {
                    match c {
                        Constraint::PosCall { callee, .. }
                        | Constraint::NegCall { callee, .. }
                        | Constraint::CountCall { callee, .. } => out.push(callee.clone()),
                        _ => {}
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WfViolation {
    pub pattern: String,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for WfViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.pattern, self.rule, self.detail)
    }
}

/// Validates a pattern against a library: every parameter and every variable
/// read by a filter constraint must be bound by a positive constraint, count
/// results may be read only by checks, call arities must line up, and the
/// call graph must be acyclic. Dangling calls are an error.
pub fn well_formed(pattern: &Pattern, lib: &PatternLibrary) -> Result<Vec<WfViolation>, PatternError> {
    let mut out = Vec::new();
    let mut push = |rule, detail: String| {
        out.push(WfViolation {
            pattern: pattern.name.clone(),
            rule,
            detail,
        })
    };

    if pattern.bodies.is_empty() {
        push("no-bodies", "pattern has no bodies".to_string());
    }

    for (bi, body) in pattern.bodies.iter().enumerate() {
        if body.param_binding.len() != pattern.params.len() {
            push(
                "param-binding",
                format!("body {bi} binds {} of {} params", body.param_binding.len(), pattern.params.len()),
            );
            continue;
        }
        let mut bound: HashSet<VarId> = HashSet::new();
        for c in &body.constraints {
            bound.extend(c.bound_vars());
        }
        for (pi, &var) in body.param_binding.iter().enumerate() {
            if !bound.contains(&var) {
                push(
                    "unbound-parameter",
                    format!(
                        "body {bi}: parameter {} is not bound by a positive constraint",
                        pattern.params[pi]
                    ),
                );
            }
        }
        for c in &body.constraints {
            for var in c.used_vars() {
                if !bound.contains(&var) {
                    push(
                        "unbound-variable",
                        format!("body {bi}: variable {} only used in a filter", body.var_names[var]),
                    );
                }
            }
            match c {
                Constraint::PosCall { callee, args } => {
                    check_call(lib, callee, args.len())?;
                }
                Constraint::NegCall { callee, args }
                | Constraint::CountCall { callee, args, .. } => {
                    check_call(lib, callee, args.len())?;
                }
                _ => {}
            }
        }
        // one CountCall per result slot
        let mut defined: HashSet<CountId> = HashSet::new();
        for c in &body.constraints {
            if let Constraint::CountCall { result, .. } = c {
                if !defined.insert(*result) {
                    push(
                        "count-redefined",
                        format!("body {bi}: count {} defined twice", body.count_names[*result]),
                    );
                }
            }
        }
        for c in &body.constraints {
            if let Constraint::Check(check) = c {
                for (_, cid) in check.lhs.terms.iter().chain(check.rhs.terms.iter()) {
                    if !defined.contains(cid) {
                        push(
                            "undefined-count",
                            format!("body {bi}: check reads undefined count {}", body.count_names[*cid]),
                        );
                    }
                }
            }
        }
    }

    // acyclicity from this pattern
    let mut visiting: Vec<String> = vec![pattern.name.clone()];
    let mut done: HashSet<String> = HashSet::new();
    if let Some(cycle) = find_cycle(lib, pattern, &mut visiting, &mut done)? {
        push("call-cycle", format!("call cycle through {cycle:?}"));
    }

    Ok(out)
}

fn check_call(lib: &PatternLibrary, callee: &str, got: usize) -> Result<(), PatternError> {
    let target = lib
        .get(callee)
        .ok_or_else(|| PatternError::UnknownPattern(callee.to_string()))?;
    if target.arity() != got {
        return Err(PatternError::ArityMismatch {
            callee: callee.to_string(),
            got,
            expected: target.arity(),
        });
    }
    Ok(())
}

fn find_cycle(
    lib: &PatternLibrary,
    pattern: &Pattern,
    visiting: &mut Vec<String>,
    done: &mut HashSet<String>,
) -> Result<Option<String>, PatternError> {
    for body in &pattern.bodies {
        for c in &body.constraints {
            let callee = match c {
                Constraint::PosCall { callee, .. }
                | Constraint::NegCall { callee, .. }
                | Constraint::CountCall { callee, .. } => callee,
                _ => continue,
            };
            if visiting.iter().any(|n| n == callee) {
                return Ok(Some(callee.clone()));
            }
            if done.contains(callee) {
                continue;
            }
            let next = lib
                .get(callee)
                .ok_or_else(|| PatternError::UnknownPattern(callee.clone()))?;
            visiting.push(callee.clone());
            let found = find_cycle(lib, next, visiting, done)?;
            visiting.pop();
            done.insert(callee.clone());
            if found.is_some() {
                return Ok(found);
            }
        }
    }
    Ok(None)
}

/// Validates every pattern in a library.
pub fn well_formed_library(lib: &PatternLibrary) -> Result<Vec<WfViolation>, PatternError> {
    let mut out = Vec::new();
    for name in lib.names().map(str::to_string).collect::<Vec<_>>() {
        out.extend(well_formed(lib.get(&name).unwrap(), lib)?);
    }
    Ok(out)
}

// ---- builder ----------------------------------------------------------------

/// Argument spec used by the builder; `v("X")` for a bound variable, `any()`
/// for an existential position.
#[derive(Clone, Debug)]
pub enum ArgSpec {
    Var(String),
    Any,
}

pub fn v(name: &str) -> ArgSpec {
    ArgSpec::Var(name.to_string())
}

pub fn any() -> ArgSpec {
    ArgSpec::Any
}

pub struct PatternBuilder {
    name: String,
    params: Vec<String>,
    bodies: Vec<Body>,
}

impl PatternBuilder {
    pub fn new<I, S>(name: &str, params: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        PatternBuilder {
            name: name.to_string(),
            params: params.into_iter().map(Into::into).collect(),
            bodies: Vec::new(),
        }
    }

    pub fn body(mut self, f: impl FnOnce(&mut BodyBuilder)) -> Self {
        let mut builder = BodyBuilder::new(&self.params);
        f(&mut builder);
        self.bodies.push(builder.finish());
        self
    }

    pub fn build(self) -> Pattern {
        Pattern {
            name: self.name,
            params: self.params,
            bodies: self.bodies,
        }
    }
}

pub struct BodyBuilder {
    params: Vec<String>,
    vars: Vec<String>,
    by_name: HashMap<String, VarId>,
    counts: Vec<String>,
    counts_by_name: HashMap<String, CountId>,
    aliases: HashMap<String, String>,
    constraints: Vec<Constraint>,
}

impl BodyBuilder {
    fn new(params: &[String]) -> Self {
        BodyBuilder {
            params: params.to_vec(),
            vars: Vec::new(),
            by_name: HashMap::new(),
            counts: Vec::new(),
            counts_by_name: HashMap::new(),
            aliases: HashMap::new(),
            constraints: Vec::new(),
        }
    }

    fn var(&mut self, name: &str) -> VarId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = self.vars.len();
        self.vars.push(name.to_string());
        self.by_name.insert(name.to_string(), id);
        id
    }

    fn count_var(&mut self, name: &str) -> CountId {
        if let Some(&id) = self.counts_by_name.get(name) {
            return id;
        }
        let id = self.counts.len();
        self.counts.push(name.to_string());
        self.counts_by_name.insert(name.to_string(), id);
        id
    }

    fn call_args(&mut self, args: &[ArgSpec]) -> Vec<CallArg> {
        args.iter()
            .map(|a| match a {
                ArgSpec::Var(name) => CallArg::Var(self.var(name)),
                ArgSpec::Any => CallArg::Any,
            })
            .collect()
    }

    /// Binds a parameter to another variable instead of its own name; the
    /// identity-pattern trick (`bind_param("Y", "X")` makes X and Y the same
    /// node in this body).
    pub fn bind_param(&mut self, param: &str, to: &str) -> &mut Self {
        self.aliases.insert(param.to_string(), to.to_string());
        self
    }

    pub fn node(&mut self, name: &str, ty: NodeType) -> &mut Self {
        let var = self.var(name);
        self.constraints.push(Constraint::NodeType { var, ty });
        self
    }

    pub fn edge(&mut self, kind: EdgeKind, src: &str, dst: &str) -> &mut Self {
        let src = self.var(src);
        let dst = self.var(dst);
        self.constraints.push(Constraint::Edge { kind, src, dst });
        self
    }

    pub fn find(&mut self, callee: &str, args: &[&str]) -> &mut Self {
        let args = args.iter().map(|a| self.var(a)).collect();
        self.constraints.push(Constraint::PosCall {
            callee: callee.to_string(),
            args,
        });
        self
    }

    pub fn neg(&mut self, callee: &str, args: &[ArgSpec]) -> &mut Self {
        let args = self.call_args(args);
        self.constraints.push(Constraint::NegCall {
            callee: callee.to_string(),
            args,
        });
        self
    }

    pub fn count(&mut self, result: &str, callee: &str, args: &[ArgSpec]) -> &mut Self {
        let args = self.call_args(args);
        let result = self.count_var(result);
        self.constraints.push(Constraint::CountCall {
            callee: callee.to_string(),
            args,
            result,
        });
        self
    }

    /// `check <count> <op> <constant>` — the shape every rule in this
    /// transformation needs.
    pub fn check_const(&mut self, count: &str, op: CmpOp, constant: i64) -> &mut Self {
        let c = self.count_var(count);
        self.constraints.push(Constraint::Check(CheckExpr {
            lhs: LinearExpr::count(c),
            op,
            rhs: LinearExpr::constant(constant),
        }));
        self
    }

    pub fn check(&mut self, expr: CheckExpr) -> &mut Self {
        self.constraints.push(Constraint::Check(expr));
        self
    }

    pub fn attr_neq(&mut self, left: &str, left_key: &str, right: &str, right_key: &str) -> &mut Self {
        let left = self.var(left);
        let right = self.var(right);
        self.constraints.push(Constraint::AttrNeq {
            left,
            left_key: left_key.to_string(),
            right,
            right_key: right_key.to_string(),
        });
        self
    }

    fn finish(mut self) -> Body {
        let params = std::mem::take(&mut self.params);
        let param_binding = params
            .iter()
            .map(|p| {
                let target = self.aliases.get(p).cloned().unwrap_or_else(|| p.clone());
                self.var(&target)
            })
            .collect();
        Body {
            var_names: self.vars,
            count_names: self.counts,
            param_binding,
            constraints: self.constraints,
        }
    }
}
