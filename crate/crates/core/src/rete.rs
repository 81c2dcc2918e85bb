//! Incremental pattern matcher: a Rete-style dataflow network that keeps the
//! match set of every compiled pattern up to date under store change events
//! and accumulates appear/disappear deltas per registered pattern.
//!
//! The network is a DAG of typed nodes — inputs (one per node type and edge
//! kind), joins, anti-joins (negative calls), count joins, check and
//! attribute filters, per-body projections and per-pattern unions (both with
//! support counters), and one production node per registered pattern. Nodes
//! are created callee-first, so node index order is a topological order and a
//! single forward sweep per event drains all queues. Named patterns compile
//! to exactly one sub-network no matter how many callers they have.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::rc::Rc;

use thiserror::Error;

use crate::pattern::{
    well_formed, CallArg, CmpOp, Constraint, CountId, MatchSet, PatternError, PatternLibrary,
    VarId, WfViolation,
};
use crate::store::{ChangeEvent, EdgeKind, EventListener, NodeId, NodeType, Store, SubscriptionId};

/// Appear/disappear increment for one pattern, in net-effect form: a tuple
/// that appeared and disappeared between two flushes is absent from both
/// sides.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MatchDelta {
    pub pattern: String,
    pub appeared: Vec<Vec<NodeId>>,
    pub disappeared: Vec<Vec<NodeId>>,
}

#[derive(Error, Debug)]
pub enum CompileError {
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("ill-formed patterns: {0:?}")]
    Malformed(Vec<WfViolation>),
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum MatcherError {
    #[error("pattern {0:?} is not compiled into this network")]
    UnknownPattern(String),
}

type Row = Vec<u64>;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Port {
    Left,
    Right,
}

#[derive(Clone, Debug)]
enum Msg {
    Delta { port: Port, add: bool, row: Row },
    Recheck { node: u64 },
}

fn project(row: &[u64], cols: &[usize]) -> Row {
    cols.iter().map(|&c| row[c]).collect()
}

#[derive(Default)]
struct KeyedMem {
    rows: HashMap<Row, BTreeSet<Row>>,
}

impl KeyedMem {
    fn insert(&mut self, key: Row, row: Row) {
        self.rows.entry(key).or_default().insert(row);
    }

    fn remove(&mut self, key: &Row, row: &Row) {
        let set = self
            .rows
            .get_mut(key)
            .unwrap_or_else(|| panic!("removal from empty join memory"));
        assert!(set.remove(row), "removal of absent row from join memory");
        if set.is_empty() {
            self.rows.remove(key);
        }
    }

    fn get(&self, key: &Row) -> impl Iterator<Item = &Row> {
        self.rows.get(key).into_iter().flatten()
    }
}

struct AdapterNode {
    eq_pairs: Vec<(usize, usize)>,
    out_cols: Vec<usize>,
}

struct JoinNode {
    left_key: Vec<usize>,
    right_key: Vec<usize>,
    right_eq: Vec<(usize, usize)>,
    right_out: Vec<usize>,
    left_mem: KeyedMem,
    right_mem: KeyedMem,
}

/// Shared state of anti-joins and count joins: left rows grouped by key plus
/// a per-key count of callee tuples.
struct SemiNode {
    left_key: Vec<usize>,
    right_key: Vec<usize>,
    left_mem: KeyedMem,
    right_counts: HashMap<Row, i64>,
}

struct CheckNode {
    /// (coefficient, column) terms of `lhs - rhs`, compared against zero.
    terms: Vec<(i64, usize)>,
    constant: i64,
    op: CmpOp,
}

impl CheckNode {
    fn passes(&self, row: &[u64]) -> bool {
        let value: i64 = self
            .terms
            .iter()
            .map(|&(coeff, col)| coeff * row[col] as i64)
            .sum::<i64>()
            + self.constant;
        match self.op {
            CmpOp::Lt => value < 0,
            CmpOp::Le => value <= 0,
            CmpOp::Eq => value == 0,
            CmpOp::Ne => value != 0,
            CmpOp::Ge => value >= 0,
            CmpOp::Gt => value > 0,
        }
    }
}

struct AttrNeqNode {
    left_col: usize,
    left_key: String,
    right_col: usize,
    right_key: String,
    rows: BTreeSet<Row>,
    passing: BTreeSet<Row>,
    by_node: HashMap<u64, BTreeSet<Row>>,
}

impl AttrNeqNode {
    fn evaluate(&self, row: &[u64], attrs: &AttrMirror) -> bool {
        let left = attrs.get(row[self.left_col], &self.left_key);
        let right = attrs.get(row[self.right_col], &self.right_key);
        left != right
    }
}

struct SupportNode {
    cols: Vec<usize>,
    support: HashMap<Row, i64>,
}

struct UnionNode {
    support: HashMap<Row, i64>,
    matches: BTreeSet<Row>,
}

struct ProductionNode {
    pending_add: BTreeSet<Row>,
    pending_rem: BTreeSet<Row>,
}

enum NetNode {
    InputNode,
    InputEdge,
    Adapter(AdapterNode),
    Join(JoinNode),
    AntiJoin(SemiNode),
    CountJoin(SemiNode),
    Check(CheckNode),
    AttrNeq(AttrNeqNode),
    Project(SupportNode),
    Union(UnionNode),
    Production(ProductionNode),
}

#[derive(Default)]
struct AttrMirror {
    values: HashMap<u64, BTreeMap<String, String>>,
}

impl AttrMirror {
    fn get(&self, node: u64, key: &str) -> String {
        self.values
            .get(&node)
            .and_then(|m| m.get(key).cloned())
            .unwrap_or_default()
    }

    fn set(&mut self, node: u64, key: &str, value: &str) {
        self.values
            .entry(node)
            .or_default()
            .insert(key.to_string(), value.to_string());
    }

    fn drop_node(&mut self, node: u64) {
        self.values.remove(&node);
    }
}

/// Structural summary, used by tests that inspect compiled networks.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct NetworkStats {
    pub inputs: usize,
    pub joins: usize,
    pub anti_joins: usize,
    pub count_joins: usize,
    pub checks: usize,
    pub attr_filters: usize,
    pub projections: usize,
    pub unions: usize,
    pub productions: usize,
}

pub struct Network {
    nodes: Vec<NetNode>,
    succs: Vec<Vec<(usize, Port)>>,
    queues: Vec<VecDeque<Msg>>,
    input_nodes: HashMap<NodeType, usize>,
    input_edges: HashMap<EdgeKind, usize>,
    attr_watch: HashMap<String, Vec<usize>>,
    union_of: BTreeMap<String, usize>,
    productions: Vec<(String, usize)>,
    attrs: AttrMirror,
}

impl Network {
    /// Number of consumers of a pattern's sub-network output; tests use this
    /// to verify sharing.
    pub fn consumers_of(&self, pattern: &str) -> usize {
        self.union_of
            .get(pattern)
            .map(|&u| self.succs[u].len())
            .unwrap_or(0)
    }

    pub fn stats(&self) -> NetworkStats {
        let mut s = NetworkStats::default();
        for node in &self.nodes {
            match node {
                NetNode::InputNode | NetNode::InputEdge => s.inputs += 1,
                NetNode::Adapter(_) => {}
                NetNode::Join(_) => s.joins += 1,
                NetNode::AntiJoin(_) => s.anti_joins += 1,
                NetNode::CountJoin(_) => s.count_joins += 1,
                NetNode::Check(_) => s.checks += 1,
                NetNode::AttrNeq(_) => s.attr_filters += 1,
                NetNode::Project(_) => s.projections += 1,
                NetNode::Union(_) => s.unions += 1,
                NetNode::Production(_) => s.productions += 1,
            }
        }
        s
    }

    fn enqueue(&mut self, node: usize, msg: Msg) {
        self.queues[node].push_back(msg);
    }

    fn handle_event(&mut self, event: &ChangeEvent) {
        match event {
            ChangeEvent::NodeAdded { ty, id } => {
                if let Some(&n) = self.input_nodes.get(ty) {
                    self.enqueue(
                        n,
                        Msg::Delta {
                            port: Port::Left,
                            add: true,
                            row: vec![id.raw()],
                        },
                    );
                }
            }
            ChangeEvent::NodeRemoved { ty, id } => {
                self.attrs.drop_node(id.raw());
                if let Some(&n) = self.input_nodes.get(ty) {
                    self.enqueue(
                        n,
                        Msg::Delta {
                            port: Port::Left,
                            add: false,
                            row: vec![id.raw()],
                        },
                    );
                }
            }
            ChangeEvent::EdgeAdded { kind, src, dst } | ChangeEvent::EdgeRemoved { kind, src, dst } => {
                let add = matches!(event, ChangeEvent::EdgeAdded { .. });
                if let Some(&n) = self.input_edges.get(kind) {
                    self.enqueue(
                        n,
                        Msg::Delta {
                            port: Port::Left,
                            add,
                            row: vec![src.raw(), dst.raw()],
                        },
                    );
                }
            }
            ChangeEvent::AttrSet { id, key, new, .. } => {
                self.attrs.set(id.raw(), key, new);
                if let Some(watchers) = self.attr_watch.get(key).cloned() {
                    for n in watchers {
                        self.enqueue(n, Msg::Recheck { node: id.raw() });
                    }
                }
            }
        }
        self.run();
    }

    /// One forward sweep; node indices are topologically ordered, so every
    /// queue is empty afterwards.
    fn run(&mut self) {
        for i in 0..self.nodes.len() {
            while let Some(msg) = self.queues[i].pop_front() {
                let outs = process(&mut self.nodes[i], msg, &self.attrs);
                if outs.is_empty() {
                    continue;
                }
                for (add, row) in outs {
                    for &(succ, port) in &self.succs[i] {
                        self.queues[succ].push_back(Msg::Delta {
                            port,
                            add,
                            row: row.clone(),
                        });
                    }
                }
            }
        }
        debug_assert!(self.queues.iter().all(VecDeque::is_empty));
    }

    fn current_matches(&self, pattern: &str) -> Result<MatchSet, MatcherError> {
        let &union = self
            .union_of
            .get(pattern)
            .ok_or_else(|| MatcherError::UnknownPattern(pattern.to_string()))?;
        let NetNode::Union(u) = &self.nodes[union] else {
            unreachable!()
        };
        Ok(MatchSet {
            pattern: pattern.to_string(),
            tuples: u
                .matches
                .iter()
                .map(|row| row.iter().map(|&x| NodeId::from_raw(x)).collect())
                .collect(),
        })
    }

    fn take_deltas(&mut self) -> Vec<MatchDelta> {
        let mut out = Vec::new();
        for &(ref name, idx) in &self.productions {
            let NetNode::Production(p) = &mut self.nodes[idx] else {
                unreachable!()
            };
            if p.pending_add.is_empty() && p.pending_rem.is_empty() {
                continue;
            }
            let to_ids = |rows: &mut BTreeSet<Row>| -> Vec<Vec<NodeId>> {
                let drained = std::mem::take(rows);
                drained
                    .into_iter()
                    .map(|row| row.into_iter().map(NodeId::from_raw).collect())
                    .collect()
            };
            out.push(MatchDelta {
                pattern: name.clone(),
                appeared: to_ids(&mut p.pending_add),
                disappeared: to_ids(&mut p.pending_rem),
            });
        }
        out
    }
}

fn process(node: &mut NetNode, msg: Msg, attrs: &AttrMirror) -> Vec<(bool, Row)> {
    let mut out = Vec::new();
    match (node, msg) {
        (NetNode::InputNode, Msg::Delta { add, row, .. })
        | (NetNode::InputEdge, Msg::Delta { add, row, .. }) => out.push((add, row)),

        (NetNode::Adapter(a), Msg::Delta { add, row, .. }) => {
            if a.eq_pairs.iter().all(|&(x, y)| row[x] == row[y]) {
                out.push((add, project(&row, &a.out_cols)));
            }
        }

        (NetNode::Join(j), Msg::Delta { port, add, row }) => match port {
            Port::Left => {
                let key = project(&row, &j.left_key);
                for rrow in j.right_mem.get(&key) {
                    let mut combined = row.clone();
                    combined.extend(j.right_out.iter().map(|&c| rrow[c]));
                    out.push((add, combined));
                }
                if add {
                    j.left_mem.insert(key, row);
                } else {
                    j.left_mem.remove(&key, &row);
                }
            }
            Port::Right => {
                if !j.right_eq.iter().all(|&(x, y)| row[x] == row[y]) {
                    return out;
                }
                let key = project(&row, &j.right_key);
                for lrow in j.left_mem.get(&key) {
                    let mut combined = lrow.clone();
                    combined.extend(j.right_out.iter().map(|&c| row[c]));
                    out.push((add, combined));
                }
                if add {
                    j.right_mem.insert(key, row);
                } else {
                    j.right_mem.remove(&key, &row);
                }
            }
        },

        (NetNode::AntiJoin(a), Msg::Delta { port, add, row }) => match port {
            Port::Left => {
                let key = project(&row, &a.left_key);
                let blocked = a.right_counts.get(&key).copied().unwrap_or(0) > 0;
                if !blocked {
                    out.push((add, row.clone()));
                }
                if add {
                    a.left_mem.insert(key, row);
                } else {
                    a.left_mem.remove(&key, &row);
                }
            }
            Port::Right => {
                let key = project(&row, &a.right_key);
                let count = a.right_counts.entry(key.clone()).or_insert(0);
                let before = *count;
                *count += if add { 1 } else { -1 };
                let after = *count;
                assert!(after >= 0, "negative callee count in anti-join");
                if after == 0 {
                    a.right_counts.remove(&key);
                }
                if before == 0 && after == 1 {
                    for lrow in a.left_mem.get(&key) {
                        out.push((false, lrow.clone()));
                    }
                } else if before == 1 && after == 0 {
                    for lrow in a.left_mem.get(&key) {
                        out.push((true, lrow.clone()));
                    }
                }
            }
        },

        (NetNode::CountJoin(c), Msg::Delta { port, add, row }) => match port {
            Port::Left => {
                let key = project(&row, &c.left_key);
                let count = c.right_counts.get(&key).copied().unwrap_or(0);
                let mut extended = row.clone();
                extended.push(count as u64);
                out.push((add, extended));
                if add {
                    c.left_mem.insert(key, row);
                } else {
                    c.left_mem.remove(&key, &row);
                }
            }
            Port::Right => {
                let key = project(&row, &c.right_key);
                let count = c.right_counts.entry(key.clone()).or_insert(0);
                let before = *count;
                *count += if add { 1 } else { -1 };
                let after = *count;
                assert!(after >= 0, "negative callee count in count join");
                if after == 0 {
                    c.right_counts.remove(&key);
                }
                for lrow in c.left_mem.get(&key) {
                    let mut old = lrow.clone();
                    old.push(before as u64);
                    out.push((false, old));
                    let mut new = lrow.clone();
                    new.push(after as u64);
                    out.push((true, new));
                }
            }
        },

        (NetNode::Check(check), Msg::Delta { add, row, .. }) => {
            if check.passes(&row) {
                out.push((add, row));
            }
        }

        (NetNode::AttrNeq(a), Msg::Delta { add, row, .. }) => {
            if add {
                a.rows.insert(row.clone());
                a.by_node.entry(row[a.left_col]).or_default().insert(row.clone());
                a.by_node
                    .entry(row[a.right_col])
                    .or_default()
                    .insert(row.clone());
                if a.evaluate(&row, attrs) {
                    a.passing.insert(row.clone());
                    out.push((true, row));
                }
            } else {
                assert!(a.rows.remove(&row), "removal of absent row from attr filter");
                for col in [a.left_col, a.right_col] {
                    if let Some(set) = a.by_node.get_mut(&row[col]) {
                        set.remove(&row);
                        if set.is_empty() {
                            a.by_node.remove(&row[col]);
                        }
                    }
                }
                if a.passing.remove(&row) {
                    out.push((false, row));
                }
            }
        }
        (NetNode::AttrNeq(a), Msg::Recheck { node }) => {
            let affected: Vec<Row> = a
                .by_node
                .get(&node)
                .map(|s| s.iter().cloned().collect())
                .unwrap_or_default();
            for row in affected {
                let passes = a.evaluate(&row, attrs);
                let was = a.passing.contains(&row);
                if passes && !was {
                    a.passing.insert(row.clone());
                    out.push((true, row));
                } else if !passes && was {
                    a.passing.remove(&row);
                    out.push((false, row));
                }
            }
        }

        (NetNode::Project(p), Msg::Delta { add, row, .. }) => {
            let key = project(&row, &p.cols);
            support_update(&mut p.support, key, add, &mut out);
        }

        (NetNode::Union(u), Msg::Delta { add, row, .. }) => {
            let mut delta = Vec::new();
            support_update(&mut u.support, row, add, &mut delta);
            for (add, row) in delta {
                if add {
                    u.matches.insert(row.clone());
                } else {
                    u.matches.remove(&row);
                }
                out.push((add, row));
            }
        }

        (NetNode::Production(p), Msg::Delta { add, row, .. }) => {
            if add {
                if !p.pending_rem.remove(&row) {
                    p.pending_add.insert(row);
                }
            } else if !p.pending_add.remove(&row) {
                p.pending_rem.insert(row);
            }
        }

        (_, Msg::Recheck { .. }) => unreachable!("recheck routed to a non-attr node"),
    }
    out
}

fn support_update(support: &mut HashMap<Row, i64>, row: Row, add: bool, out: &mut Vec<(bool, Row)>) {
    let entry = support.entry(row.clone()).or_insert(0);
    *entry += if add { 1 } else { -1 };
    assert!(*entry >= 0, "support counter dropped below zero");
    if add && *entry == 1 {
        out.push((true, row));
    } else if !add && *entry == 0 {
        support.remove(&row);
        out.push((false, row));
    }
}

// ---- compilation -------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Col {
    Var(VarId),
    Count(CountId),
}

struct Compiler<'a> {
    lib: &'a PatternLibrary,
    nodes: Vec<NetNode>,
    succs: Vec<Vec<(usize, Port)>>,
    input_nodes: HashMap<NodeType, usize>,
    input_edges: HashMap<EdgeKind, usize>,
    attr_watch: HashMap<String, Vec<usize>>,
    union_of: BTreeMap<String, usize>,
}

/// Compiles the patterns reachable from `registered` into a network with one
/// production node per registered pattern (in registration order, duplicates
/// ignored).
pub fn compile(registered: &[&str], lib: &PatternLibrary) -> Result<Network, CompileError> {
    let order = lib.topo_from(registered)?;
    let mut violations = Vec::new();
    for name in &order {
        violations.extend(well_formed(lib.get(name).unwrap(), lib)?);
    }
    if !violations.is_empty() {
        return Err(CompileError::Malformed(violations));
    }

    let mut compiler = Compiler {
        lib,
        nodes: Vec::new(),
        succs: Vec::new(),
        input_nodes: HashMap::new(),
        input_edges: HashMap::new(),
        attr_watch: HashMap::new(),
        union_of: BTreeMap::new(),
    };
    for name in &order {
        compiler.compile_pattern(name);
    }

    let mut productions = Vec::new();
    let mut seen = BTreeSet::new();
    for &name in registered {
        if !seen.insert(name) {
            continue;
        }
        let union = compiler.union_of[name];
        let prod = compiler.add_node(NetNode::Production(ProductionNode {
            pending_add: BTreeSet::new(),
            pending_rem: BTreeSet::new(),
        }));
        compiler.connect(union, prod, Port::Left);
        productions.push((name.to_string(), prod));
    }

    let queues = (0..compiler.nodes.len()).map(|_| VecDeque::new()).collect();
    Ok(Network {
        nodes: compiler.nodes,
        succs: compiler.succs,
        queues,
        input_nodes: compiler.input_nodes,
        input_edges: compiler.input_edges,
        attr_watch: compiler.attr_watch,
        union_of: compiler.union_of,
        productions,
        attrs: AttrMirror::default(),
    })
}

impl<'a> Compiler<'a> {
    fn add_node(&mut self, node: NetNode) -> usize {
        self.nodes.push(node);
        self.succs.push(Vec::new());
        self.nodes.len() - 1
    }

    fn connect(&mut self, from: usize, to: usize, port: Port) {
        debug_assert!(from < to, "network edges must point forward");
        self.succs[from].push((to, port));
    }

    fn input_node(&mut self, ty: NodeType) -> usize {
        if let Some(&n) = self.input_nodes.get(&ty) {
            return n;
        }
        let n = self.add_node(NetNode::InputNode);
        self.input_nodes.insert(ty, n);
        n
    }

    fn input_edge(&mut self, kind: EdgeKind) -> usize {
        if let Some(&n) = self.input_edges.get(&kind) {
            return n;
        }
        let n = self.add_node(NetNode::InputEdge);
        self.input_edges.insert(kind, n);
        n
    }

    fn compile_pattern(&mut self, name: &str) {
        if self.union_of.contains_key(name) {
            return;
        }
        let pattern = self.lib.get(name).unwrap().clone();
        let mut projections = Vec::new();
        for body in &pattern.bodies {
            projections.push(self.compile_body(body));
        }
        let union = self.add_node(NetNode::Union(UnionNode {
            support: HashMap::new(),
            matches: BTreeSet::new(),
        }));
        for p in projections {
            self.connect(p, union, Port::Left);
        }
        self.union_of.insert(name.to_string(), union);
    }

    /// Source relation of a positive constraint: the feeding node plus the
    /// variable carried in each source-row position.
    fn source_of(&mut self, c: &Constraint) -> (usize, Vec<VarId>) {
        match c {
            Constraint::NodeType { var, ty } => (self.input_node(*ty), vec![*var]),
            Constraint::Edge { kind, src, dst } => (self.input_edge(*kind), vec![*src, *dst]),
            Constraint::PosCall { callee, args } => (self.union_of[callee.as_str()], args.clone()),
            _ => unreachable!("only positive constraints have a source relation"),
        }
    }

    fn compile_body(&mut self, body: &crate::pattern::Body) -> usize {
        // Greedy join order: repeatedly pick the positive constraint sharing
        // the most already-bound variables, ties broken by declaration order.
        let mut remaining: Vec<&Constraint> =
            body.constraints.iter().filter(|c| c.is_positive()).collect();
        let mut bound: BTreeSet<VarId> = BTreeSet::new();
        let mut ordered: Vec<&Constraint> = Vec::new();
        while !remaining.is_empty() {
            let best = remaining
                .iter()
                .enumerate()
                .max_by_key(|(i, c)| {
                    let overlap = c
                        .bound_vars()
                        .iter()
                        .filter(|v| bound.contains(v))
                        .count();
                    (overlap, usize::MAX - i)
                })
                .map(|(i, _)| i)
                .unwrap();
            let c = remaining.remove(best);
            bound.extend(c.bound_vars());
            ordered.push(c);
        }

        let mut chain: Option<usize> = None;
        let mut schema: Vec<Col> = Vec::new();
        let mut col_of_var: HashMap<VarId, usize> = HashMap::new();
        let mut col_of_count: HashMap<CountId, usize> = HashMap::new();

        for c in ordered {
            let (src, positions) = self.source_of(c);
            match chain {
                None => {
                    // Bootstrap: adapt the source relation to the body schema.
                    let mut eq_pairs = Vec::new();
                    let mut out_cols = Vec::new();
                    let mut first_pos: HashMap<VarId, usize> = HashMap::new();
                    for (pos, &var) in positions.iter().enumerate() {
                        match first_pos.get(&var) {
                            Some(&fp) => eq_pairs.push((fp, pos)),
                            None => {
                                first_pos.insert(var, pos);
                                col_of_var.insert(var, schema.len());
                                schema.push(Col::Var(var));
                                out_cols.push(pos);
                            }
                        }
                    }
                    let adapter = self.add_node(NetNode::Adapter(AdapterNode { eq_pairs, out_cols }));
                    self.connect(src, adapter, Port::Left);
                    chain = Some(adapter);
                }
                Some(prev) => {
                    let mut left_key = Vec::new();
                    let mut right_key = Vec::new();
                    let mut right_eq = Vec::new();
                    let mut right_out = Vec::new();
                    let mut first_new: HashMap<VarId, usize> = HashMap::new();
                    let mut new_vars = Vec::new();
                    for (pos, &var) in positions.iter().enumerate() {
                        if let Some(&col) = col_of_var.get(&var) {
                            left_key.push(col);
                            right_key.push(pos);
                        } else {
                            match first_new.get(&var) {
                                Some(&fp) => right_eq.push((fp, pos)),
                                None => {
                                    first_new.insert(var, pos);
                                    right_out.push(pos);
                                    new_vars.push(var);
                                }
                            }
                        }
                    }
                    let join = self.add_node(NetNode::Join(JoinNode {
                        left_key,
                        right_key,
                        right_eq,
                        right_out,
                        left_mem: KeyedMem::default(),
                        right_mem: KeyedMem::default(),
                    }));
                    self.connect(prev, join, Port::Left);
                    self.connect(src, join, Port::Right);
                    for var in new_vars {
                        col_of_var.insert(var, schema.len());
                        schema.push(Col::Var(var));
                    }
                    chain = Some(join);
                }
            }
        }
        let mut chain = chain.expect("well-formed bodies have at least one positive constraint");

        // Filters in declaration order; a check is deferred until every count
        // it reads has been attached.
        let mut pending_checks: Vec<&crate::pattern::CheckExpr> = Vec::new();
        let flush_checks =
            |this: &mut Self,
             chain: &mut usize,
             pending: &mut Vec<&crate::pattern::CheckExpr>,
             col_of_count: &HashMap<CountId, usize>| {
                let mut kept = Vec::new();
                for check in pending.drain(..) {
                    let ready = check
                        .lhs
                        .terms
                        .iter()
                        .chain(check.rhs.terms.iter())
                        .all(|(_, c)| col_of_count.contains_key(c));
                    if !ready {
                        kept.push(check);
                        continue;
                    }
                    let mut terms: Vec<(i64, usize)> = Vec::new();
                    for &(coeff, c) in &check.lhs.terms {
                        terms.push((coeff, col_of_count[&c]));
                    }
                    for &(coeff, c) in &check.rhs.terms {
                        terms.push((-coeff, col_of_count[&c]));
                    }
                    let node = this.add_node(NetNode::Check(CheckNode {
                        terms,
                        constant: check.lhs.constant - check.rhs.constant,
                        op: check.op,
                    }));
                    this.connect(*chain, node, Port::Left);
                    *chain = node;
                }
                *pending = kept;
            };

        for c in body.constraints.iter().filter(|c| !c.is_positive()) {
            match c {
                Constraint::NegCall { callee, args } => {
                    let (left_key, right_key) = call_keys(args, &col_of_var);
                    let callee_union = self.union_of[callee.as_str()];
                    let node = self.add_node(NetNode::AntiJoin(SemiNode {
                        left_key,
                        right_key,
                        left_mem: KeyedMem::default(),
                        right_counts: HashMap::new(),
                    }));
                    self.connect(chain, node, Port::Left);
                    self.connect(callee_union, node, Port::Right);
                    chain = node;
                }
                Constraint::CountCall { callee, args, result } => {
                    let (left_key, right_key) = call_keys(args, &col_of_var);
                    let callee_union = self.union_of[callee.as_str()];
                    let node = self.add_node(NetNode::CountJoin(SemiNode {
                        left_key,
                        right_key,
                        left_mem: KeyedMem::default(),
                        right_counts: HashMap::new(),
                    }));
                    self.connect(chain, node, Port::Left);
                    self.connect(callee_union, node, Port::Right);
                    chain = node;
                    col_of_count.insert(*result, schema.len());
                    schema.push(Col::Count(*result));
                    flush_checks(self, &mut chain, &mut pending_checks, &col_of_count);
                }
                Constraint::Check(check) => {
                    pending_checks.push(check);
                    flush_checks(self, &mut chain, &mut pending_checks, &col_of_count);
                }
                Constraint::AttrNeq {
                    left,
                    left_key,
                    right,
                    right_key,
                } => {
                    let node = self.add_node(NetNode::AttrNeq(AttrNeqNode {
                        left_col: col_of_var[left],
                        left_key: left_key.clone(),
                        right_col: col_of_var[right],
                        right_key: right_key.clone(),
                        rows: BTreeSet::new(),
                        passing: BTreeSet::new(),
                        by_node: HashMap::new(),
                    }));
                    self.connect(chain, node, Port::Left);
                    self.attr_watch.entry(left_key.clone()).or_default().push(node);
                    if right_key != left_key {
                        self.attr_watch.entry(right_key.clone()).or_default().push(node);
                    }
                    chain = node;
                }
                _ => {}
            }
        }
        assert!(pending_checks.is_empty(), "check with undefined count survived well_formed");

        let cols = body
            .param_binding
            .iter()
            .map(|var| col_of_var[var])
            .collect();
        let project = self.add_node(NetNode::Project(SupportNode {
            cols,
            support: HashMap::new(),
        }));
        self.connect(chain, project, Port::Left);
        project
    }
}

fn call_keys(args: &[CallArg], col_of_var: &HashMap<VarId, usize>) -> (Vec<usize>, Vec<usize>) {
    let mut left_key = Vec::new();
    let mut right_key = Vec::new();
    for (pos, arg) in args.iter().enumerate() {
        if let CallArg::Var(var) = arg {
            left_key.push(col_of_var[var]);
            right_key.push(pos);
        }
    }
    (left_key, right_key)
}

// ---- matcher -----------------------------------------------------------------

struct MatcherCore {
    net: Network,
}

impl EventListener for MatcherCore {
    fn on_event(&mut self, event: &ChangeEvent) {
        self.net.handle_event(event);
    }
}

/// A compiled network attached to a live store. Seeding replays the current
/// store content through the normal event path, so immediately after `attach`
/// the match sets equal the reference evaluation and the seed matches are
/// pending as appear deltas.
pub struct Matcher {
    core: Rc<RefCell<MatcherCore>>,
    store: Store,
    sub: SubscriptionId,
}

impl Matcher {
    pub fn attach(net: Network, store: &Store) -> Matcher {
        let core = Rc::new(RefCell::new(MatcherCore { net }));
        {
            let mut m = core.borrow_mut();
            for (id, ty) in store.all_nodes() {
                m.net.handle_event(&ChangeEvent::NodeAdded { ty, id });
            }
            for (kind, src, dst) in store.all_edges() {
                m.net.handle_event(&ChangeEvent::EdgeAdded { kind, src, dst });
            }
            for (id, _) in store.all_nodes() {
                for (key, value) in store.attrs_of(id) {
                    m.net.handle_event(&ChangeEvent::AttrSet {
                        id,
                        key,
                        old: None,
                        new: value,
                    });
                }
            }
        }
        let listener: Rc<RefCell<dyn EventListener>> = core.clone();
        let sub = store.subscribe(listener);
        Matcher {
            core,
            store: store.clone(),
            sub,
        }
    }

    /// Drains accumulated deltas: pattern registration order, tuples sorted.
    pub fn take_deltas(&self) -> Vec<MatchDelta> {
        self.core.borrow_mut().net.take_deltas()
    }

    pub fn current_matches(&self, pattern: &str) -> Result<MatchSet, MatcherError> {
        self.core.borrow().net.current_matches(pattern)
    }

    pub fn stats(&self) -> NetworkStats {
        self.core.borrow().net.stats()
    }

    pub fn consumers_of(&self, pattern: &str) -> usize {
        self.core.borrow().net.consumers_of(pattern)
    }
}

impl Drop for Matcher {
    fn drop(&mut self) {
        self.store.unsubscribe(self.sub);
    }
}
