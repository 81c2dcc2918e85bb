//! Post-transformation change propagation: additions, deletions, and renames
//! of places and transitions are pushed from the (reduced) net to the
//! statechart and trace by a dedicated rule phase, keeping the session at
//! fixpoint between change batches.
//!
//! Deletion is detected structurally — a trace node whose source element is
//! gone — so propagation stays purely pattern-driven. Arc-level changes are
//! out of scope; commands cover elements only.

use thiserror::Error;

use crate::engine::{
    ActionError, EngineError, EngineOptions, FiringLog, MatchProvider, Phase, PhaseRun,
    ReferenceProvider, Rule,
};
use crate::models::{
    model_size, HYPER_EDGE, NAME, OR_STATE, PLACE, PLACE_TRACE, TRACE_BASIC, TRACE_HEDGE,
    TRACE_OR, TRACE_PLACE, TRACE_TRAN, TRAN_TRACE, TRANSITION,
};
use crate::pattern::{any, v, Pattern, PatternLibrary};
use crate::pn2sc::{map_place, map_transition, transformation_library, MatcherKind};
use crate::rete::{compile, CompileError, Matcher};
use crate::store::{NodeId, Store};
use crate::symbols::SymbolTable;

const SESSION_MARKER: &str = "propagation-session";

#[derive(Error, Debug)]
pub enum PropagateError {
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("a propagation session is already open on this store")]
    SessionExists,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("snapshot failed: {0}")]
    Snapshot(String),
}

/// Element-level net change, resolved against the session symbol table.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ChangeCommand {
    AddPlace { label: String, name: String },
    RemovePlace { label: String },
    RenamePlace { label: String, name: String },
    AddTransition { label: String, name: String },
    RemoveTransition { label: String },
    RenameTransition { label: String, name: String },
}

// ---- patterns ------------------------------------------------------------------

fn place_trace_of() -> Pattern {
    Pattern::builder("placeTraceOf", ["TR", "P"])
        .body(|b| {
            b.edge(TRACE_PLACE, "TR", "P");
        })
        .build()
}

fn tran_trace_of() -> Pattern {
    Pattern::builder("tranTraceOf", ["TR", "T"])
        .body(|b| {
            b.edge(TRACE_TRAN, "TR", "T");
        })
        .build()
}

/// A place that no trace entry covers: the add rule's precondition.
pub fn untraced_place() -> Pattern {
    Pattern::builder("untracedPlace", ["P"])
        .body(|b| {
            b.node("P", PLACE).neg("placeTraceOf", &[any(), v("P")]);
        })
        .build()
}

pub fn untraced_transition() -> Pattern {
    Pattern::builder("untracedTransition", ["T"])
        .body(|b| {
            b.node("T", TRANSITION).neg("tranTraceOf", &[any(), v("T")]);
        })
        .build()
}

/// A trace node whose source place was deleted: the delete rule's
/// precondition.
pub fn dangling_place_trace() -> Pattern {
    Pattern::builder("danglingPlaceTrace", ["TR"])
        .body(|b| {
            b.node("TR", PLACE_TRACE).neg("placeTraceOf", &[v("TR"), any()]);
        })
        .build()
}

pub fn dangling_transition_trace() -> Pattern {
    Pattern::builder("danglingTransitionTrace", ["TR"])
        .body(|b| {
            b.node("TR", TRAN_TRACE).neg("tranTraceOf", &[v("TR"), any()]);
        })
        .build()
}

/// A traced place whose name differs from its OR state's name: the rename
/// rule's precondition.
pub fn place_rename_mismatch() -> Pattern {
    Pattern::builder("placeRenameMismatch", ["P", "O"])
        .body(|b| {
            b.edge(TRACE_PLACE, "TR", "P")
                .edge(TRACE_OR, "TR", "O")
                .attr_neq("P", NAME, "O", NAME);
        })
        .build()
}

pub fn transition_rename_mismatch() -> Pattern {
    Pattern::builder("transitionRenameMismatch", ["T", "H"])
        .body(|b| {
            b.edge(TRACE_TRAN, "TR", "T")
                .edge(TRACE_HEDGE, "TR", "H")
                .attr_neq("T", NAME, "H", NAME);
        })
        .build()
}

/// Patterns of the change-propagation phase.
pub fn propagation_library() -> PatternLibrary {
    let mut lib = PatternLibrary::new();
    for p in [
        place_trace_of(),
        tran_trace_of(),
        untraced_place(),
        untraced_transition(),
        dangling_place_trace(),
        dangling_transition_trace(),
        place_rename_mismatch(),
        transition_rename_mismatch(),
    ] {
        lib.add(p).expect("library patterns have unique names");
    }
    lib
}

/// Reduction plus propagation patterns; used by equivalence tests that watch
/// everything at once.
pub fn full_library() -> PatternLibrary {
    let mut lib = transformation_library();
    lib.merge(propagation_library())
        .expect("pattern names are disjoint");
    lib
}

// ---- actions -------------------------------------------------------------------

fn cp_add_place(binding: &[NodeId], store: &Store) -> Result<(), ActionError> {
    map_place(store, binding[0]);
    Ok(())
}

fn cp_add_transition(binding: &[NodeId], store: &Store) -> Result<(), ActionError> {
    map_transition(store, binding[0]);
    Ok(())
}

fn cp_dangle_place(binding: &[NodeId], store: &Store) -> Result<(), ActionError> {
    let tr = binding[0];
    for or in store.targets(tr, TRACE_OR) {
        if store.node_type(or) == Some(OR_STATE) {
            store.delete_node(or).unwrap();
        }
    }
    for basic in store.targets(tr, TRACE_BASIC) {
        store.delete_node(basic).unwrap();
    }
    store.delete_node(tr).unwrap();
    Ok(())
}

fn cp_dangle_transition(binding: &[NodeId], store: &Store) -> Result<(), ActionError> {
    let tr = binding[0];
    for h in store.targets(tr, TRACE_HEDGE) {
        if store.node_type(h) == Some(HYPER_EDGE) {
            store.delete_node(h).unwrap();
        }
    }
    store.delete_node(tr).unwrap();
    Ok(())
}

fn cp_rename_place(binding: &[NodeId], store: &Store) -> Result<(), ActionError> {
    let (p, or) = (binding[0], binding[1]);
    let name = store.attr(p, NAME).unwrap_or_default();
    store.set_attr(or, NAME, &name).unwrap();
    for tr in store.sources(p, TRACE_PLACE) {
        for basic in store.targets(tr, TRACE_BASIC) {
            store.set_attr(basic, NAME, &name).unwrap();
        }
    }
    Ok(())
}

fn cp_rename_transition(binding: &[NodeId], store: &Store) -> Result<(), ActionError> {
    let (t, h) = (binding[0], binding[1]);
    let name = store.attr(t, NAME).unwrap_or_default();
    store.set_attr(h, NAME, &name).unwrap();
    Ok(())
}

/// The change-propagation phase: add, dangle, rename — places before
/// transitions.
pub fn propagation_phase() -> Phase {
    Phase::new(
        "propagation",
        vec![
            Rule::new("cpAddPlace", "untracedPlace", cp_add_place),
            Rule::new("cpAddTransition", "untracedTransition", cp_add_transition),
            Rule::new("cpDanglePlace", "danglingPlaceTrace", cp_dangle_place),
            Rule::new(
                "cpDangleTransition",
                "danglingTransitionTrace",
                cp_dangle_transition,
            ),
            Rule::new("cpRenamePlace", "placeRenameMismatch", cp_rename_place),
            Rule::new(
                "cpRenameTransition",
                "transitionRenameMismatch",
                cp_rename_transition,
            ),
        ],
    )
}

// ---- session -------------------------------------------------------------------

/// Live propagation session over a completed transform. Holds the store, the
/// symbol table commands resolve against, and a matcher with the propagation
/// phase registered. At most one session may be open per store.
pub struct Session {
    store: Store,
    symbols: SymbolTable,
    root: Option<NodeId>,
    phase: Phase,
    provider: Box<dyn MatchProvider>,
    log_firings: bool,
}

impl Session {
    pub fn open(
        store: Store,
        symbols: SymbolTable,
        root: Option<NodeId>,
        matcher: MatcherKind,
    ) -> Result<Session, PropagateError> {
        if !store.claim_marker(SESSION_MARKER) {
            return Err(PropagateError::SessionExists);
        }
        let phase = propagation_phase();
        let lib = propagation_library();
        let registered: Vec<&str> = phase.precondition_names();
        let provider: Box<dyn MatchProvider> = match matcher {
            MatcherKind::Incremental => {
                let network = compile(&registered, &lib)?;
                Box::new(Matcher::attach(network, &store))
            }
            MatcherKind::Reference => {
                Box::new(ReferenceProvider::new(&store, &lib, &registered))
            }
        };
        Ok(Session {
            store,
            symbols,
            root,
            phase,
            provider,
            log_firings: false,
        })
    }

    pub fn set_log_firings(&mut self, on: bool) {
        self.log_firings = on;
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    /// The statechart root, if the transformation designated one and it is
    /// still live.
    pub fn root(&self) -> Option<NodeId> {
        self.root.filter(|&r| self.store.contains(r))
    }

    /// Current propagation activations; empty at fixpoint.
    pub fn agenda(&self) -> Vec<(String, Vec<NodeId>)> {
        crate::engine::agenda_snapshot(&*self.provider, &self.phase)
            .expect("propagation patterns are registered")
    }

    fn apply_command(&mut self, command: &ChangeCommand) -> Result<(), PropagateError> {
        match command {
            ChangeCommand::AddPlace { label, name } => self.add_element(PLACE, label, name),
            ChangeCommand::AddTransition { label, name } => {
                self.add_element(TRANSITION, label, name)
            }
            ChangeCommand::RemovePlace { label } => self.remove_element(PLACE, label),
            ChangeCommand::RemoveTransition { label } => self.remove_element(TRANSITION, label),
            ChangeCommand::RenamePlace { label, name } => self.rename_element(PLACE, label, name),
            ChangeCommand::RenameTransition { label, name } => {
                self.rename_element(TRANSITION, label, name)
            }
        }
    }

    fn add_element(
        &mut self,
        ty: crate::store::NodeType,
        label: &str,
        name: &str,
    ) -> Result<(), PropagateError> {
        if self.symbols.resolve(label).is_some() {
            return Err(PropagateError::DuplicateLabel(label.to_string()));
        }
        let id = self.store.create_node(ty);
        self.store.set_attr(id, NAME, name).unwrap();
        self.symbols.insert(label, id);
        Ok(())
    }

    fn resolve(&self, ty: crate::store::NodeType, label: &str) -> Result<NodeId, PropagateError> {
        let id = self
            .symbols
            .resolve(label)
            .ok_or_else(|| PropagateError::UnknownLabel(label.to_string()))?;
        if self.store.node_type(id) != Some(ty) {
            return Err(PropagateError::UnknownLabel(label.to_string()));
        }
        Ok(id)
    }

    fn remove_element(
        &mut self,
        ty: crate::store::NodeType,
        label: &str,
    ) -> Result<(), PropagateError> {
        let id = self.resolve(ty, label)?;
        self.store.delete_node(id).unwrap();
        self.symbols.remove_label(label);
        Ok(())
    }

    fn rename_element(
        &mut self,
        ty: crate::store::NodeType,
        label: &str,
        name: &str,
    ) -> Result<(), PropagateError> {
        let id = self.resolve(ty, label)?;
        self.store.set_attr(id, NAME, name).unwrap();
        Ok(())
    }

    /// Applies each command and runs the propagation phase to fixpoint after
    /// it; returns the concatenated firing log.
    pub fn propagate(&mut self, commands: &[ChangeCommand]) -> Result<FiringLog, PropagateError> {
        self.propagate_with(commands, |_, _, _| Ok(()))
    }

    /// Like [`Session::propagate`], invoking `after_each` once per command at
    /// its fixpoint — the hook snapshot writers attach to.
    pub fn propagate_with(
        &mut self,
        commands: &[ChangeCommand],
        mut after_each: impl FnMut(&Session, usize, &ChangeCommand) -> Result<(), PropagateError>,
    ) -> Result<FiringLog, PropagateError> {
        let mut log = FiringLog::default();
        for (index, command) in commands.iter().enumerate() {
            self.apply_command(command)?;
            let opts = EngineOptions {
                limit: 10 * model_size(&self.store).max(1) as u64,
                log_firings: self.log_firings,
                after_firing: None,
            };
            let mut run = PhaseRun::new(&self.phase, &self.store, opts);
            run.run(&mut self.provider)?;
            log.extend(run.into_log());
            after_each(self, index, command)?;
        }
        Ok(log)
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.store.release_marker(SESSION_MARKER);
    }
}
