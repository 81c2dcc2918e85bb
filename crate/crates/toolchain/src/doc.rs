//! Plain document representations of the three models, independent of live
//! store state. Documents are what the line-oriented file formats parse into
//! and serialize from, and what structural comparisons run on.

/// A Petri net as written in a `.net` file: labelled places and transitions
/// plus arcs between labels. Arc direction determines the kind: place →
/// transition is a pre-arc, transition → place a post-arc.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct NetDocument {
    pub places: Vec<ElementDecl>,
    pub transitions: Vec<ElementDecl>,
    pub arcs: Vec<ArcDecl>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ElementDecl {
    pub label: String,
    pub name: String,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ArcDecl {
    pub from: String,
    pub to: String,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum StateKind {
    Basic,
    Or,
    And,
}

impl StateKind {
    pub fn keyword(self) -> &'static str {
        match self {
            StateKind::Basic => "BASIC",
            StateKind::Or => "OR",
            StateKind::And => "AND",
        }
    }
}

/// A state with its nested children; labels are assigned by a deterministic
/// pre-order traversal, so they are stable across runs.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StateDecl {
    pub label: String,
    pub kind: StateKind,
    pub name: String,
    pub children: Vec<StateDecl>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HyperEdgeDecl {
    pub label: String,
    pub name: String,
    pub sources: Vec<String>,
    pub targets: Vec<String>,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct StatechartDocument {
    /// Top-level states with their subtrees.
    pub states: Vec<StateDecl>,
    pub hyperedges: Vec<HyperEdgeDecl>,
    pub root: Option<String>,
    /// Labels of the top-level states, in document order.
    pub top: Vec<String>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PlaceTraceDecl {
    pub place: String,
    pub or_state: String,
    pub basic: String,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TransitionTraceDecl {
    pub transition: String,
    pub hyperedge: String,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct TraceDocument {
    pub places: Vec<PlaceTraceDecl>,
    pub transitions: Vec<TransitionTraceDecl>,
}
