//! Bridging documents and live stores: populating a store from a net
//! document, extracting the three result documents from a transformed store,
//! and loading a full model (net + statechart + trace) back for propagation.

use std::collections::BTreeMap;

use pn2sc_core::models::{
    StatechartView, TraceView, AND_STATE, BASIC, CONTAINS, HYPER_EDGE, H_SOURCE, H_TARGET, NAME,
    OR_STATE, PLACE, PLACE_TRACE, POST_ARC, PRE_ARC, TRACE_BASIC, TRACE_HEDGE, TRACE_OR,
    TRACE_PLACE, TRACE_TRAN, TRAN_TRACE, TRANSITION,
};
use pn2sc_core::store::{NodeId, NodeType, Store};
use pn2sc_core::symbols::SymbolTable;

use crate::doc::{
    ArcDecl, ElementDecl, HyperEdgeDecl, NetDocument, PlaceTraceDecl, StateDecl, StateKind,
    StatechartDocument, TraceDocument, TransitionTraceDecl,
};
use crate::format::FormatError;

/// Fills `store` from a parsed net document and returns the symbol table.
/// The document must have passed `parse_net` validation.
pub fn populate_net(store: &Store, doc: &NetDocument) -> SymbolTable {
    let mut symbols = SymbolTable::new();
    for p in &doc.places {
        let id = store.create_node(PLACE);
        store.set_attr(id, NAME, &p.name).unwrap();
        symbols.insert(&p.label, id);
    }
    for t in &doc.transitions {
        let id = store.create_node(TRANSITION);
        store.set_attr(id, NAME, &t.name).unwrap();
        symbols.insert(&t.label, id);
    }
    for arc in &doc.arcs {
        let from = symbols.resolve(&arc.from).unwrap();
        let to = symbols.resolve(&arc.to).unwrap();
        let kind = if store.node_type(from) == Some(PLACE) {
            PRE_ARC
        } else {
            POST_ARC
        };
        store.add_edge(kind, from, to).unwrap();
    }
    symbols
}

/// The three documents extracted from one store, sharing a single state-label
/// assignment.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExtractedModel {
    pub net: NetDocument,
    pub statechart: StatechartDocument,
    pub trace: TraceDocument,
}

fn element_label(symbols: &SymbolTable, id: NodeId) -> String {
    symbols
        .label_of(id)
        .map(str::to_string)
        .unwrap_or_else(|| format!("n{}", id.raw()))
}

/// Extracts net, statechart, and trace documents. State labels (`s0`, `s1`,
/// …) are assigned in pre-order over top-level states sorted by node id,
/// hyperedge labels (`h0`, …) by node id; both are therefore stable across
/// runs and across serialize/parse round trips.
pub fn extract_model(store: &Store, symbols: &SymbolTable, root: Option<NodeId>) -> ExtractedModel {
    let sc = StatechartView::new(store);
    let trace = TraceView::new(store);

    let mut net = NetDocument::default();
    for p in store.nodes_of(PLACE) {
        net.places.push(ElementDecl {
            label: element_label(symbols, p),
            name: store.attr(p, NAME).unwrap_or_default(),
        });
    }
    for t in store.nodes_of(TRANSITION) {
        net.transitions.push(ElementDecl {
            label: element_label(symbols, t),
            name: store.attr(t, NAME).unwrap_or_default(),
        });
    }
    for (src, dst) in store.edges_of(PRE_ARC) {
        net.arcs.push(ArcDecl {
            from: element_label(symbols, src),
            to: element_label(symbols, dst),
        });
    }
    for (src, dst) in store.edges_of(POST_ARC) {
        net.arcs.push(ArcDecl {
            from: element_label(symbols, src),
            to: element_label(symbols, dst),
        });
    }
    net.places.sort_by(|a, b| a.label.cmp(&b.label));
    net.transitions.sort_by(|a, b| a.label.cmp(&b.label));
    net.arcs
        .sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));

    let mut state_labels: BTreeMap<NodeId, String> = BTreeMap::new();
    let mut counter = 0usize;
    fn visit(
        store: &Store,
        sc: &StatechartView,
        state: NodeId,
        labels: &mut BTreeMap<NodeId, String>,
        counter: &mut usize,
    ) -> StateDecl {
        let label = format!("s{counter}");
        *counter += 1;
        labels.insert(state, label.clone());
        let kind = match store.node_type(state) {
            Some(ty) if ty == BASIC => StateKind::Basic,
            Some(ty) if ty == OR_STATE => StateKind::Or,
            Some(ty) if ty == AND_STATE => StateKind::And,
            other => unreachable!("state {state} has non-state type {other:?}"),
        };
        StateDecl {
            label,
            kind,
            name: store.attr(state, NAME).unwrap_or_default(),
            children: sc
                .children(state)
                .into_iter()
                .map(|c| visit(store, sc, c, labels, counter))
                .collect(),
        }
    }

    let mut statechart = StatechartDocument::default();
    for top in sc.top_level() {
        let decl = visit(store, &sc, top, &mut state_labels, &mut counter);
        statechart.top.push(decl.label.clone());
        statechart.states.push(decl);
    }
    for (i, h) in sc.hyperedges().into_iter().enumerate() {
        let label = format!("h{i}");
        let mut sources: Vec<String> = sc
            .hyperedge_sources(h)
            .into_iter()
            .map(|b| state_labels[&b].clone())
            .collect();
        let mut targets: Vec<String> = sc
            .hyperedge_targets(h)
            .into_iter()
            .map(|b| state_labels[&b].clone())
            .collect();
        sources.sort();
        targets.sort();
        statechart.hyperedges.push(HyperEdgeDecl {
            label,
            name: store.attr(h, NAME).unwrap_or_default(),
            sources,
            targets,
        });
    }
    statechart.root = root
        .filter(|r| store.contains(*r))
        .and_then(|r| state_labels.get(&r).cloned());

    let mut trace_doc = TraceDocument::default();
    for p in store.nodes_of(PLACE) {
        if let (Some(or), Some(basic)) = (trace.equiv(p), trace.basic_of(p)) {
            trace_doc.places.push(PlaceTraceDecl {
                place: element_label(symbols, p),
                or_state: state_labels[&or].clone(),
                basic: state_labels[&basic].clone(),
            });
        }
    }
    let hedge_labels: BTreeMap<NodeId, String> = sc
        .hyperedges()
        .into_iter()
        .enumerate()
        .map(|(i, h)| (h, format!("h{i}")))
        .collect();
    for t in store.nodes_of(TRANSITION) {
        if let Some(h) = trace.hedge_of(t) {
            trace_doc.transitions.push(TransitionTraceDecl {
                transition: element_label(symbols, t),
                hyperedge: hedge_labels[&h].clone(),
            });
        }
    }
    trace_doc.places.sort_by(|a, b| a.place.cmp(&b.place));
    trace_doc
        .transitions
        .sort_by(|a, b| a.transition.cmp(&b.transition));

    ExtractedModel {
        net,
        statechart,
        trace: trace_doc,
    }
}

/// Store, symbol table, and root reference reconstructed from serialized
/// documents; the starting point of a propagation session.
pub struct LoadedModel {
    pub store: Store,
    pub symbols: SymbolTable,
    pub root: Option<NodeId>,
}

/// Rebuilds a live model from the three documents produced by a
/// transformation run.
pub fn load_model(
    net: &NetDocument,
    statechart: &StatechartDocument,
    trace: &TraceDocument,
) -> Result<LoadedModel, FormatError> {
    let store = Store::new();
    let symbols = populate_net(&store, net);

    let mut states: BTreeMap<String, NodeId> = BTreeMap::new();
    fn build(
        store: &Store,
        decl: &StateDecl,
        parent: Option<NodeId>,
        states: &mut BTreeMap<String, NodeId>,
    ) {
        let ty: NodeType = match decl.kind {
            StateKind::Basic => BASIC,
            StateKind::Or => OR_STATE,
            StateKind::And => AND_STATE,
        };
        let id = store.create_node(ty);
        store.set_attr(id, NAME, &decl.name).unwrap();
        if let Some(parent) = parent {
            store.add_edge(CONTAINS, parent, id).unwrap();
        }
        states.insert(decl.label.clone(), id);
        for child in &decl.children {
            build(store, child, Some(id), states);
        }
    }
    for top in &statechart.states {
        build(&store, top, None, &mut states);
    }

    let mut hedges: BTreeMap<String, NodeId> = BTreeMap::new();
    for h in &statechart.hyperedges {
        let id = store.create_node(HYPER_EDGE);
        store.set_attr(id, NAME, &h.name).unwrap();
        for source in &h.sources {
            let b = states
                .get(source)
                .ok_or_else(|| FormatError::UnknownLabel(source.clone()))?;
            store.add_edge(H_SOURCE, id, *b).unwrap();
        }
        for target in &h.targets {
            let b = states
                .get(target)
                .ok_or_else(|| FormatError::UnknownLabel(target.clone()))?;
            store.add_edge(H_TARGET, id, *b).unwrap();
        }
        hedges.insert(h.label.clone(), id);
    }

    for entry in &trace.places {
        let place = symbols
            .resolve(&entry.place)
            .ok_or_else(|| FormatError::UnknownLabel(entry.place.clone()))?;
        let or = states
            .get(&entry.or_state)
            .ok_or_else(|| FormatError::UnknownLabel(entry.or_state.clone()))?;
        let basic = states
            .get(&entry.basic)
            .ok_or_else(|| FormatError::UnknownLabel(entry.basic.clone()))?;
        let tr = store.create_node(PLACE_TRACE);
        store.add_edge(TRACE_PLACE, tr, place).unwrap();
        store.add_edge(TRACE_OR, tr, *or).unwrap();
        store.add_edge(TRACE_BASIC, tr, *basic).unwrap();
    }
    for entry in &trace.transitions {
        let transition = symbols
            .resolve(&entry.transition)
            .ok_or_else(|| FormatError::UnknownLabel(entry.transition.clone()))?;
        let h = hedges
            .get(&entry.hyperedge)
            .ok_or_else(|| FormatError::UnknownLabel(entry.hyperedge.clone()))?;
        let tr = store.create_node(TRAN_TRACE);
        store.add_edge(TRACE_TRAN, tr, transition).unwrap();
        store.add_edge(TRACE_HEDGE, tr, *h).unwrap();
    }

    let root = match &statechart.root {
        Some(label) => Some(
            *states
                .get(label)
                .ok_or_else(|| FormatError::UnknownLabel(label.clone()))?,
        ),
        None => None,
    };

    Ok(LoadedModel {
        store,
        symbols,
        root,
    })
}
