//! Line-oriented text formats for nets, statecharts, traces, and change
//! scripts. Serialization orders everything deterministically (sorted labels,
//! traversal-assigned state labels), so equal models produce byte-identical
//! files. `-` stands for an empty name or an absent reference.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use pn2sc_core::propagate::ChangeCommand;
use thiserror::Error;

use crate::doc::{
    ArcDecl, ElementDecl, HyperEdgeDecl, NetDocument, PlaceTraceDecl, StateDecl, StateKind,
    StatechartDocument, TraceDocument, TransitionTraceDecl,
};

#[derive(Error, Debug, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate label {label:?}")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: arc {from:?} -> {to:?} {reason}")]
    DanglingArc {
        line: usize,
        from: String,
        to: String,
        reason: String,
    },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
}

fn parse_error(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

const EMPTY: &str = "-";

fn encode_name(name: &str) -> &str {
    if name.is_empty() {
        EMPTY
    } else {
        name
    }
}

fn decode_name(token: &str) -> String {
    if token == EMPTY {
        String::new()
    } else {
        token.to_string()
    }
}

/// Lines with content: (1-based line number, whitespace-split tokens).
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return None;
        }
        Some((i + 1, line.split_whitespace().collect()))
    })
}

// ---- nets ---------------------------------------------------------------------

pub fn parse_net(text: &str) -> Result<NetDocument, FormatError> {
    let mut doc = NetDocument::default();
    let mut kinds: BTreeMap<String, (usize, bool)> = BTreeMap::new(); // label -> (line, is_place)
    let mut arcs_seen: BTreeSet<(String, String)> = BTreeSet::new();
    let mut arc_lines = Vec::new();
    for (line, tokens) in content_lines(text) {
        match tokens.as_slice() {
            ["place", label, name] => {
                if kinds.insert(label.to_string(), (line, true)).is_some() {
                    return Err(FormatError::DuplicateLabel {
                        line,
                        label: label.to_string(),
                    });
                }
                doc.places.push(ElementDecl {
                    label: label.to_string(),
                    name: decode_name(name),
                });
            }
            ["transition", label, name] => {
                if kinds.insert(label.to_string(), (line, false)).is_some() {
                    return Err(FormatError::DuplicateLabel {
                        line,
                        label: label.to_string(),
                    });
                }
                doc.transitions.push(ElementDecl {
                    label: label.to_string(),
                    name: decode_name(name),
                });
            }
            ["arc", from, to] => {
                doc.arcs.push(ArcDecl {
                    from: from.to_string(),
                    to: to.to_string(),
                });
                arc_lines.push(line);
            }
            _ => {
                return Err(parse_error(
                    line,
                    format!(
                        "expected 'place <label> <name>', 'transition <label> <name>' or 'arc <from> <to>', got {:?}",
                        tokens.join(" ")
                    ),
                ))
            }
        }
    }
    for (arc, &line) in doc.arcs.iter().zip(arc_lines.iter()) {
        let from = kinds
            .get(&arc.from)
            .ok_or_else(|| FormatError::DanglingArc {
                line,
                from: arc.from.clone(),
                to: arc.to.clone(),
                reason: "references an unknown source".into(),
            })?;
        let to = kinds.get(&arc.to).ok_or_else(|| FormatError::DanglingArc {
            line,
            from: arc.from.clone(),
            to: arc.to.clone(),
            reason: "references an unknown target".into(),
        })?;
        if from.1 == to.1 {
            return Err(FormatError::DanglingArc {
                line,
                from: arc.from.clone(),
                to: arc.to.clone(),
                reason: "must connect a place and a transition".into(),
            });
        }
        if !arcs_seen.insert((arc.from.clone(), arc.to.clone())) {
            return Err(FormatError::DanglingArc {
                line,
                from: arc.from.clone(),
                to: arc.to.clone(),
                reason: "is declared twice".into(),
            });
        }
    }
    Ok(doc)
}

pub fn serialize_net(doc: &NetDocument) -> String {
    let mut out = String::new();
    let mut places = doc.places.clone();
    places.sort_by(|a, b| a.label.cmp(&b.label));
    for p in &places {
        let _ = writeln!(out, "place {} {}", p.label, encode_name(&p.name));
    }
    let mut transitions = doc.transitions.clone();
    transitions.sort_by(|a, b| a.label.cmp(&b.label));
    for t in &transitions {
        let _ = writeln!(out, "transition {} {}", t.label, encode_name(&t.name));
    }
    let mut arcs = doc.arcs.clone();
    arcs.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
    for a in &arcs {
        let _ = writeln!(out, "arc {} {}", a.from, a.to);
    }
    out
}

// ---- statecharts ---------------------------------------------------------------

pub fn serialize_statechart(doc: &StatechartDocument) -> String {
    let mut out = String::new();
    fn write_state(out: &mut String, state: &StateDecl, parent: &str) {
        let _ = writeln!(
            out,
            "state {} {} {} {}",
            state.label,
            state.kind.keyword(),
            encode_name(&state.name),
            parent
        );
        for child in &state.children {
            write_state(out, child, &state.label);
        }
    }
    for state in &doc.states {
        write_state(&mut out, state, EMPTY);
    }
    let csv = |labels: &[String]| {
        if labels.is_empty() {
            EMPTY.to_string()
        } else {
            labels.join(",")
        }
    };
    for h in &doc.hyperedges {
        let _ = writeln!(
            out,
            "hyperedge {} {} {} {}",
            h.label,
            encode_name(&h.name),
            csv(&h.sources),
            csv(&h.targets)
        );
    }
    let _ = writeln!(out, "root {}", doc.root.as_deref().unwrap_or(EMPTY));
    let _ = writeln!(out, "top {}", csv(&doc.top));
    out
}

pub fn parse_statechart(text: &str) -> Result<StatechartDocument, FormatError> {
    let mut doc = StatechartDocument::default();
    // label -> path of child indices from a top-level state
    let mut paths: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut known: BTreeSet<String> = BTreeSet::new();
    let mut saw_root = false;
    let mut top_written = false;

    let csv = |token: &str| -> Vec<String> {
        if token == EMPTY {
            Vec::new()
        } else {
            token.split(',').map(str::to_string).collect()
        }
    };

    for (line, tokens) in content_lines(text) {
        match tokens.as_slice() {
            ["state", label, kind, name, parent] => {
                let kind = match *kind {
                    "BASIC" => StateKind::Basic,
                    "OR" => StateKind::Or,
                    "AND" => StateKind::And,
                    other => return Err(parse_error(line, format!("unknown state kind {other:?}"))),
                };
                if !known.insert(label.to_string()) {
                    return Err(FormatError::DuplicateLabel {
                        line,
                        label: label.to_string(),
                    });
                }
                let decl = StateDecl {
                    label: label.to_string(),
                    kind,
                    name: decode_name(name),
                    children: Vec::new(),
                };
                let path = if *parent == EMPTY {
                    doc.states.push(decl);
                    vec![doc.states.len() - 1]
                } else {
                    let parent_path = paths
                        .get(*parent)
                        .ok_or_else(|| parse_error(line, format!("unknown parent {parent:?}")))?
                        .clone();
                    let mut node = &mut doc.states[parent_path[0]];
                    for &idx in &parent_path[1..] {
                        node = &mut node.children[idx];
                    }
                    node.children.push(decl);
                    let mut path = parent_path;
                    path.push(node.children.len() - 1);
                    path
                };
                paths.insert(label.to_string(), path);
            }
            ["hyperedge", label, name, sources, targets] => {
                for endpoint in csv(sources).iter().chain(csv(targets).iter()) {
                    if !known.contains(endpoint) {
                        return Err(parse_error(
                            line,
                            format!("hyperedge endpoint {endpoint:?} is not a state"),
                        ));
                    }
                }
                doc.hyperedges.push(HyperEdgeDecl {
                    label: label.to_string(),
                    name: decode_name(name),
                    sources: csv(sources),
                    targets: csv(targets),
                });
            }
            ["root", label] => {
                saw_root = true;
                if *label != EMPTY {
                    if !known.contains(*label) {
                        return Err(parse_error(line, format!("unknown root {label:?}")));
                    }
                    doc.root = Some(label.to_string());
                }
            }
            ["top", labels] => {
                top_written = true;
                doc.top = csv(labels);
            }
            _ => {
                return Err(parse_error(
                    line,
                    format!("unrecognized statechart line {:?}", tokens.join(" ")),
                ))
            }
        }
    }
    if !saw_root {
        return Err(parse_error(0, "missing 'root' line"));
    }
    if !top_written {
        return Err(parse_error(0, "missing 'top' line"));
    }
    Ok(doc)
}

// ---- traces --------------------------------------------------------------------

pub fn serialize_trace(doc: &TraceDocument) -> String {
    let mut out = String::new();
    let mut places = doc.places.clone();
    places.sort_by(|a, b| a.place.cmp(&b.place));
    for p in &places {
        let _ = writeln!(out, "place {} {} {}", p.place, p.or_state, p.basic);
    }
    let mut transitions = doc.transitions.clone();
    transitions.sort_by(|a, b| a.transition.cmp(&b.transition));
    for t in &transitions {
        let _ = writeln!(out, "transition {} {}", t.transition, t.hyperedge);
    }
    out
}

pub fn parse_trace(text: &str) -> Result<TraceDocument, FormatError> {
    let mut doc = TraceDocument::default();
    for (line, tokens) in content_lines(text) {
        match tokens.as_slice() {
            ["place", place, or_state, basic] => doc.places.push(PlaceTraceDecl {
                place: place.to_string(),
                or_state: or_state.to_string(),
                basic: basic.to_string(),
            }),
            ["transition", transition, hyperedge] => doc.transitions.push(TransitionTraceDecl {
                transition: transition.to_string(),
                hyperedge: hyperedge.to_string(),
            }),
            _ => {
                return Err(parse_error(
                    line,
                    format!("unrecognized trace line {:?}", tokens.join(" ")),
                ))
            }
        }
    }
    Ok(doc)
}

// ---- change scripts ------------------------------------------------------------

/// One command per line: `add-place <label> <name>`, `remove-place <label>`,
/// `rename-place <label> <name>`, and the `-transition` counterparts.
pub fn parse_change_script(text: &str) -> Result<Vec<ChangeCommand>, FormatError> {
    let mut commands = Vec::new();
    for (line, tokens) in content_lines(text) {
        let command = match tokens.as_slice() {
            ["add-place", label, name] => ChangeCommand::AddPlace {
                label: label.to_string(),
                name: decode_name(name),
            },
            ["remove-place", label] => ChangeCommand::RemovePlace {
                label: label.to_string(),
            },
            ["rename-place", label, name] => ChangeCommand::RenamePlace {
                label: label.to_string(),
                name: decode_name(name),
            },
            ["add-transition", label, name] => ChangeCommand::AddTransition {
                label: label.to_string(),
                name: decode_name(name),
            },
            ["remove-transition", label] => ChangeCommand::RemoveTransition {
                label: label.to_string(),
            },
            ["rename-transition", label, name] => ChangeCommand::RenameTransition {
                label: label.to_string(),
                name: decode_name(name),
            },
            _ => {
                return Err(parse_error(
                    line,
                    format!("unrecognized change command {:?}", tokens.join(" ")),
                ))
            }
        };
        commands.push(command);
    }
    Ok(commands)
}
