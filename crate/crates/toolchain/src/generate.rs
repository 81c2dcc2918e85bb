//! Deterministic series-parallel net generator used by the scaling benchmark.

use crate::doc::{ArcDecl, ElementDecl, NetDocument};

/// Builds the net c0 → (tf1 → {a1, b1} → tj1) → c1 → … with `n` fork-join
/// blocks: 1 + 3n places, 2n transitions, 6n arcs — model size 1 + 11n.
/// A pure function of `n`.
pub fn generate_sp(n: u64) -> NetDocument {
    let mut doc = NetDocument::default();
    let element = |label: String| ElementDecl {
        name: label.clone(),
        label,
    };
    doc.places.push(element("c0".to_string()));
    for i in 1..=n {
        doc.places.push(element(format!("a{i}")));
        doc.places.push(element(format!("b{i}")));
        doc.places.push(element(format!("c{i}")));
    }
    for i in 1..=n {
        doc.transitions.push(element(format!("tf{i}")));
        doc.transitions.push(element(format!("tj{i}")));
    }
    let arc = |from: String, to: String| ArcDecl { from, to };
    for i in 1..=n {
        doc.arcs.push(arc(format!("c{}", i - 1), format!("tf{i}")));
        doc.arcs.push(arc(format!("tf{i}"), format!("a{i}")));
        doc.arcs.push(arc(format!("tf{i}"), format!("b{i}")));
        doc.arcs.push(arc(format!("a{i}"), format!("tj{i}")));
        doc.arcs.push(arc(format!("b{i}"), format!("tj{i}")));
        doc.arcs.push(arc(format!("tj{i}"), format!("c{i}")));
    }
    doc
}
