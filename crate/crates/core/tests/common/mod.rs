//! Shared fixtures for the integration tests.
#![allow(dead_code)] // each test binary uses its own subset

use pn2sc_core::models::{NAME, PLACE, POST_ARC, PRE_ARC, TRANSITION};
use pn2sc_core::store::{NodeId, Store};

/// Fork-join net p0 → tf → {p1, p2} → tj → p3.
/// Returns (store, [p0, p1, p2, p3], [tf, tj]).
pub fn fork_join() -> (Store, [NodeId; 4], [NodeId; 2]) {
    let store = Store::new();
    let mut places = [NodeId::from_raw(0); 4];
    for (i, slot) in places.iter_mut().enumerate() {
        let p = store.create_node(PLACE);
        store.set_attr(p, NAME, &format!("p{i}")).unwrap();
        *slot = p;
    }
    let tf = store.create_node(TRANSITION);
    store.set_attr(tf, NAME, "tf").unwrap();
    let tj = store.create_node(TRANSITION);
    store.set_attr(tj, NAME, "tj").unwrap();
    store.add_edge(PRE_ARC, places[0], tf).unwrap();
    store.add_edge(POST_ARC, tf, places[1]).unwrap();
    store.add_edge(POST_ARC, tf, places[2]).unwrap();
    store.add_edge(PRE_ARC, places[1], tj).unwrap();
    store.add_edge(PRE_ARC, places[2], tj).unwrap();
    store.add_edge(POST_ARC, tj, places[3]).unwrap();
    (store, places, [tf, tj])
}

/// Chain net p0 → t → p1. Returns (store, [p0, p1], t).
pub fn chain2() -> (Store, [NodeId; 2], NodeId) {
    let store = Store::new();
    let p0 = store.create_node(PLACE);
    store.set_attr(p0, NAME, "p0").unwrap();
    let p1 = store.create_node(PLACE);
    store.set_attr(p1, NAME, "p1").unwrap();
    let t = store.create_node(TRANSITION);
    store.set_attr(t, NAME, "t").unwrap();
    store.add_edge(PRE_ARC, p0, t).unwrap();
    store.add_edge(POST_ARC, t, p1).unwrap();
    (store, [p0, p1], t)
}

/// Non-reducible net t1 → q1, t2 → q2, {q1, q2} → t3.
/// Returns (store, [q1, q2], [t1, t2, t3]).
pub fn non_reducible() -> (Store, [NodeId; 2], [NodeId; 3]) {
    let store = Store::new();
    let q1 = store.create_node(PLACE);
    store.set_attr(q1, NAME, "q1").unwrap();
    let q2 = store.create_node(PLACE);
    store.set_attr(q2, NAME, "q2").unwrap();
    let t1 = store.create_node(TRANSITION);
    store.set_attr(t1, NAME, "t1").unwrap();
    let t2 = store.create_node(TRANSITION);
    store.set_attr(t2, NAME, "t2").unwrap();
    let t3 = store.create_node(TRANSITION);
    store.set_attr(t3, NAME, "t3").unwrap();
    store.add_edge(POST_ARC, t1, q1).unwrap();
    store.add_edge(POST_ARC, t2, q2).unwrap();
    store.add_edge(PRE_ARC, q1, t3).unwrap();
    store.add_edge(PRE_ARC, q2, t3).unwrap();
    (store, [q1, q2], [t1, t2, t3])
}

/// Series-parallel net with N fork-join blocks, mirroring the generator:
/// c0, then per block i the places a_i, b_i, c_i and transitions tf_i
/// (c_{i-1} → {a_i, b_i}) and tj_i ({a_i, b_i} → c_i).
pub fn sp_net(store: &Store, n: usize) -> Vec<NodeId> {
    let mut all = Vec::new();
    let c0 = store.create_node(PLACE);
    store.set_attr(c0, NAME, "c0").unwrap();
    all.push(c0);
    let mut prev = c0;
    let mut blocks = Vec::new();
    for i in 1..=n {
        let a = store.create_node(PLACE);
        store.set_attr(a, NAME, &format!("a{i}")).unwrap();
        let b = store.create_node(PLACE);
        store.set_attr(b, NAME, &format!("b{i}")).unwrap();
        let c = store.create_node(PLACE);
        store.set_attr(c, NAME, &format!("c{i}")).unwrap();
        all.extend([a, b, c]);
        blocks.push((prev, a, b, c));
        prev = c;
    }
    for (i, &(from, a, b, c)) in blocks.iter().enumerate() {
        let tf = store.create_node(TRANSITION);
        store.set_attr(tf, NAME, &format!("tf{}", i + 1)).unwrap();
        let tj = store.create_node(TRANSITION);
        store.set_attr(tj, NAME, &format!("tj{}", i + 1)).unwrap();
        store.add_edge(PRE_ARC, from, tf).unwrap();
        store.add_edge(POST_ARC, tf, a).unwrap();
        store.add_edge(POST_ARC, tf, b).unwrap();
        store.add_edge(PRE_ARC, a, tj).unwrap();
        store.add_edge(PRE_ARC, b, tj).unwrap();
        store.add_edge(POST_ARC, tj, c).unwrap();
        all.extend([tf, tj]);
    }
    all
}
