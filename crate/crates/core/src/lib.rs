//! Incremental graph-pattern rule engine with a Petri-net-to-statechart
//! reduction built on top of it.
//!
//! The crate is organized bottom-up:
//!
//! - [`store`] — mutable typed graph with a synchronous change-event stream;
//! - [`models`] — typed views and validators for the net, statechart, and
//!   trace models;
//! - [`pattern`] — declarative precondition IR with disjunction, negation,
//!   match counting, and check expressions;
//! - [`eval`] — brute-force reference evaluator defining pattern semantics;
//! - [`rete`] — incremental matcher maintaining match sets under change;
//! - [`engine`] — rules, phases, agenda, and the deterministic firing loop;
//! - [`pn2sc`] — the transformation itself: initialization, AND/OR reduction
//!   rules, termination, and the end-to-end pipeline;
//! - [`propagate`] — rule-based change propagation after a transformation.

pub mod engine;
pub mod eval;
pub mod models;
pub mod pattern;
pub mod pn2sc;
pub mod propagate;
pub mod rete;
pub mod store;
pub mod symbols;

pub use store::{ChangeEvent, EdgeKind, NodeId, NodeType, Store, StoreError};
