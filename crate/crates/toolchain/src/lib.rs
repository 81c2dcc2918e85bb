//! File formats, model generator, benchmark harness, and CLI around the
//! pn2sc engine.

pub mod bench;
pub mod cli;
pub mod doc;
pub mod format;
pub mod generate;
pub mod model;
