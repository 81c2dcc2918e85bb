//! Scaling benchmark harness: generates sp(N) nets, measures read time and
//! transform time separately, verifies reducibility, and appends CSV rows as
//! it goes so a failing size still leaves the completed rows behind.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use pn2sc_core::models::model_size;
use pn2sc_core::pn2sc::{transform, MatcherKind, TransformOptions};
use pn2sc_core::store::Store;
use thiserror::Error;

use crate::format::{parse_net, serialize_net, FormatError};
use crate::generate::generate_sp;
use crate::model::populate_net;

pub const CSV_HEADER: &str = "name,size,transform_s,read_s";

#[derive(Clone, PartialEq, Debug)]
pub struct BenchRecord {
    pub name: String,
    pub size: usize,
    pub transform_s: f64,
    pub read_s: f64,
}

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6}",
            self.name, self.size, self.transform_s, self.read_s
        )
    }
}

#[derive(Error, Debug)]
pub enum BenchError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Transform(#[from] pn2sc_core::pn2sc::TransformError),
    #[error("sp({0}) did not reduce to a single place")]
    NotReducible(u64),
}

/// One benchmark run: generate, write to a scratch file, read + parse
/// (timed), transform (timed), verify reducibility.
pub fn bench_one(n: u64, matcher: MatcherKind, scratch: &Path) -> Result<BenchRecord, BenchError> {
    let doc = generate_sp(n);
    std::fs::write(scratch, serialize_net(&doc))?;

    let read_started = Instant::now();
    let text = std::fs::read_to_string(scratch)?;
    let parsed = parse_net(&text)?;
    let store = Store::new();
    populate_net(&store, &parsed);
    let read_s = read_started.elapsed().as_secs_f64();

    let size = model_size(&store);
    let result = transform(
        &store,
        &TransformOptions {
            matcher,
            ..Default::default()
        },
    )?;
    if !result.reducible {
        return Err(BenchError::NotReducible(n));
    }
    Ok(BenchRecord {
        name: format!("sp{n}"),
        size,
        transform_s: result.transform_seconds,
        read_s,
    })
}

/// Runs the benchmark for each size, appending one CSV row per size to
/// `csv_path` (header first) and flushing after every row.
pub fn run_bench(
    sizes: &[u64],
    matcher: MatcherKind,
    csv_path: &Path,
) -> Result<Vec<BenchRecord>, BenchError> {
    let file = File::create(csv_path)?;
    let mut writer = BufWriter::new(file);
    writeln!(writer, "{CSV_HEADER}")?;
    writer.flush()?;

    let scratch = scratch_path(csv_path);
    let mut records = Vec::new();
    for &n in sizes {
        let record = bench_one(n, matcher, &scratch)?;
        writeln!(writer, "{}", record.csv_row())?;
        writer.flush()?;
        records.push(record);
    }
    let _ = std::fs::remove_file(&scratch);
    Ok(records)
}

fn scratch_path(csv_path: &Path) -> PathBuf {
    let mut path = csv_path.to_path_buf();
    path.set_extension("net.tmp");
    path
}
