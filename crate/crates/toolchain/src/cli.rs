//! Command-line interface. Exit codes: 0 success, 1 usage error, 2 data
//! error (parsing, labels, IO), 3 engine error (divergence, invariants).

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use pn2sc_core::models::model_size;
use pn2sc_core::pn2sc::{transform, MatcherKind, TransformOptions};
use pn2sc_core::propagate::{PropagateError, Session};
use pn2sc_core::store::Store;
use pn2sc_core::symbols::SymbolTable;
use pn2sc_core::NodeId;

use crate::bench::{run_bench, BenchError};
use crate::format::{
    parse_change_script, parse_net, parse_statechart, parse_trace, serialize_net,
    serialize_statechart, serialize_trace,
};
use crate::generate::generate_sp;
use crate::model::{extract_model, load_model, populate_net, ExtractedModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_ENGINE: i32 = 3;

#[derive(Parser)]
#[command(
    name = "pn2sc",
    about = "Petri-net to statechart transformation toolchain",
    disable_help_flag = false
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum MatcherArg {
    Incremental,
    Reference,
}

impl From<MatcherArg> for MatcherKind {
    fn from(arg: MatcherArg) -> MatcherKind {
        match arg {
            MatcherArg::Incremental => MatcherKind::Incremental,
            MatcherArg::Reference => MatcherKind::Reference,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Transform a Petri net into a statechart, trace, and reduced net.
    Transform {
        /// Input .net file.
        input: PathBuf,
        /// Output directory for reduced.net, statechart.sc, trace.map.
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = MatcherArg::Incremental)]
        matcher: MatcherArg,
        /// Abort after this many rule firings.
        #[arg(long)]
        max_firings: Option<u64>,
        /// Print one line per rule firing to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Generate a series-parallel benchmark net.
    Generate {
        /// Number of fork-join blocks.
        #[arg(long)]
        sp: u64,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
    /// Run the scaling benchmark and write a CSV.
    Bench {
        /// Block counts to run, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<u64>,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = MatcherArg::Incremental)]
        matcher: MatcherArg,
    },
    /// Apply a change script to a transformed model and propagate.
    Propagate {
        /// Directory holding reduced.net, statechart.sc, trace.map.
        indir: PathBuf,
        /// Change script file.
        script: PathBuf,
        /// Write model snapshots here: initial plus one per command.
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MatcherArg::Incremental)]
        matcher: MatcherArg,
    },
}

/// Parses and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints help/version through the same error path
            let _ = err.print();
            return if err.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Transform {
            input,
            out,
            matcher,
            max_firings,
            trace,
        } => cmd_transform(&input, &out, matcher.into(), max_firings, trace),
        Command::Generate { sp, out } => cmd_generate(sp, &out),
        Command::Bench {
            sizes,
            csv,
            matcher,
        } => cmd_bench(&sizes, &csv, matcher.into()),
        Command::Propagate {
            indir,
            script,
            snapshot_dir,
            matcher,
        } => cmd_propagate(&indir, &script, snapshot_dir.as_deref(), matcher.into()),
    }
}

fn fail(code: i32, message: impl std::fmt::Display) -> i32 {
    eprintln!("pn2sc: {message}");
    code
}

fn write_outputs(
    dir: &Path,
    store: &Store,
    symbols: &SymbolTable,
    root: Option<NodeId>,
) -> std::io::Result<ExtractedModel> {
    let model = extract_model(store, symbols, root);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("reduced.net"), serialize_net(&model.net))?;
    std::fs::write(
        dir.join("statechart.sc"),
        serialize_statechart(&model.statechart),
    )?;
    std::fs::write(dir.join("trace.map"), serialize_trace(&model.trace))?;
    Ok(model)
}

fn cmd_transform(
    input: &Path,
    out: &Path,
    matcher: MatcherKind,
    max_firings: Option<u64>,
    trace: bool,
) -> i32 {
    let read_started = std::time::Instant::now();
    let text = match std::fs::read_to_string(input) {
        Ok(text) => text,
        Err(err) => return fail(EXIT_DATA, format!("{}: {err}", input.display())),
    };
    let doc = match parse_net(&text) {
        Ok(doc) => doc,
        Err(err) => return fail(EXIT_DATA, format!("{}: {err}", input.display())),
    };
    let store = Store::new();
    let symbols = populate_net(&store, &doc);
    let read_seconds = read_started.elapsed().as_secs_f64();
    let input_size = model_size(&store);

    let opts = TransformOptions {
        matcher,
        max_firings,
        log_firings: trace,
        validate_each_firing: false,
    };
    let mut result = match transform(&store, &opts) {
        Ok(result) => result,
        Err(err) => return fail(EXIT_ENGINE, err),
    };
    result.read_seconds = read_seconds;

    if let Err(err) = write_outputs(out, &store, &symbols, result.root) {
        return fail(EXIT_DATA, format!("{}: {err}", out.display()));
    }
    println!(
        "read {} elements in {:.3}s; {} firings in {:.3}s ({} and, {} or)",
        input_size,
        result.read_seconds,
        result.firing_log.len(),
        result.transform_seconds,
        result.firing_log.count_for("and"),
        result.firing_log.count_for("or"),
    );
    println!(
        "reduced net: {} places, {} transitions; reducible: {} ({} top-level state{})",
        result.place_count,
        result.transition_count,
        result.reducible,
        result.top_level.len(),
        if result.top_level.len() == 1 { "" } else { "s" },
    );
    EXIT_OK
}

fn cmd_generate(sp: u64, out: &Path) -> i32 {
    let doc = generate_sp(sp);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        if let Err(err) = std::fs::create_dir_all(parent) {
            return fail(EXIT_DATA, format!("{}: {err}", out.display()));
        }
    }
    match std::fs::write(out, serialize_net(&doc)) {
        Ok(()) => {
            println!(
                "wrote sp({sp}): {} places, {} transitions, {} arcs",
                doc.places.len(),
                doc.transitions.len(),
                doc.arcs.len()
            );
            EXIT_OK
        }
        Err(err) => fail(EXIT_DATA, format!("{}: {err}", out.display())),
    }
}

fn cmd_bench(sizes: &[u64], csv: &Path, matcher: MatcherKind) -> i32 {
    match run_bench(sizes, matcher, csv) {
        Ok(records) => {
            for r in &records {
                println!("{}", r.csv_row());
            }
            EXIT_OK
        }
        Err(BenchError::Transform(err)) => fail(EXIT_ENGINE, err),
        Err(BenchError::NotReducible(n)) => {
            fail(EXIT_ENGINE, format!("sp({n}) did not fully reduce"))
        }
        Err(err) => fail(EXIT_DATA, err),
    }
}

fn read_model_dir(indir: &Path) -> Result<crate::model::LoadedModel, String> {
    let read = |name: &str| {
        std::fs::read_to_string(indir.join(name))
            .map_err(|err| format!("{}: {err}", indir.join(name).display()))
    };
    let net = parse_net(&read("reduced.net")?).map_err(|e| format!("reduced.net: {e}"))?;
    let statechart =
        parse_statechart(&read("statechart.sc")?).map_err(|e| format!("statechart.sc: {e}"))?;
    let trace = parse_trace(&read("trace.map")?).map_err(|e| format!("trace.map: {e}"))?;
    load_model(&net, &statechart, &trace).map_err(|e| format!("loading model: {e}"))
}

/// Writes `<dir>/<tag>.net`, `<tag>.sc`, `<tag>.map` from a live session.
pub fn snapshot(session: &Session, dir: &Path, tag: &str) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let model = extract_model(session.store(), session.symbols(), session.root());
    let paths = vec![
        dir.join(format!("{tag}.net")),
        dir.join(format!("{tag}.sc")),
        dir.join(format!("{tag}.map")),
    ];
    std::fs::write(&paths[0], serialize_net(&model.net))?;
    std::fs::write(&paths[1], serialize_statechart(&model.statechart))?;
    std::fs::write(&paths[2], serialize_trace(&model.trace))?;
    Ok(paths)
}

fn cmd_propagate(
    indir: &Path,
    script: &Path,
    snapshot_dir: Option<&Path>,
    matcher: MatcherKind,
) -> i32 {
    let loaded = match read_model_dir(indir) {
        Ok(loaded) => loaded,
        Err(message) => return fail(EXIT_DATA, message),
    };
    let script_text = match std::fs::read_to_string(script) {
        Ok(text) => text,
        Err(err) => return fail(EXIT_DATA, format!("{}: {err}", script.display())),
    };
    let commands = match parse_change_script(&script_text) {
        Ok(commands) => commands,
        Err(err) => return fail(EXIT_DATA, format!("{}: {err}", script.display())),
    };

    let mut session = match Session::open(loaded.store, loaded.symbols, loaded.root, matcher) {
        Ok(session) => session,
        Err(err) => return fail(EXIT_ENGINE, err),
    };
    if let Some(dir) = snapshot_dir {
        if let Err(err) = snapshot(&session, dir, "initial") {
            return fail(EXIT_DATA, format!("{}: {err}", dir.display()));
        }
    }
    let log = session.propagate_with(&commands, |session, index, _| {
        if let Some(dir) = snapshot_dir {
            snapshot(session, dir, &format!("step{index:03}"))
                .map_err(|err| PropagateError::Snapshot(err.to_string()))?;
        }
        Ok(())
    });
    match log {
        Ok(log) => {
            println!(
                "applied {} command{}; {} propagation firing{}",
                commands.len(),
                if commands.len() == 1 { "" } else { "s" },
                log.len(),
                if log.len() == 1 { "" } else { "s" },
            );
            EXIT_OK
        }
        Err(err @ (PropagateError::UnknownLabel(_) | PropagateError::DuplicateLabel(_))) => {
            fail(EXIT_DATA, err)
        }
        Err(PropagateError::Snapshot(message)) => fail(EXIT_DATA, message),
        Err(err) => fail(EXIT_ENGINE, err),
    }
}
