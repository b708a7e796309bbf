use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cpverif::check::check_spec;
use cpverif::corpus;
use cpverif::explore::{explore, ExploreConfig, Status};
use cpverif::export::{facts_report, to_dot, to_svg};
use cpverif::intruder::IntruderConfig;
use cpverif::tg::analyze;
use cpverif::{parse, print, ProtocolSpec};

// Writes to stdout; a closed pipe ends the program quietly.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        if write!(std::io::stdout().lock(), $($t)*).is_err() {
            std::process::exit(0);
        }
    }};
}

macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write;
        if writeln!(std::io::stdout().lock(), $($t)*).is_err() {
            std::process::exit(0);
        }
    }};
}

const OK: u8 = 0;
const VIOLATION: u8 = 1;
const USAGE: u8 = 2;
const LIMIT: u8 = 3;

#[derive(Parser)]
#[command(name = "cpverif", version, about = "Verify cryptographic protocols modelled as distributed processes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Input {
    /// Protocol file.
    file: Option<PathBuf>,
    /// Built-in protocol name (see `cpverif corpus`).
    #[arg(long, conflicts_with = "file")]
    corpus: Option<String>,
    /// Emit JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a protocol and print it in canonical form.
    Parse(Input),
    /// Build the transition graph.
    Tg {
        #[command(flatten)]
        input: Input,
        /// Drop unreachable nodes and unrealizable edges.
        #[arg(long)]
        reduce: bool,
        /// Write Graphviz output (`-` for stdout).
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Write an SVG drawing.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Print node facts as JSON.
        #[arg(long)]
        facts: bool,
    },
    /// Check goals on the reduced transition graph.
    Check(Input),
    /// Bounded exploration against an active adversary.
    Explore {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 1)]
        sessions: usize,
        #[arg(long, default_value_t = 24)]
        depth: usize,
        #[arg(long, default_value_t = 2)]
        deriv_depth: usize,
        #[arg(long, default_value_t = 2)]
        fresh_budget: u32,
        #[arg(long, default_value_t = 3_000_000)]
        max_states: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the scenario where an agent talks to itself.
        #[arg(long)]
        no_self_sessions: bool,
        /// Register the adversary as an agent with its own long-term key.
        #[arg(long)]
        identity: bool,
        /// Write the counterexample as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run built-in sanity checks.
    Selftest,
    /// List built-in protocols, or print one.
    Corpus { name: Option<String> },
}

struct Fail(u8, String);

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(USAGE, e.to_string())
    }
}

fn load(input: &Input) -> Result<ProtocolSpec, Fail> {
    match (&input.file, &input.corpus) {
        (Some(f), _) => {
            let text = std::fs::read_to_string(f).map_err(|e| Fail(USAGE, format!("{}: {e}", f.display())))?;
            parse(&text).map_err(|e| Fail(USAGE, format!("{}:{e}", f.display())))
        }
        (None, Some(n)) => Ok(corpus::load(n)?),
        (None, None) => Err(Fail(USAGE, "give a protocol file or --corpus NAME".into())),
    }
}

fn write_out(path: &PathBuf, text: &str) -> Result<(), Fail> {
    if path.as_os_str() == "-" {
        out!("{text}");
        Ok(())
    } else {
        std::fs::write(path, text).map_err(|e| Fail(USAGE, format!("{}: {e}", path.display())))
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn run(cli: Cli) -> Result<u8, Fail> {
    match cli.cmd {
        Cmd::Parse(input) => {
            let spec = load(&input)?;
            if input.json {
                let procs: Vec<_> = spec
                    .processes
                    .iter()
                    .map(|p| serde_json::json!({"name": &*p.name, "replicable": p.replicable, "nodes": spec.template(p).nodes}))
                    .collect();
                outln!("{}", json(&serde_json::json!({"protocol": &*spec.name, "processes": procs, "goals": spec.goals.len()})));
            } else {
                out!("{}", print(&spec));
            }
            Ok(OK)
        }
        Cmd::Tg {
            input,
            reduce,
            dot,
            svg,
            facts,
        } => {
            let spec = load(&input)?;
            if spec.has_replicable() {
                return Err(Fail(USAGE, format!("{} has replicable processes", spec.name)));
            }
            let (dp, _) = spec.single_dp();
            let a = analyze(&dp)?;
            let g = if reduce { &a.reduced } else { &a.full };
            if let Some(p) = &dot {
                write_out(p, &to_dot(g, &spec.name))?;
            }
            if let Some(p) = &svg {
                write_out(p, &to_svg(g))?;
            }
            if facts || input.json {
                outln!("{}", json(&facts_report(&a, &spec.name)));
            } else if dot.is_none() && svg.is_none() {
                outln!("{} nodes, {} edges", g.nodes.len(), g.edges.len());
                for l in g.labels() {
                    outln!("  {l}");
                }
            }
            Ok(OK)
        }
        Cmd::Check(input) => {
            let spec = load(&input)?;
            let (r, _) = check_spec(&spec)?;
            if input.json {
                outln!("{}", json(&r));
            } else {
                for g in &r.goals {
                    outln!("{}: {}", g.goal, g.status);
                    for f in &g.findings {
                        outln!("  {} on {} -> {} by {}: {}", f.kind, f.from, f.to, f.actor, f.detail);
                    }
                }
            }
            Ok(if r.status == "holds" { OK } else { VIOLATION })
        }
        Cmd::Explore {
            input,
            sessions,
            depth,
            deriv_depth,
            fresh_budget,
            max_states,
            workers,
            seed,
            no_self_sessions,
            identity,
            trace,
        } => {
            let spec = load(&input)?;
            if sessions == 0 || workers == 0 {
                return Err(Fail(USAGE, "--sessions and --workers must be positive".into()));
            }
            let cfg = ExploreConfig {
                sessions,
                self_sessions: !no_self_sessions,
                max_depth: depth,
                max_states,
                intruder: IntruderConfig {
                    deriv_depth,
                    fresh_budget,
                    identity,
                },
                workers,
                seed,
                check_theorems: false,
            };
            let (v, _) = explore(&spec, &cfg)?;
            let lines: Vec<String> = v
                .counterexample
                .iter()
                .flatten()
                .map(|s| serde_json::to_string(s).expect("serializable"))
                .collect();
            if let Some(p) = &trace {
                let mut text = lines.join("\n");
                text.push('\n');
                write_out(p, &text)?;
            }
            if input.json {
                outln!("{}", json(&v));
            } else {
                outln!("{}: {} states, {} edges", v.status.as_str(), v.states, v.edges);
                if let (Some(p), Some(d)) = (&v.property, &v.detail) {
                    outln!("{p}: {d}");
                    if let Some(sc) = &v.scenario {
                        outln!("scenario {sc}");
                    }
                }
                for l in &lines {
                    outln!("{l}");
                }
            }
            Ok(match v.status {
                Status::Holds => OK,
                Status::Violated => VIOLATION,
                Status::ResourceLimit => LIMIT,
            })
        }
        Cmd::Selftest => selftest(),
        Cmd::Corpus { name } => {
            match name {
                Some(n) => out!("{}", corpus::source_text(&n)?),
                None => {
                    for n in corpus::list() {
                        outln!("{n}");
                    }
                }
            }
            Ok(OK)
        }
    }
}

fn selftest() -> Result<u8, Fail> {
    let mut failed = 0;
    let mut line = |name: &str, ok: bool| {
        outln!("{} {name}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            failed += 1;
        }
    };
    for n in corpus::NAMES {
        let spec = corpus::load(n);
        line(&format!("parse {n}"), spec.as_ref().is_ok_and(|s| parse(&print(s)).as_ref() == Ok(s)));
    }
    for (n, full, reduced) in [("p1", 4, 3), ("p2", 4, 3), ("p3", 27, 10), ("p4", 27, 10)] {
        let (dp, _) = corpus::load(n)?.single_dp();
        let a = analyze(&dp)?;
        line(
            &format!("{n} graph {full} -> {reduced} nodes"),
            a.full.nodes.len() == full && a.reduced.nodes.len() == reduced,
        );
        let (r, _) = check_spec(&corpus::load(n)?)?;
        line(&format!("{n} goals hold"), r.status == "holds");
    }
    let (v, _) = explore(&corpus::load("wmf-broken")?, &ExploreConfig::default())?;
    line("wmf-broken leaks", v.status == Status::Violated);
    Ok(if failed == 0 { OK } else { VIOLATION })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(c) => ExitCode::from(c),
        Err(Fail(c, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(c)
        }
    }
}
