//! Front end for `ojacc-core`: file loading, subcommands, reports and exit codes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ojacc_core::factor::{factorize, Direction as FactorDir};
use ojacc_core::graph::DEFAULT_PATH_GUARD;
use ojacc_core::line_graph::{eliminate_all, run_elimination, Trace};
use ojacc_core::local_jacobian::{accumulate, best_accumulation_order, level_chain, parse_paren};
use ojacc_core::oracle::{check_equiv, Artifact, EquivReport, Mode};
use ojacc_core::pages::{factorize_pages, factorize_pages_with, format_pages};
use ojacc_core::relations::{
    build_dep_graph, classify_relations, detect_cycles, face_order, audit_relations, parse_relations, replay_exprset,
    safe_elimination_order, RelationTable,
};
use ojacc_core::structure::find_structures;
use ojacc_core::{build_line_graph, fma_cost, format_exprset, format_graph, parse_exprset, parse_graph};
use ojacc_core::{DiffGraph, Error, ExprSet};

pub mod dot;
pub mod report;

use report::*;

#[derive(Parser, Debug)]
#[command(name = "ojacc", version, about = "Jacobian accumulation on differentiation graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed of the first oracle trial.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of oracle trials.
    #[arg(long, global = true, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Largest number of root-terminal paths the oracle may enumerate.
    #[arg(long, global = true, default_value_t = DEFAULT_PATH_GUARD, value_parser = positive)]
    pub guard: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Compare in floating point instead of the prime field.
    #[arg(long, global = true)]
    pub float: bool,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    Backward,
    Forward,
    Refs,
    Pages,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Partition, levels, degrees and structures of a graph.
    Inspect { graph: PathBuf },
    /// Factorize complex blocks into an expression set.
    Factorize {
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = Direction::Backward)]
        direction: Direction,
    },
    /// Face elimination on the line graph.
    Eliminate {
        graph: PathBuf,
        /// File of `i j` face lines, eliminated in order.
        #[arg(long, conflicts_with = "from_exprset")]
        order: Option<PathBuf>,
        /// Expression set whose multiplications drive the elimination.
        #[arg(long)]
        from_exprset: Option<PathBuf>,
        /// Merge superset twins after each step.
        #[arg(long)]
        extended: bool,
    },
    /// Dependency-respecting multiplication order of an expression set or relation file.
    Order { input: PathBuf },
    /// Elimination dependencies and their cycles.
    Deps { input: PathBuf },
    /// Multiplication relations and audit findings.
    Relations { input: PathBuf },
    /// Compare two artifacts on random instantiations.
    Verify { left: PathBuf, right: PathBuf },
    /// DOT text for a graph, its line graph, or a dependency graph.
    Dot {
        input: PathBuf,
        #[arg(long)]
        line_graph: bool,
        /// Keep the source and sink vertices of the line graph.
        #[arg(long, requires = "line_graph")]
        meta: bool,
    },
    /// Multiply the level-wise local Jacobians of a graph.
    Accumulate {
        graph: PathBuf,
        /// Bracketing in letter form, e.g. `(AB)(CD)`.
        #[arg(long, conflicts_with = "best")]
        paren: Option<String>,
        /// Use the cheapest bracketing (the default).
        #[arg(long)]
        best: bool,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Core { path: PathBuf, source: Error },
    #[error(transparent)]
    Plain(#[from] Error),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    fn core(&self) -> Option<&Error> {
        match self {
            CliError::Core { source, .. } | CliError::Plain(source) => Some(source),
            _ => None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verify(_) => 3,
            CliError::Usage(_) | CliError::Io { .. } => 1,
            _ => match self.core() {
                Some(e) => core_code(e),
                None => 1,
            },
        }
    }

    /// Message for stderr; cycles are listed one per line.
    pub fn diagnostic(&self) -> String {
        let mut out = format!("error: {self}");
        if let Some(Error::DependencyCycle(cs)) = self.core() {
            out = format!("error: {} circular elimination dependenc{}", cs.len(), if cs.len() == 1 { "y" } else { "ies" });
            for c in cs {
                out.push_str(&format!("\ncycle: {}", c.join(" -> ")));
            }
        }
        out
    }
}

fn core_code(e: &Error) -> i32 {
    match e {
        Error::Syntax { .. }
        | Error::DuplicateEdge(_)
        | Error::ParallelEdge(..)
        | Error::Cycle(_)
        | Error::EmptyGraph
        | Error::RefCycle(_)
        | Error::DuplicateRef(_)
        | Error::UnresolvedRef(_) => 2,
        Error::SupportMismatch(_) => 3,
        Error::DependencyCycle(_) => 4,
        Error::PathGuard(_) | Error::ChainTooLong(..) | Error::NoProgress => 5,
        _ => 1,
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn at<T>(path: &Path, r: ojacc_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Core { path: path.to_path_buf(), source })
}

fn load_graph(path: &Path) -> Result<DiffGraph, CliError> {
    at(path, parse_graph(&read(path)?))
}

fn load_exprs(path: &Path) -> Result<ExprSet, CliError> {
    let s = at(path, parse_exprset(&read(path)?))?;
    at(path, s.validate())?;
    Ok(s)
}

enum Loaded {
    Graph(DiffGraph),
    Exprs(ExprSet),
    Relations(RelationTable),
}

fn load_any(path: &Path) -> Result<Loaded, CliError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("graph") => Ok(Loaded::Graph(load_graph(path)?)),
        Some("exprs") => Ok(Loaded::Exprs(load_exprs(path)?)),
        Some("rel") => Ok(Loaded::Relations(at(path, parse_relations(&read(path)?))?)),
        _ => Err(CliError::Usage(format!(
            "{}: unknown artifact type (expected .graph, .exprs or .rel)",
            path.display()
        ))),
    }
}

fn relations_of(path: &Path) -> Result<(RelationTable, Option<ExprSet>), CliError> {
    match load_any(path)? {
        Loaded::Exprs(s) => Ok((classify_relations(&s), Some(s))),
        Loaded::Relations(t) => Ok((t, None)),
        Loaded::Graph(_) => Err(CliError::Usage(format!("{}: expected an .exprs or .rel file", path.display()))),
    }
}

/// Root-terminal path count must stay under the guard before the oracle enumerates paths.
fn guard_paths(g: &DiffGraph, guard: usize) -> Result<(), CliError> {
    let mut total: u128 = 0;
    for y in g.roots() {
        for x in g.terminals() {
            total += g.count_paths(&y, &x);
        }
    }
    if total > guard as u128 {
        return Err(Error::PathGuard(guard).into());
    }
    Ok(())
}

struct Ctx {
    seed: u64,
    trials: usize,
    guard: usize,
    mode: Mode,
}

impl Ctx {
    fn equiv(&self, a: &Artifact, b: &Artifact) -> Result<EquivReport, CliError> {
        Ok(check_equiv(a, b, self.trials, self.seed, self.mode)?)
    }

    /// Equivalence check that turns a mismatch into an exit-3 error.
    fn must_match(&self, a: &Artifact, b: &Artifact) -> Result<VerifyReport, CliError> {
        let r = VerifyReport::from(&self.equiv(a, b)?);
        if let Some(m) = r.mismatches.first() {
            return Err(CliError::Verify(format!(
                "J[{},{}] differs at seed {}: {} vs {}",
                m.pair.0, m.pair.1, m.seed, m.lhs, m.rhs
            )));
        }
        Ok(r)
    }
}

/// Run one command and return what it prints on stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let ctx = Ctx {
        seed: cli.seed,
        trials: cli.trials as usize,
        guard: cli.guard,
        mode: if cli.float { Mode::Float } else { Mode::Field },
    };
    let json = cli.format == Format::Json;
    match &cli.command {
        Command::Inspect { graph } => {
            let g = load_graph(graph)?;
            Ok(render(json, &InspectReport::new(&g, &find_structures(&g))))
        }
        Command::Factorize { graph, direction } => cmd_factorize(&ctx, json, graph, *direction),
        Command::Eliminate { graph, order, from_exprset, extended } => {
            cmd_eliminate(&ctx, json, graph, order.as_deref(), from_exprset.as_deref(), *extended)
        }
        Command::Order { input } => {
            let (tab, set) = relations_of(input)?;
            let r = match set {
                Some(s) => {
                    let joints = at(input, safe_elimination_order(&s))?;
                    OrderReport { joints: joints.iter().map(|j| j.to_string()).collect(), faces: Vec::new() }
                }
                None => {
                    let faces = at(input, face_order(&tab))?;
                    OrderReport { joints: Vec::new(), faces: faces.iter().map(face_str).collect() }
                }
            };
            Ok(render(json, &r))
        }
        Command::Deps { input } => {
            let (tab, _) = relations_of(input)?;
            let d = build_dep_graph(&tab);
            let cycles = detect_cycles(&d);
            if !cycles.is_empty() {
                let listed = cycles.iter().map(|c| c.iter().map(face_str).collect()).collect();
                return Err(CliError::Core { path: input.clone(), source: Error::DependencyCycle(listed) });
            }
            Ok(render(json, &DepsReport::new(&d)))
        }
        Command::Relations { input } => {
            let (tab, _) = relations_of(input)?;
            Ok(render(json, &RelationsReport::new(&tab, &audit_relations(&tab))))
        }
        Command::Verify { left, right } => cmd_verify(&ctx, json, left, right),
        Command::Dot { input, line_graph, meta } => match load_any(input)? {
            Loaded::Graph(g) if *line_graph => Ok(dot::line_graph(&build_line_graph(&g), *meta)),
            Loaded::Graph(g) => Ok(dot::graph(&g)),
            Loaded::Exprs(s) => Ok(build_dep_graph(&classify_relations(&s)).to_dot()),
            Loaded::Relations(t) => Ok(build_dep_graph(&t).to_dot()),
        },
        Command::Accumulate { graph, paren, best: _ } => {
            let g = load_graph(graph)?;
            guard_paths(&g, ctx.guard)?;
            let chain = at(graph, level_chain(&g))?;
            let p = match paren {
                Some(text) => parse_paren(text)?,
                None => best_accumulation_order(&chain)?.0,
            };
            let acc = accumulate(&chain, &p)?;
            let verify = ctx.must_match(&Artifact::Exprs(&acc.exprs), &Artifact::Graph(&g))?;
            Ok(render(json, &AccumulateReport::new(&chain, &p, &acc, verify)))
        }
    }
}

fn face_str(f: &(String, String)) -> String {
    format!("<{},{}>", f.0, f.1)
}

fn cmd_factorize(ctx: &Ctx, json: bool, path: &Path, dir: Direction) -> Result<String, CliError> {
    let g = load_graph(path)?;
    guard_paths(&g, ctx.guard)?;
    let input = Artifact::Graph(&g);
    let (fd, refs) = match dir {
        Direction::Forward => (FactorDir::Forward, false),
        Direction::Refs | Direction::Pages => (FactorDir::Backward, true),
        Direction::Backward => (FactorDir::Backward, false),
    };
    let name = format!("{dir:?}").to_lowercase();
    let single = g.roots().len() == 1 && g.terminals().len() == 1;
    let r = if dir == Direction::Pages || !single {
        // several roots or terminals go through the page planner
        let (plan, set) = at(path, factorize_pages_with(&g, fd, refs))?;
        let verify = ctx.must_match(&Artifact::Exprs(&set), &input)?;
        FactorizeReport {
            direction: name,
            paged: true,
            graph: format_pages(&plan),
            cost: fma_cost(&set)?,
            exprs: ExprSetReport::new(&set),
            exprs_text: format_exprset(&set),
            transcript: plan.transcript.steps.iter().map(StepReport::from).collect(),
            verify,
        }
    } else {
        let f = at(path, factorize(&g, fd, refs))?;
        ctx.must_match(&Artifact::GraphRefs(&f.graph, &f.exprs), &input)?;
        let verify = ctx.must_match(&Artifact::Exprs(&f.exprs), &input)?;
        FactorizeReport {
            direction: name,
            paged: false,
            graph: format_graph(&f.graph),
            cost: fma_cost(&f.exprs)?,
            exprs: ExprSetReport::new(&f.exprs),
            exprs_text: format_exprset(&f.exprs),
            transcript: f.transcript.steps.iter().map(StepReport::from).collect(),
            verify,
        }
    };
    Ok(render(json, &r))
}

fn read_order(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (ln, raw) in read(path)?.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            let source = Error::Syntax { line: ln + 1, col: 1, msg: "expected `i j`".into() };
            return Err(CliError::Core { path: path.to_path_buf(), source });
        }
        out.push((toks[0].to_string(), toks[1].to_string()));
    }
    Ok(out)
}

fn cmd_eliminate(
    ctx: &Ctx,
    json: bool,
    path: &Path,
    order: Option<&Path>,
    from: Option<&Path>,
    extended: bool,
) -> Result<String, CliError> {
    let g = load_graph(path)?;
    guard_paths(&g, ctx.guard)?;
    let (source, mut lg, mut trace) = match (order, from) {
        (Some(o), _) => {
            let faces = read_order(o)?;
            let mut lg = build_line_graph(&g);
            let trace = at(o, run_elimination(&mut lg, &faces, extended))?;
            ("order".to_string(), lg, trace)
        }
        (None, Some(f)) => {
            let s = load_exprs(f)?;
            let joints = at(f, safe_elimination_order(&s))?;
            let rep = at(f, replay_exprset(&g, &s, &joints))?;
            ("exprset".to_string(), rep.graph, rep.trace)
        }
        (None, None) => derived(&g)?,
    };
    // finish whatever the given order left open, lowest face first
    let before = trace.steps.len();
    eliminate_all(&mut lg, &mut trace)?;
    let completed = trace.steps[before..].iter().filter(|s| s.primary).count();
    let entries = lg.readout_jacobian()?;
    let verify = ctx.must_match(&Artifact::Entries(&entries), &Artifact::Graph(&g))?;
    Ok(render(json, &EliminateReport::new(&source, &trace, completed, &entries, verify)))
}

/// Pages, then the safe order of the merged set; lowest-first if that set cannot be replayed.
fn derived(g: &DiffGraph) -> Result<(String, ojacc_core::LineGraph, Trace), CliError> {
    let attempt = factorize_pages(g).and_then(|(_, s)| {
        let joints = safe_elimination_order(&s)?;
        replay_exprset(g, &s, &joints)
    });
    match attempt {
        Ok(rep) => Ok(("derived".into(), rep.graph, rep.trace)),
        Err(e @ (Error::PathGuard(_) | Error::NoProgress)) => Err(e.into()),
        Err(_) => Ok(("lowest-first".into(), build_line_graph(g), Trace::default())),
    }
}

fn cmd_verify(ctx: &Ctx, json: bool, left: &Path, right: &Path) -> Result<String, CliError> {
    let (a, b) = (load_any(left)?, load_any(right)?);
    for l in [&a, &b] {
        if let Loaded::Graph(g) = l {
            guard_paths(g, ctx.guard)?;
        }
    }
    fn art<'a>(l: &'a Loaded, p: &Path) -> Result<Artifact<'a>, CliError> {
        let out = match l {
            Loaded::Graph(g) => Artifact::Graph(g),
            Loaded::Exprs(s) => Artifact::Exprs(s),
            Loaded::Relations(_) => {
                return Err(CliError::Usage(format!("{}: relation files carry no values", p.display())))
            }
        };
        Ok(out)
    }
    let rep = ctx.must_match(&art(&a, left)?, &art(&b, right)?)?;
    Ok(render(json, &rep))
}

/// Entries keyed by `(root, terminal)`, rendered as `J[root,terminal] = expr` lines.
pub fn format_entries(m: &BTreeMap<(String, String), ojacc_core::Expr>) -> String {
    let mut s = ExprSet::new();
    s.entries = m.clone();
    format_exprset(&s)
}
