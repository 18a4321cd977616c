//! Serializable reports; each also renders as plain text.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ojacc_core::factor::Step;
use ojacc_core::line_graph::Trace;
use ojacc_core::local_jacobian::{Accumulation, LocalJacobian, Paren};
use ojacc_core::oracle::{EquivReport, Mode};
use ojacc_core::pages::sorted_pairs;
use ojacc_core::relations::{DepGraph, RelationTable, Violation};
use ojacc_core::structure::StructureKind;
use ojacc_core::{format_exprset, DiffGraph, Expr, ExprSet};
use serde::Serialize;

pub trait Text {
    fn text(&self) -> String;
}

pub fn render<T: Serialize + Text>(json: bool, r: &T) -> String {
    if json {
        let mut s = serde_json::to_string_pretty(r).expect("reports serialize");
        s.push('\n');
        s
    } else {
        r.text()
    }
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct MismatchReport {
    pub pair: (String, String),
    pub seed: u64,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub trials: usize,
    pub mode: &'static str,
    pub mismatches: Vec<MismatchReport>,
}

impl From<&EquivReport> for VerifyReport {
    fn from(r: &EquivReport) -> Self {
        VerifyReport {
            trials: r.trials,
            mode: match r.mode {
                Mode::Field => "field",
                Mode::Float => "float",
            },
            mismatches: r
                .mismatches
                .iter()
                .map(|m| MismatchReport { pair: m.pair.clone(), seed: m.seed, lhs: m.lhs.clone(), rhs: m.rhs.clone() })
                .collect(),
        }
    }
}

impl VerifyReport {
    fn line(&self) -> String {
        let verdict = if self.mismatches.is_empty() { "PASS" } else { "FAIL" };
        format!("# verify {verdict} trials={} mode={}\n", self.trials, self.mode)
    }
}

impl Text for VerifyReport {
    fn text(&self) -> String {
        let mut out = self.line();
        for m in &self.mismatches {
            let _ = writeln!(out, "J[{},{}] seed={} lhs={} rhs={}", m.pair.0, m.pair.1, m.seed, m.lhs, m.rhs);
        }
        out
    }
}

#[derive(Serialize, Debug, Clone)]
pub struct VertexRow {
    pub vertex: String,
    pub depth: usize,
    pub level: usize,
    pub r: usize,
    pub t: usize,
}

#[derive(Serialize, Debug, Clone)]
pub struct StructureRow {
    pub tag: String,
    pub src: String,
    pub sink: String,
    pub vertices: Vec<String>,
    pub edges: Vec<String>,
}

#[derive(Serialize, Debug, Clone)]
pub struct InspectReport {
    pub roots: Vec<String>,
    pub inner: Vec<String>,
    pub terminals: Vec<String>,
    pub depth: usize,
    pub cross: Vec<String>,
    pub vertices: Vec<VertexRow>,
    pub structures: Vec<StructureRow>,
}

impl InspectReport {
    pub fn new(g: &DiffGraph, structures: &[StructureKind]) -> Self {
        let p = g.classify_vertices();
        let depth = g.depth_levels();
        let aligned = g.aligned_levels();
        let deg = g.rt_degrees();
        InspectReport {
            roots: p.roots,
            inner: p.inner,
            terminals: p.terminals,
            depth: depth.depth(),
            cross: depth.cross.clone(),
            vertices: g
                .vertices()
                .into_iter()
                .map(|v| VertexRow { depth: depth.of(&v), level: aligned.of(&v), r: deg[&v].0, t: deg[&v].1, vertex: v })
                .collect(),
            structures: structures
                .iter()
                .map(|s| StructureRow {
                    tag: s.tag.to_string(),
                    src: s.src.clone(),
                    sink: s.sink.clone(),
                    vertices: s.sorted_vertices(),
                    edges: s.sorted_edges(),
                })
                .collect(),
        }
    }
}

impl Text for InspectReport {
    fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "roots {}", self.roots.join(" "));
        let _ = writeln!(out, "inner {}", self.inner.join(" "));
        let _ = writeln!(out, "terminals {}", self.terminals.join(" "));
        let _ = writeln!(out, "depth {}", self.depth);
        let _ = writeln!(out, "cross {}", self.cross.join(" "));
        for v in &self.vertices {
            let _ = writeln!(out, "vertex {} depth={} level={} ({},{})", v.vertex, v.depth, v.level, v.r, v.t);
        }
        for s in &self.structures {
            let _ = writeln!(out, "structure {} {} {} edges={}", s.tag, s.src, s.sink, s.edges.join(","));
        }
        out
    }
}

#[derive(Serialize, Debug, Clone)]
pub struct Def {
    pub name: String,
    pub expr: String,
}

#[derive(Serialize, Debug, Clone)]
pub struct Entry {
    pub root: String,
    pub terminal: String,
    pub expr: String,
}

#[derive(Serialize, Debug, Clone)]
pub struct ExprSetReport {
    pub defs: Vec<Def>,
    pub entries: Vec<Entry>,
}

impl ExprSetReport {
    pub fn new(s: &ExprSet) -> Self {
        ExprSetReport {
            defs: s.defs.iter().map(|(n, e)| Def { name: n.clone(), expr: e.to_string() }).collect(),
            entries: entries(&s.entries),
        }
    }
}

fn entries(m: &BTreeMap<(String, String), Expr>) -> Vec<Entry> {
    sorted_pairs(m)
        .into_iter()
        .map(|k| Entry { root: k.0.clone(), terminal: k.1.clone(), expr: m[k].to_string() })
        .collect()
}

#[derive(Serialize, Debug, Clone)]
pub struct StepReport {
    pub step: usize,
    pub op: String,
    pub args: Vec<String>,
    pub page: usize,
}

impl From<&Step> for StepReport {
    fn from(s: &Step) -> Self {
        StepReport { step: s.step, op: s.op.clone(), args: s.args.clone(), page: s.page }
    }
}

#[derive(Serialize, Debug, Clone)]
pub struct FactorizeReport {
    pub direction: String,
    /// True when the graph went through the page planner.
    pub paged: bool,
    /// Factorized graph, or the leaf pages.
    pub graph: String,
    pub cost: usize,
    pub exprs: ExprSetReport,
    #[serde(skip)]
    pub exprs_text: String,
    pub transcript: Vec<StepReport>,
    pub verify: VerifyReport,
}

impl Text for FactorizeReport {
    fn text(&self) -> String {
        let mut out = String::new();
        if !self.paged {
            out.push_str("# graph\n");
        }
        out.push_str(&self.graph);
        out.push_str("# exprs\n");
        out.push_str(&self.exprs_text);
        let _ = writeln!(out, "# cost {}", self.cost);
        out.push_str("# transcript\n");
        for s in &self.transcript {
            let _ = writeln!(out, "{} {} {} page={}", s.step, s.op, s.args.join(" "), s.page);
        }
        out.push_str(&self.verify.line());
        out
    }
}

#[derive(Serialize, Debug, Clone)]
pub struct ElimStep {
    pub kind: String,
    pub face: (String, String),
    pub mults: usize,
    pub created: Vec<String>,
    pub removed: Vec<String>,
}

#[derive(Serialize, Debug, Clone)]
pub struct EliminateReport {
    /// Where the order came from: `derived`, `lowest-first`, `order` or `exprset`.
    pub source: String,
    pub steps: Vec<ElimStep>,
    /// Faces eliminated lowest-first after the requested order ran out.
    pub completed: usize,
    pub entries: Vec<Entry>,
    pub mults: usize,
    pub verify: VerifyReport,
}

impl EliminateReport {
    pub fn new(
        source: &str,
        trace: &Trace,
        completed: usize,
        m: &BTreeMap<(String, String), Expr>,
        verify: VerifyReport,
    ) -> Self {
        EliminateReport {
            source: source.to_string(),
            steps: trace
                .steps
                .iter()
                .map(|s| ElimStep {
                    kind: s.kind.to_string(),
                    face: s.face.clone(),
                    mults: s.mults,
                    created: s.created.clone(),
                    removed: s.removed.clone(),
                })
                .collect(),
            completed,
            entries: entries(m),
            mults: trace.mults(),
            verify,
        }
    }
}

impl Text for EliminateReport {
    fn text(&self) -> String {
        let mut out = format!("# order {}\n", self.source);
        for s in &self.steps {
            let _ = writeln!(out, "{} {} {} mults={}", s.kind, s.face.0, s.face.1, s.mults);
        }
        if self.completed > 0 {
            let _ = writeln!(out, "# completed {} faces lowest-first", self.completed);
        }
        for e in &self.entries {
            let _ = writeln!(out, "J[{},{}] = {}", e.root, e.terminal, e.expr);
        }
        let _ = writeln!(out, "# mults {}", self.mults);
        out.push_str(&self.verify.line());
        out
    }
}

#[derive(Serialize, Debug, Clone)]
pub struct OrderReport {
    /// Multiplications of an expression set, first to last.
    pub joints: Vec<String>,
    /// Faces of a relation file, first to last.
    pub faces: Vec<String>,
}

impl Text for OrderReport {
    fn text(&self) -> String {
        self.joints.iter().chain(&self.faces).map(|l| format!("{l}\n")).collect()
    }
}

#[derive(Serialize, Debug, Clone)]
pub struct DepEdgeRow {
    pub from: String,
    pub to: String,
    pub mirrored: bool,
}

#[derive(Serialize, Debug, Clone)]
pub struct DepsReport {
    pub nodes: Vec<String>,
    pub edges: Vec<DepEdgeRow>,
}

fn face(f: &(String, String)) -> String {
    format!("<{},{}>", f.0, f.1)
}

impl DepsReport {
    pub fn new(d: &DepGraph) -> Self {
        DepsReport {
            nodes: d.nodes.iter().map(face).collect(),
            edges: d
                .edges
                .iter()
                .map(|e| DepEdgeRow { from: face(&e.from), to: face(&e.to), mirrored: e.mirrored })
                .collect(),
        }
    }
}

impl Text for DepsReport {
    fn text(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(out, "{} after {}{}", e.from, e.to, if e.mirrored { " (mirrored)" } else { "" });
        }
        if self.edges.is_empty() {
            out.push_str("# no dependencies\n");
        }
        out
    }
}

#[derive(Serialize, Debug, Clone)]
pub struct OccurrenceRow {
    pub expr: String,
    pub kind: String,
    pub witness: Option<String>,
}

#[derive(Serialize, Debug, Clone)]
pub struct RelationRow {
    pub left: String,
    pub right: String,
    pub occurrences: Vec<OccurrenceRow>,
}

#[derive(Serialize, Debug, Clone)]
pub struct RelationsReport {
    pub relations: Vec<RelationRow>,
    pub violations: Vec<RelationRow>,
}

impl RelationsReport {
    pub fn new(tab: &RelationTable, viol: &[Violation]) -> Self {
        RelationsReport {
            relations: tab
                .relations
                .iter()
                .map(|r| RelationRow {
                    left: r.left.clone(),
                    right: r.right.clone(),
                    occurrences: r
                        .occurrences
                        .iter()
                        .map(|o| OccurrenceRow { expr: o.expr.clone(), kind: o.kind.to_string(), witness: o.witness.clone() })
                        .collect(),
                })
                .collect(),
            violations: viol
                .iter()
                .map(|v| RelationRow {
                    left: v.left.clone(),
                    right: v.right.clone(),
                    occurrences: vec![OccurrenceRow { expr: v.expr.clone(), kind: v.kind.to_string(), witness: None }],
                })
                .collect(),
        }
    }
}

impl Text for RelationsReport {
    fn text(&self) -> String {
        let mut out = String::new();
        for r in &self.relations {
            for o in &r.occurrences {
                let w = o.witness.as_deref().map(|w| format!(" witness={w}")).unwrap_or_default();
                let _ = writeln!(out, "{} {} {} in {}{}", r.left, r.right, o.kind, o.expr, w);
            }
        }
        for v in &self.violations {
            let _ = writeln!(out, "violation {} {} {} in {}", v.left, v.right, v.occurrences[0].kind, v.occurrences[0].expr);
        }
        out
    }
}

#[derive(Serialize, Debug, Clone)]
pub struct MatrixReport {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub entries: Vec<(String, String, String)>,
}

#[derive(Serialize, Debug, Clone)]
pub struct AccumulateReport {
    pub matrices: Vec<MatrixReport>,
    pub paren: String,
    pub cost: usize,
    pub exprs: ExprSetReport,
    #[serde(skip)]
    pub exprs_text: String,
    pub verify: VerifyReport,
}

impl AccumulateReport {
    pub fn new(chain: &[LocalJacobian], p: &Paren, acc: &Accumulation, verify: VerifyReport) -> Self {
        AccumulateReport {
            matrices: chain
                .iter()
                .map(|m| MatrixReport {
                    rows: m.rows.clone(),
                    cols: m.cols.clone(),
                    entries: m.entries.iter().map(|((r, c), e)| (r.clone(), c.clone(), e.to_string())).collect(),
                })
                .collect(),
            paren: p.to_string(),
            cost: acc.cost,
            exprs: ExprSetReport::new(&acc.exprs),
            exprs_text: format_exprset(&acc.exprs),
            verify,
        }
    }
}

impl Text for AccumulateReport {
    fn text(&self) -> String {
        let mut out = String::new();
        for (k, m) in self.matrices.iter().enumerate() {
            let _ = writeln!(out, "# matrix {}", (b'A' + k as u8) as char);
            let _ = writeln!(out, "J {} | {}", m.rows.join(" "), m.cols.join(" "));
            for (r, c, e) in &m.entries {
                let _ = writeln!(out, "entry {r} {c} = {e}");
            }
        }
        let _ = writeln!(out, "# paren {}", self.paren);
        let _ = writeln!(out, "# cost {}", self.cost);
        out.push_str(&self.exprs_text);
        out.push_str(&self.verify.line());
        out
    }
}
