//! Multiplication relations in expression sets and the face-elimination
//! dependencies they induce.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::expr::{Expr, ExprSet};
use crate::graph::DiffGraph;
use crate::line_graph::{build_line_graph, LineGraph, Trace};
use crate::natord;

/// Upper bound on reported elementary cycles.
pub const CYCLE_LIMIT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RelKind {
    Direct,
    IndirectRight,
    IndirectLeft,
    Distant,
}

impl RelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RelKind::Direct => "direct",
            RelKind::IndirectRight => "indirect-right",
            RelKind::IndirectLeft => "indirect-left",
            RelKind::Distant => "distant",
        }
    }
}

impl fmt::Display for RelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occurrence {
    pub expr: String,
    pub kind: RelKind,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub left: String,
    pub right: String,
    pub occurrences: Vec<Occurrence>,
}

impl Relation {
    pub fn has(&self, kind: RelKind) -> bool {
        self.occurrences.iter().any(|o| o.kind == kind)
    }

    pub fn is_indirect(&self) -> bool {
        self.has(RelKind::IndirectRight) || self.has(RelKind::IndirectLeft)
    }
}

/// Relations in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelationTable {
    pub relations: Vec<Relation>,
    index: BTreeMap<(String, String), usize>,
}

impl RelationTable {
    pub fn get(&self, left: &str, right: &str) -> Option<&Relation> {
        self.index.get(&(left.to_string(), right.to_string())).map(|&i| &self.relations[i])
    }

    pub fn record(&mut self, left: &str, right: &str, occ: Occurrence) {
        let key = (left.to_string(), right.to_string());
        let i = match self.index.get(&key) {
            Some(&i) => i,
            None => {
                self.relations.push(Relation { left: key.0.clone(), right: key.1.clone(), occurrences: Vec::new() });
                self.index.insert(key, self.relations.len() - 1);
                self.relations.len() - 1
            }
        };
        self.relations[i].occurrences.push(occ);
    }

    pub fn direct_count(&self) -> usize {
        self.relations
            .iter()
            .map(|r| r.occurrences.iter().filter(|o| o.kind == RelKind::Direct).count())
            .sum()
    }
}

/// Name of a factor as an operand: a symbol, a ref, or a parenthesized block.
pub fn operand_key(e: &Expr) -> String {
    match e {
        Expr::Sum(_) => format!("({e})"),
        _ => e.to_string(),
    }
}

fn factors(e: &Expr) -> Vec<Expr> {
    match e {
        Expr::Prod(fs) => fs.clone(),
        other => alloc::vec![other.clone()],
    }
}

/// Terms of a factor that opens a parenthesis boundary, looking through refs to sums.
fn block_terms(s: &ExprSet, e: &Expr) -> Option<Vec<Expr>> {
    match e {
        Expr::Sum(ts) => Some(ts.clone()),
        Expr::Ref(r) => match s.def(r).map(|d| d.clone().normalize()) {
            Some(Expr::Sum(ts)) => Some(ts),
            _ => None,
        },
        _ => None,
    }
}

fn expr_ids(s: &ExprSet) -> Vec<(String, Expr)> {
    let mut out: Vec<(String, Expr)> = s.defs.iter().map(|(n, e)| (n.clone(), e.clone().normalize())).collect();
    for ((r, t), e) in s.sorted_entries() {
        out.push((format!("J[{r},{t}]"), e.clone().normalize()));
    }
    out
}

fn walk_prods<'a>(e: &'a Expr, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, &'a [Expr])>) {
    match e {
        Expr::Prod(fs) => {
            out.push((path.clone(), fs.as_slice()));
            for (k, f) in fs.iter().enumerate() {
                path.push(k);
                walk_prods(f, path, out);
                path.pop();
            }
        }
        Expr::Sum(ts) => {
            for (k, t) in ts.iter().enumerate() {
                path.push(k);
                walk_prods(t, path, out);
                path.pop();
            }
        }
        _ => {}
    }
}

fn leading(s: &ExprSet, block: &Expr, depth: usize, out: &mut Vec<(String, Option<String>, usize)>) {
    let Some(ts) = block_terms(s, block) else { return };
    for t in ts {
        let fs = factors(&t);
        out.push((operand_key(&fs[0]), fs.get(1).map(operand_key), depth));
        if depth < 8 {
            leading(s, &fs[0], depth + 1, out);
        }
    }
}

fn trailing(s: &ExprSet, block: &Expr, depth: usize, out: &mut Vec<(String, Option<String>, usize)>) {
    let Some(ts) = block_terms(s, block) else { return };
    for t in ts {
        let fs = factors(&t);
        let n = fs.len();
        out.push((operand_key(&fs[n - 1]), if n > 1 { Some(operand_key(&fs[n - 2])) } else { None }, depth));
        if depth < 8 {
            trailing(s, &fs[n - 1], depth + 1, out);
        }
    }
}

/// Direct relations for every adjacent factor pair; indirect ones across one parenthesis boundary.
pub fn classify_relations(s: &ExprSet) -> RelationTable {
    let mut tab = RelationTable::default();
    for (id, e) in expr_ids(s) {
        let mut prods = Vec::new();
        walk_prods(&e, &mut Vec::new(), &mut prods);
        for (_, fs) in prods {
            for w in fs.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                let (ka, kb) = (operand_key(a), operand_key(b));
                tab.record(&ka, &kb, Occurrence { expr: id.clone(), kind: RelKind::Direct, witness: None });
                let mut lead = Vec::new();
                leading(s, b, 0, &mut lead);
                for (s2, wit, depth) in lead {
                    let (kind, witness) =
                        if depth == 0 { (RelKind::IndirectRight, wit) } else { (RelKind::Distant, None) };
                    tab.record(&ka, &s2, Occurrence { expr: id.clone(), kind, witness });
                }
                let mut trail = Vec::new();
                trailing(s, a, 0, &mut trail);
                for (s1, wit, depth) in trail {
                    let (kind, witness) =
                        if depth == 0 { (RelKind::IndirectLeft, wit) } else { (RelKind::Distant, None) };
                    tab.record(&s1, &kb, Occurrence { expr: id.clone(), kind, witness });
                }
            }
        }
    }
    tab
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub left: String,
    pub right: String,
    pub expr: String,
    pub kind: RelKind,
}

/// Pairs multiplied directly somewhere and also split by a boundary with no adjoining factor.
pub fn audit_relations(tab: &RelationTable) -> Vec<Violation> {
    let mut out = Vec::new();
    for r in &tab.relations {
        if !r.has(RelKind::Direct) {
            continue;
        }
        for o in &r.occurrences {
            if matches!(o.kind, RelKind::IndirectRight | RelKind::IndirectLeft) && o.witness.is_none() {
                out.push(Violation { left: r.left.clone(), right: r.right.clone(), expr: o.expr.clone(), kind: o.kind });
            }
        }
    }
    out
}

pub type Face = (String, String);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepEdge {
    pub from: Face,
    pub to: Face,
    pub mirrored: bool,
}

/// `from` can only be eliminated after `to`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DepGraph {
    pub nodes: Vec<Face>,
    pub edges: Vec<DepEdge>,
}

impl DepGraph {
    fn node(&mut self, f: &Face) {
        if !self.nodes.contains(f) {
            self.nodes.push(f.clone());
        }
    }

    fn edge(&mut self, from: Face, to: Face, mirrored: bool) {
        if from == to || self.edges.iter().any(|e| e.from == from && e.to == to) {
            return;
        }
        self.node(&from);
        self.node(&to);
        self.edges.push(DepEdge { from, to, mirrored });
    }

    pub fn targets(&self) -> BTreeSet<Face> {
        self.edges.iter().map(|e| e.to.clone()).collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph deps {\n");
        let name = |f: &Face| format!("\"<{},{}>\"", f.0, f.1);
        for n in &self.nodes {
            out.push_str(&format!("  {};\n", name(n)));
        }
        for e in &self.edges {
            let style = if e.mirrored { " [style=dashed]" } else { "" };
            out.push_str(&format!("  {} -> {}{};\n", name(&e.from), name(&e.to), style));
        }
        out.push_str("}\n");
        out
    }
}

pub fn build_dep_graph(tab: &RelationTable) -> DepGraph {
    let mut d = DepGraph::default();
    for r in &tab.relations {
        if !(r.has(RelKind::Direct) && r.is_indirect()) {
            continue;
        }
        let face = (r.left.clone(), r.right.clone());
        for o in &r.occurrences {
            match (o.kind, &o.witness) {
                (RelKind::IndirectRight, Some(w)) => d.edge(face.clone(), (r.right.clone(), w.clone()), false),
                (RelKind::IndirectLeft, Some(w)) => d.edge(face.clone(), (w.clone(), r.left.clone()), true),
                _ => {}
            }
        }
    }
    d
}

/// Elementary cycles, each rotated to start at its smallest node index.
pub fn detect_cycles(d: &DepGraph) -> Vec<Vec<Face>> {
    let n = d.nodes.len();
    let idx: BTreeMap<&Face, usize> = d.nodes.iter().enumerate().map(|(i, f)| (f, i)).collect();
    let mut adj = alloc::vec![Vec::new(); n];
    for e in &d.edges {
        adj[idx[&e.from]].push(idx[&e.to]);
    }
    for a in adj.iter_mut() {
        a.sort();
    }
    let mut out = Vec::new();
    for start in 0..n {
        let mut path = alloc::vec![start];
        let mut on = alloc::vec![false; n];
        on[start] = true;
        circuits(start, start, &adj, &mut path, &mut on, &mut out);
        if out.len() >= CYCLE_LIMIT {
            break;
        }
    }
    out.truncate(CYCLE_LIMIT);
    out.into_iter().map(|c| c.into_iter().map(|i| d.nodes[i].clone()).collect()).collect()
}

fn circuits(
    start: usize,
    v: usize,
    adj: &[Vec<usize>],
    path: &mut Vec<usize>,
    on: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    for &w in &adj[v] {
        if out.len() >= CYCLE_LIMIT {
            return;
        }
        if w == start {
            out.push(path.clone());
        } else if w > start && !on[w] {
            on[w] = true;
            path.push(w);
            circuits(start, w, adj, path, on, out);
            path.pop();
            on[w] = false;
        }
    }
}

fn cycle_error(cycles: &[Vec<Face>]) -> Error {
    Error::DependencyCycle(cycles.iter().map(|c| c.iter().map(|f| format!("<{},{}>", f.0, f.1)).collect()).collect())
}

/// Faces of a relation table, each after the faces it depends on; ties in natural order.
pub fn face_order(tab: &RelationTable) -> Result<Vec<Face>> {
    let deps = build_dep_graph(tab);
    let cycles = detect_cycles(&deps);
    if !cycles.is_empty() {
        return Err(cycle_error(&cycles));
    }
    let all: BTreeSet<Face> = tab.relations.iter().map(|r| (r.left.clone(), r.right.clone())).collect();
    let mut left = sorted_faces(&all);
    let mut out = Vec::new();
    while !left.is_empty() {
        let ready = left
            .iter()
            .position(|f| deps.edges.iter().all(|e| e.from != *f || out.contains(&e.to)))
            .ok_or(Error::NoProgress)?;
        out.push(left.remove(ready));
    }
    Ok(out)
}

/// One multiplication of the set: the joint between factors `joint` and `joint + 1`
/// of the product at `path` inside expression `expr`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Joint {
    pub left: String,
    pub right: String,
    pub expr: String,
    pub path: Vec<usize>,
    pub joint: usize,
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{}> in {}", self.left, self.right, self.expr)
    }
}

fn collect_refs(e: &Expr, out: &mut BTreeSet<String>) {
    out.extend(e.refs());
}

/// Order every multiplication of `s` so that nested blocks and referenced
/// definitions come first and each dependency target precedes its dependents.
pub fn safe_elimination_order(s: &ExprSet) -> Result<Vec<Joint>> {
    s.topo_defs()?;
    let tab = classify_relations(s);
    let deps = build_dep_graph(&tab);
    let cycles = detect_cycles(&deps);
    if !cycles.is_empty() {
        return Err(cycle_error(&cycles));
    }
    let exprs = expr_ids(s);
    let mut joints: Vec<Joint> = Vec::new();
    // per joint: nested joints of its two factors, and refs they mention
    let mut inner: Vec<(Vec<usize>, BTreeSet<String>)> = Vec::new();
    for (id, e) in &exprs {
        let mut prods = Vec::new();
        walk_prods(e, &mut Vec::new(), &mut prods);
        for (path, fs) in prods {
            for k in 0..fs.len() - 1 {
                let mut refs = BTreeSet::new();
                collect_refs(&fs[k], &mut refs);
                collect_refs(&fs[k + 1], &mut refs);
                joints.push(Joint {
                    left: operand_key(&fs[k]),
                    right: operand_key(&fs[k + 1]),
                    expr: id.clone(),
                    path: path.clone(),
                    joint: k,
                });
                inner.push((Vec::new(), refs));
            }
        }
    }
    let n = joints.len();
    let mut before: Vec<BTreeSet<usize>> = alloc::vec![BTreeSet::new(); n];
    for a in 0..n {
        let ja = &joints[a];
        let own: Vec<Vec<usize>> = alloc::vec![
            [ja.path.as_slice(), &[ja.joint]].concat(),
            [ja.path.as_slice(), &[ja.joint + 1]].concat(),
        ];
        for b in 0..n {
            let jb = &joints[b];
            if a == b {
                continue;
            }
            if jb.expr == ja.expr && own.iter().any(|p| jb.path.starts_with(p)) {
                before[a].insert(b);
            }
            if inner[a].1.contains(&jb.expr) {
                before[a].insert(b);
            }
        }
    }
    // refs pull in the whole definition, including what that definition needs
    loop {
        let mut grew = false;
        for a in 0..n {
            let extra: BTreeSet<usize> = before[a].iter().flat_map(|&b| before[b].iter().copied()).collect();
            for x in extra {
                if x != a && before[a].insert(x) {
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }
    for e in &deps.edges {
        for a in 0..n {
            if (joints[a].left.as_str(), joints[a].right.as_str()) != (e.from.0.as_str(), e.from.1.as_str()) {
                continue;
            }
            for b in 0..n {
                if (joints[b].left.as_str(), joints[b].right.as_str()) == (e.to.0.as_str(), e.to.1.as_str()) {
                    before[a].insert(b);
                }
            }
        }
    }
    let targets = deps.targets();
    let mut done = alloc::vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let ready = (0..n).filter(|&a| !done[a] && before[a].iter().all(|&b| done[b]));
        let pick = ready.min_by_key(|&a| {
            let f = (joints[a].left.clone(), joints[a].right.clone());
            (!targets.contains(&f), a)
        });
        let Some(a) = pick else {
            let stuck: Vec<String> = (0..n).filter(|&a| !done[a]).map(|a| joints[a].to_string()).collect();
            return Err(Error::DependencyCycle(alloc::vec![stuck]));
        };
        done[a] = true;
        order.push(joints[a].clone());
    }
    Ok(order)
}

fn locate<'a>(exprs: &'a [(String, Expr)], j: &Joint) -> Result<&'a [Expr]> {
    let missing = || Error::FaceMissing(j.left.clone(), j.right.clone());
    let mut e = &exprs.iter().find(|x| x.0 == j.expr).ok_or_else(missing)?.1;
    for &k in &j.path {
        e = match e {
            Expr::Prod(xs) | Expr::Sum(xs) => xs.get(k).ok_or_else(missing)?,
            _ => return Err(missing()),
        };
    }
    match e {
        Expr::Prod(fs) if j.joint + 1 < fs.len() => Ok(fs),
        _ => Err(missing()),
    }
}

/// Result of driving the line graph with an expression set's multiplications.
#[derive(Clone, Debug)]
pub struct Replay {
    pub graph: LineGraph,
    pub trace: Trace,
    /// Joints whose product already existed in the line graph.
    pub shared: Vec<Joint>,
}

/// Eliminate, for each joint in turn, the line-graph face whose endpoint labels
/// equal the values of the two partial products meeting at that joint.
pub fn replay_exprset(g: &DiffGraph, s: &ExprSet, order: &[Joint]) -> Result<Replay> {
    let exprs = expr_ids(s);
    let mut lg = build_line_graph(g);
    let mut trace = Trace::default();
    let mut shared = Vec::new();
    let mut joined: BTreeMap<(String, Vec<usize>), BTreeSet<usize>> = BTreeMap::new();
    // unit edges from segmentation or parallel terms stand for no multiplication
    while let Some((a, b)) =
        lg.intermediate_faces().into_iter().find(|(a, b)| lg.vertices[a].label == Expr::Unit || lg.vertices[b].label == Expr::Unit)
    {
        trace.steps.extend(lg.eliminate_face(&a, &b)?);
    }
    for j in order {
        let fs = locate(&exprs, j)?;
        let done = joined.entry((j.expr.clone(), j.path.clone())).or_default();
        let mut lo = j.joint;
        while lo > 0 && done.contains(&(lo - 1)) {
            lo -= 1;
        }
        let mut hi = j.joint + 1;
        while hi + 1 < fs.len() && done.contains(&hi) {
            hi += 1;
        }
        done.insert(j.joint);
        let lv = s.expand(&Expr::product(fs[lo..=j.joint].to_vec()))?.canonical();
        let rv = s.expand(&Expr::product(fs[j.joint + 1..=hi].to_vec()))?.canonical();
        let hit = lg
            .intermediate_faces()
            .into_iter()
            .find(|(a, b)| lg.vertices[a].label.canonical() == lv && lg.vertices[b].label.canonical() == rv);
        match hit {
            Some((a, b)) => trace.steps.extend(lg.eliminate_face(&a, &b)?),
            None => {
                let want = Expr::mul(lv.clone(), rv.clone()).canonical();
                if lg.labeled().iter().any(|v| v.label.canonical() == want) {
                    shared.push(j.clone());
                } else {
                    return Err(Error::FaceMissing(lv.to_string(), rv.to_string()));
                }
            }
        }
    }
    Ok(Replay { graph: lg, trace, shared })
}

/// Parse relation lines: `a*b` (direct), `s1|s2s3` or `a|b*c` (indirect-right),
/// `s3s1|s2` or `c*a|b` (indirect-left).
pub fn parse_relations(text: &str) -> Result<RelationTable> {
    let mut tab = RelationTable::default();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let id = format!("line{}", ln + 1);
        let bad = |msg: &str| Error::Syntax { line: ln + 1, col: 1, msg: msg.to_string() };
        match line.split_once('|') {
            None => {
                let t = tokens(line);
                if t.len() != 2 {
                    return Err(bad("a direct relation names two symbols"));
                }
                tab.record(&t[0], &t[1], Occurrence { expr: id, kind: RelKind::Direct, witness: None });
            }
            Some((_, r)) if r.contains('|') => return Err(bad("more than one `|`")),
            Some((l, r)) => {
                let (l, r) = (tokens(l), tokens(r));
                match (l.len(), r.len()) {
                    (1, 1) | (1, 2) => tab.record(
                        &l[0],
                        &r[0],
                        Occurrence { expr: id, kind: RelKind::IndirectRight, witness: r.get(1).cloned() },
                    ),
                    (2, 1) => tab.record(
                        &l[1],
                        &r[0],
                        Occurrence { expr: id, kind: RelKind::IndirectLeft, witness: Some(l[0].clone()) },
                    ),
                    _ => return Err(bad("expected `a|bc` or `ca|b`")),
                }
            }
        }
    }
    Ok(tab)
}

/// Split on `*` and whitespace, and between a digit and a following letter.
fn tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in s.split(|c: char| c == '*' || c.is_whitespace()).filter(|c| !c.is_empty()) {
        let mut cur = String::new();
        let mut prev_digit = false;
        for c in chunk.chars() {
            if c.is_ascii_alphabetic() && prev_digit && !cur.is_empty() {
                out.push(core::mem::take(&mut cur));
            }
            prev_digit = c.is_ascii_digit();
            cur.push(c);
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

/// Faces sorted naturally, for stable output.
pub fn sorted_faces(fs: &BTreeSet<Face>) -> Vec<Face> {
    let mut v: Vec<Face> = fs.iter().cloned().collect();
    v.sort_by(|a, b| natord::cmp(&a.0, &b.0).then_with(|| natord::cmp(&a.1, &b.1)));
    v
}
