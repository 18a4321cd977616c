//! Differentiation graphs: labeled DAGs directed from roots to terminals.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::natord;

pub const DEFAULT_PATH_GUARD: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub label: Expr,
}

impl Edge {
    pub fn new(id: &str, src: &str, dst: &str, label: Expr) -> Edge {
        Edge { id: id.to_string(), src: src.to_string(), dst: dst.to_string(), label }
    }

    /// Edge whose label is its own id.
    pub fn sym(id: &str, src: &str, dst: &str) -> Edge {
        Edge::new(id, src, dst, Expr::atom(id))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Path(pub Vec<String>);

impl Path {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, e: &str) -> bool {
        self.0.iter().any(|x| x == e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub roots: Vec<String>,
    pub inner: Vec<String>,
    pub terminals: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Levels {
    pub level: BTreeMap<String, usize>,
    pub cross: Vec<String>,
}

impl Levels {
    pub fn of(&self, v: &str) -> usize {
        self.level[v]
    }

    /// Length of the longest root-to-vertex path in the graph.
    pub fn depth(&self) -> usize {
        self.level.values().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffGraph {
    vertices: BTreeSet<String>,
    edges: Vec<Edge>,
    index: BTreeMap<String, usize>,
    succ: BTreeMap<String, Vec<usize>>,
    pred: BTreeMap<String, Vec<usize>>,
    topo: Vec<String>,
}

impl DiffGraph {
    pub fn new(edges: Vec<Edge>) -> Result<DiffGraph> {
        if edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut index = BTreeMap::new();
        let mut pairs = BTreeSet::new();
        let mut vertices = BTreeSet::new();
        let mut succ: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut pred: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (k, e) in edges.iter().enumerate() {
            if index.insert(e.id.clone(), k).is_some() {
                return Err(Error::DuplicateEdge(e.id.clone()));
            }
            if !pairs.insert((e.src.clone(), e.dst.clone())) {
                return Err(Error::ParallelEdge(e.src.clone(), e.dst.clone()));
            }
            if e.src == e.dst {
                return Err(Error::Cycle(alloc::vec![e.src.clone()]));
            }
            vertices.insert(e.src.clone());
            vertices.insert(e.dst.clone());
            succ.entry(e.src.clone()).or_default().push(k);
            pred.entry(e.dst.clone()).or_default().push(k);
        }
        for v in &vertices {
            succ.entry(v.clone()).or_default();
            pred.entry(v.clone()).or_default();
        }
        for list in succ.values_mut().chain(pred.values_mut()) {
            list.sort_by(|&a, &b| natord::cmp(&edges[a].id, &edges[b].id));
        }
        let mut g = DiffGraph { vertices, edges, index, succ, pred, topo: Vec::new() };
        g.topo = g.compute_topo()?;
        Ok(g)
    }

    fn compute_topo(&self) -> Result<Vec<String>> {
        let mut indeg: BTreeMap<&str, usize> =
            self.vertices.iter().map(|v| (v.as_str(), self.pred[v].len())).collect();
        let mut ready: Vec<&str> = indeg.iter().filter(|(_, &d)| d == 0).map(|(v, _)| *v).collect();
        ready.sort_by(|a, b| natord::cmp(b, a));
        let mut out = Vec::new();
        while let Some(v) = ready.pop() {
            out.push(v.to_string());
            let mut fresh = Vec::new();
            for &k in &self.succ[v] {
                let d = indeg.get_mut(self.edges[k].dst.as_str()).unwrap();
                *d -= 1;
                if *d == 0 {
                    fresh.push(self.edges[k].dst.as_str());
                }
            }
            ready.extend(fresh);
            ready.sort_by(|a, b| natord::cmp(b, a));
        }
        if out.len() != self.vertices.len() {
            let mut stuck: Vec<String> =
                indeg.into_iter().filter(|(_, d)| *d > 0).map(|(v, _)| v.to_string()).collect();
            natord::sort(&mut stuck);
            return Err(Error::Cycle(stuck));
        }
        Ok(out)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.index.get(id).map(|&k| &self.edges[k])
    }

    pub fn has_vertex(&self, v: &str) -> bool {
        self.vertices.contains(v)
    }

    /// Vertices in natural order.
    pub fn vertices(&self) -> Vec<String> {
        let mut v: Vec<String> = self.vertices.iter().cloned().collect();
        natord::sort(&mut v);
        v
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Vertices with every predecessor listed first; ties broken naturally.
    pub fn topo_order(&self) -> &[String] {
        &self.topo
    }

    pub fn out_edges(&self, v: &str) -> Vec<&Edge> {
        self.succ.get(v).map(|l| l.iter().map(|&k| &self.edges[k]).collect()).unwrap_or_default()
    }

    pub fn in_edges(&self, v: &str) -> Vec<&Edge> {
        self.pred.get(v).map(|l| l.iter().map(|&k| &self.edges[k]).collect()).unwrap_or_default()
    }

    pub fn out_degree(&self, v: &str) -> usize {
        self.succ.get(v).map_or(0, Vec::len)
    }

    pub fn in_degree(&self, v: &str) -> usize {
        self.pred.get(v).map_or(0, Vec::len)
    }

    pub fn find_edge(&self, src: &str, dst: &str) -> Option<&Edge> {
        self.out_edges(src).into_iter().find(|e| e.dst == dst)
    }

    pub fn roots(&self) -> Vec<String> {
        self.vertices().into_iter().filter(|v| self.in_degree(v) == 0).collect()
    }

    pub fn terminals(&self) -> Vec<String> {
        self.vertices().into_iter().filter(|v| self.out_degree(v) == 0).collect()
    }

    pub fn is_root(&self, v: &str) -> bool {
        self.has_vertex(v) && self.in_degree(v) == 0
    }

    pub fn is_terminal(&self, v: &str) -> bool {
        self.has_vertex(v) && self.out_degree(v) == 0
    }

    pub fn classify_vertices(&self) -> Partition {
        let mut p = Partition { roots: Vec::new(), inner: Vec::new(), terminals: Vec::new() };
        for v in self.vertices() {
            if self.in_degree(&v) == 0 {
                p.roots.push(v);
            } else if self.out_degree(&v) == 0 {
                p.terminals.push(v);
            } else {
                p.inner.push(v);
            }
        }
        p
    }

    fn check_vertex(&self, v: &str) -> Result<()> {
        if self.has_vertex(v) {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v.to_string()))
        }
    }

    /// All paths `from -> to`, ordered lexicographically by edge id sequence.
    pub fn enumerate_paths(&self, from: &str, to: &str, guard: usize) -> Result<Vec<Path>> {
        self.check_vertex(from)?;
        self.check_vertex(to)?;
        let reach = self.ancestors_of(to);
        let mut out = Vec::new();
        if from == to || !reach.contains(from) {
            return Ok(out);
        }
        let mut stack: Vec<String> = Vec::new();
        self.dfs_paths(from, to, &reach, &mut stack, &mut out, guard)?;
        Ok(out)
    }

    fn dfs_paths(
        &self,
        at: &str,
        to: &str,
        reach: &BTreeSet<String>,
        stack: &mut Vec<String>,
        out: &mut Vec<Path>,
        guard: usize,
    ) -> Result<()> {
        if at == to {
            if out.len() >= guard {
                return Err(Error::PathGuard(guard));
            }
            out.push(Path(stack.clone()));
            return Ok(());
        }
        for e in self.out_edges(at) {
            if e.dst == to || reach.contains(&e.dst) {
                stack.push(e.id.clone());
                self.dfs_paths(&e.dst, to, reach, stack, out, guard)?;
                stack.pop();
            }
        }
        Ok(())
    }

    /// Number of paths `from -> to` without enumerating them.
    pub fn count_paths(&self, from: &str, to: &str) -> u128 {
        if from == to || !self.has_vertex(from) || !self.has_vertex(to) {
            return 0;
        }
        let mut ways: BTreeMap<&str, u128> = BTreeMap::new();
        ways.insert(from, 1);
        for v in &self.topo {
            let w = match ways.get(v.as_str()) {
                Some(&w) => w,
                None => continue,
            };
            for e in self.out_edges(v) {
                *ways.entry(e.dst.as_str()).or_insert(0) += w;
            }
        }
        ways.get(to).copied().unwrap_or(0)
    }

    /// Vertices with a path of length >= 1 to `v`.
    pub fn ancestors_of(&self, v: &str) -> BTreeSet<String> {
        self.closure(v, true)
    }

    /// Vertices reachable from `v` by a path of length >= 1.
    pub fn descendants_of(&self, v: &str) -> BTreeSet<String> {
        self.closure(v, false)
    }

    fn closure(&self, v: &str, backward: bool) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        queue.push_back(v.to_string());
        while let Some(x) = queue.pop_front() {
            let next: Vec<String> = if backward {
                self.in_edges(&x).iter().map(|e| e.src.clone()).collect()
            } else {
                self.out_edges(&x).iter().map(|e| e.dst.clone()).collect()
            };
            for n in next {
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Longest-path levels and the edges spanning more than one level.
    pub fn depth_levels(&self) -> Levels {
        let mut level: BTreeMap<String, usize> = BTreeMap::new();
        for v in &self.topo {
            let l = self.in_edges(v).iter().map(|e| level[&e.src] + 1).max().unwrap_or(0);
            level.insert(v.clone(), l);
        }
        let cross = self
            .edges
            .iter()
            .filter(|e| level[&e.dst] - level[&e.src] > 1)
            .map(|e| e.id.clone())
            .collect();
        Levels { level, cross }
    }

    /// Levels with every terminal moved to the last row.
    pub fn aligned_levels(&self) -> Levels {
        let mut lv = self.depth_levels();
        let last = lv.depth();
        for t in self.terminals() {
            lv.level.insert(t, last);
        }
        lv.cross = self
            .edges
            .iter()
            .filter(|e| lv.level[&e.dst] - lv.level[&e.src] > 1)
            .map(|e| e.id.clone())
            .collect();
        lv
    }

    /// Roots reaching each vertex and terminals reachable from it.
    pub fn root_sets(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for v in &self.topo {
            let mut s = BTreeSet::new();
            for e in self.in_edges(v) {
                if self.in_degree(&e.src) == 0 {
                    s.insert(e.src.clone());
                }
                s.extend(out[&e.src].iter().cloned());
            }
            out.insert(v.clone(), s);
        }
        out
    }

    pub fn terminal_sets(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for v in self.topo.iter().rev() {
            let mut s = BTreeSet::new();
            for e in self.out_edges(v) {
                if self.out_degree(&e.dst) == 0 {
                    s.insert(e.dst.clone());
                }
                s.extend(out[&e.dst].iter().cloned());
            }
            out.insert(v.clone(), s);
        }
        out
    }

    /// (r-degree, t-degree) for every vertex.
    pub fn rt_degrees(&self) -> BTreeMap<String, (usize, usize)> {
        let r = self.root_sets();
        let t = self.terminal_sets();
        self.vertices.iter().map(|v| (v.clone(), (r[v].len(), t[v].len()))).collect()
    }

    /// Paths of length two through `v`: one per (incoming, outgoing) pair.
    pub fn local_paths(&self, v: &str) -> Vec<Path> {
        let mut out = Vec::new();
        for a in self.in_edges(v) {
            for b in self.out_edges(v) {
                out.push(Path(alloc::vec![a.id.clone(), b.id.clone()]));
            }
        }
        out
    }

    /// Number of paths in `paths` running through edge `e`.
    pub fn overlap_degree(&self, paths: &[Path], e: &str) -> Result<usize> {
        if self.edge(e).is_none() {
            return Err(Error::UnknownEdge(e.to_string()));
        }
        Ok(paths.iter().filter(|p| p.contains(e)).count())
    }

    /// Subgraph holding the listed edges.
    pub fn restrict(&self, keep: &BTreeSet<String>) -> Result<DiffGraph> {
        DiffGraph::new(self.edges.iter().filter(|e| keep.contains(&e.id)).cloned().collect())
    }

    /// Edges lying on at least one `from -> to` path.
    pub fn edges_between(&self, from: &str, to: &str) -> BTreeSet<String> {
        let down = self.descendants_of(from);
        let up = self.ancestors_of(to);
        self.edges
            .iter()
            .filter(|e| {
                (e.src == from || (down.contains(&e.src) && up.contains(&e.src)))
                    && (e.dst == to || (down.contains(&e.dst) && up.contains(&e.dst)))
            })
            .map(|e| e.id.clone())
            .collect()
    }

    /// Every distinct symbol or reference used as a label.
    pub fn labels(&self) -> BTreeSet<Expr> {
        self.edges.iter().map(|e| e.label.clone()).collect()
    }
}

pub fn parse_graph(text: &str) -> Result<DiffGraph> {
    let mut edges = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Syntax { line: ln + 1, col: 1, msg: msg.to_string() };
        if toks[0] != "e" {
            return Err(err("expected `e <edge-id> <src> <dst> [<label>]`"));
        }
        if toks.len() < 4 {
            return Err(err("edge line needs an id, a source and a destination"));
        }
        if toks.len() > 5 {
            return Err(err("too many fields on edge line"));
        }
        for t in &toks[1..] {
            if !t.bytes().all(|c| crate::expr::is_ident_byte(c) || c == b'-') {
                return Err(err("identifiers may hold letters, digits, `_`, `.`, `'` and `-`"));
            }
        }
        let label = Expr::atom(toks.get(4).copied().unwrap_or(toks[1]));
        if let (Some(l), Expr::Sym(_)) = (toks.get(4), &label) {
            if l.as_bytes()[0].is_ascii_digit() {
                return Err(err("numeric labels other than 1 are not allowed"));
            }
        }
        edges.push(Edge::new(toks[1], toks[2], toks[3], label));
    }
    DiffGraph::new(edges)
}

pub fn format_graph(g: &DiffGraph) -> String {
    let mut out = String::new();
    for e in g.edges() {
        let l = e.label.to_string();
        if l == e.id {
            out.push_str(&format!("e {} {} {}\n", e.id, e.src, e.dst));
        } else {
            out.push_str(&format!("e {} {} {} {}\n", e.id, e.src, e.dst, l));
        }
    }
    out
}
