//! Complex-block factorization by vertex splitting, with optional reference edges.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::{Expr, ExprSet};
use crate::graph::DiffGraph;
use crate::natord;
use crate::net::{Kind, Net};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Backward,
    Forward,
}

/// One transcript record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub step: usize,
    pub op: String,
    pub args: Vec<String>,
    pub page: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Transcript {
    pub steps: Vec<Step>,
}

impl Transcript {
    pub fn push(&mut self, op: &str, args: Vec<String>, page: usize) {
        let step = self.steps.len();
        self.steps.push(Step { step, op: op.to_string(), args, page });
    }
}

#[derive(Clone, Debug)]
pub struct Factorized {
    pub graph: DiffGraph,
    pub exprs: ExprSet,
    pub transcript: Transcript,
}

fn single_pair(g: &DiffGraph) -> Result<(String, String)> {
    let (r, t) = (g.roots(), g.terminals());
    if r.len() != 1 || t.len() != 1 {
        return Err(Error::NotSingleRootTerminal { roots: r.len(), terminals: t.len() });
    }
    Ok((r[0].clone(), t[0].clone()))
}

pub fn factorize_backward(g: &DiffGraph) -> Result<DiffGraph> {
    Ok(factorize(g, Direction::Backward, false)?.graph)
}

pub fn factorize_forward(g: &DiffGraph) -> Result<DiffGraph> {
    Ok(factorize(g, Direction::Forward, false)?.graph)
}

/// Backward factorization that turns each simple block about to be copied into a reference edge.
pub fn factorize_with_refs(g: &DiffGraph) -> Result<(DiffGraph, ExprSet)> {
    let f = factorize(g, Direction::Backward, true)?;
    Ok((f.graph, f.exprs))
}

/// Split vertices until the single-root, single-terminal graph is series-parallel.
pub fn factorize(g: &DiffGraph, dir: Direction, refs: bool) -> Result<Factorized> {
    let (root, term) = single_pair(g)?;
    let protected: BTreeSet<String> = [root.clone(), term.clone()].into_iter().collect();
    let mut net = Net::from_graph(g, protected);
    let mut exprs = ExprSet::new();
    let mut tr = Transcript::default();
    let mut names = RefNamer::new(g);
    run(&mut net, dir, refs, &mut exprs, &mut tr, &mut names, 0)?;
    let body = net.single().and_then(|l| l.expr.clone()).ok_or_else(|| net.error_for_stall())?;
    exprs.entries.insert((root, term), body);
    Ok(Factorized { graph: net.to_graph()?, exprs, transcript: tr })
}

/// Allocates `s<k>` names that clash with neither edges nor earlier refs.
#[derive(Clone, Debug)]
pub(crate) struct RefNamer {
    taken: BTreeSet<String>,
    next: usize,
}

impl RefNamer {
    pub fn new(g: &DiffGraph) -> Self {
        let mut taken: BTreeSet<String> = g.edges().iter().map(|e| e.id.clone()).collect();
        for e in g.edges() {
            taken.extend(e.label.refs());
        }
        RefNamer { taken, next: 1 }
    }


    pub fn fresh(&mut self) -> String {
        loop {
            let n = alloc::format!("s{}", self.next);
            self.next += 1;
            if self.taken.insert(n.clone()) {
                return n;
            }
        }
    }
}

/// Reduce and split inside `net` until one link remains.
pub(crate) fn run(
    net: &mut Net,
    dir: Direction,
    refs: bool,
    exprs: &mut ExprSet,
    tr: &mut Transcript,
    names: &mut RefNamer,
    page: usize,
) -> Result<()> {
    loop {
        net.reduce();
        if net.single().is_some() {
            return Ok(());
        }
        let v = match pick_target(net, dir) {
            Some(v) => v,
            None => return Err(net.error_for_stall()),
        };
        split(net, &v, dir, refs, exprs, tr, names, page);
    }
}

pub(crate) fn pick_target(net: &Net, dir: Direction) -> Option<String> {
    let lv = net.levels();
    let mut cands: Vec<(usize, String)> = Vec::new();
    for v in net.vertices() {
        if net.protected.contains(&v) {
            continue;
        }
        let deg = match dir {
            Direction::Backward => net.in_links(&v).len(),
            Direction::Forward => net.out_links(&v).len(),
        };
        if deg > 1 {
            cands.push((lv[&v], v));
        }
    }
    cands.sort_by(|a, b| match dir {
        Direction::Backward => b.0.cmp(&a.0).then_with(|| natord::cmp(&a.1, &b.1)),
        Direction::Forward => a.0.cmp(&b.0).then_with(|| natord::cmp(&a.1, &b.1)),
    });
    cands.into_iter().next().map(|c| c.1)
}

/// Give every incoming (backward) or outgoing (forward) link but the first its own copy of `v`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn split(
    net: &mut Net,
    v: &str,
    dir: Direction,
    refs: bool,
    exprs: &mut ExprSet,
    tr: &mut Transcript,
    names: &mut RefNamer,
    page: usize,
) {
    let (movers, shared) = match dir {
        Direction::Backward => (net.in_links(v), net.out_links(v)),
        Direction::Forward => (net.out_links(v), net.in_links(v)),
    };
    let mut shared = shared;
    if refs {
        for k in shared.iter_mut() {
            let l = &net.links[k];
            if l.kind == Kind::Block && l.expr.is_some() {
                let name = names.fresh();
                let (s, d) = (l.src.clone(), l.dst.clone());
                let def = net.to_ref(*k, &name);
                tr.push("replace", alloc::vec![name.clone(), s, d, def.to_string()], page);
                exprs.defs.push((name, def));
            }
        }
    }
    for &m in movers.iter().skip(1) {
        let copy = net.fresh_vertex(v);
        net.rebind(m, v, &copy, dir == Direction::Backward);
        for &s in &shared {
            let (src, dst) = {
                let l = &net.links[&s];
                match dir {
                    Direction::Backward => (copy.clone(), l.dst.clone()),
                    Direction::Forward => (l.src.clone(), copy.clone()),
                }
            };
            net.copy_link(s, &src, &dst);
        }
        tr.push("split", alloc::vec![v.to_string(), copy], page);
    }
}

/// Expression of a factorized single-pair graph, with its references.
pub fn factorized_expr(f: &Factorized) -> Option<&Expr> {
    f.exprs.entries.values().next()
}
