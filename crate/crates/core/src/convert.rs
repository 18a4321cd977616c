//! Conversion between simple differentiation graphs and expressions.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::graph::{DiffGraph, Edge};
use crate::net::Net;

/// Expression for all `src -> sink` paths; fails on a complex block.
pub fn graph_to_expr(g: &DiffGraph, src: &str, sink: &str) -> Result<Expr> {
    for v in [src, sink] {
        if !g.has_vertex(v) {
            return Err(Error::UnknownVertex(v.to_string()));
        }
    }
    let keep = g.edges_between(src, sink);
    if keep.is_empty() {
        return Err(Error::NoStructure { src: src.into(), sink: sink.into() });
    }
    let sub = g.restrict(&keep)?;
    let protected: BTreeSet<String> = [src.to_string(), sink.to_string()].into_iter().collect();
    let mut net = Net::from_graph(&sub, protected);
    net.reduce();
    match net.single() {
        Some(l) => Ok(l.expr.clone().expect("reduced link has an expression")),
        None => Err(net.error_for_stall()),
    }
}

/// Expression for the single root-terminal pair of `g`.
pub fn graph_to_expr_single(g: &DiffGraph) -> Result<Expr> {
    let (r, t) = (g.roots(), g.terminals());
    if r.len() != 1 || t.len() != 1 {
        return Err(Error::NotSingleRootTerminal { roots: r.len(), terminals: t.len() });
    }
    graph_to_expr(g, &r[0], &t[0])
}

pub const EXPR_ROOT: &str = "y";
pub const EXPR_TERMINAL: &str = "x";

/// Simple graph from root `y` to terminal `x` realizing the expression.
pub fn expr_to_graph(e: &Expr) -> DiffGraph {
    let mut b = Builder { edges: Vec::new(), vcount: 0, ids: BTreeSet::new() };
    let e = e.clone().normalize();
    b.build(&e, EXPR_ROOT, EXPR_TERMINAL);
    DiffGraph::new(b.edges).expect("builder emits a DAG")
}

struct Builder {
    edges: Vec<Edge>,
    vcount: usize,
    ids: BTreeSet<String>,
}

impl Builder {
    fn vertex(&mut self) -> String {
        self.vcount += 1;
        format!("w{}", self.vcount)
    }

    fn edge_id(&mut self, label: &Expr) -> String {
        let base = match label {
            Expr::Unit => "u".to_string(),
            l => l.to_string(),
        };
        if label != &Expr::Unit && self.ids.insert(base.clone()) {
            return base;
        }
        let mut k = 1;
        loop {
            let c = format!("{base}.{k}");
            if self.ids.insert(c.clone()) {
                return c;
            }
            k += 1;
        }
    }

    fn edge(&mut self, label: &Expr, a: &str, b: &str) {
        let id = self.edge_id(label);
        self.edges.push(Edge::new(&id, a, b, label.clone()));
    }

    fn build(&mut self, e: &Expr, a: &str, b: &str) {
        match e {
            Expr::Prod(fs) => {
                let mut at = a.to_string();
                for (k, f) in fs.iter().enumerate() {
                    let next = if k + 1 == fs.len() { b.to_string() } else { self.vertex() };
                    self.build(f, &at, &next);
                    at = next;
                }
            }
            Expr::Sum(ts) => {
                let mut direct = false;
                for t in ts {
                    if t.is_atom() {
                        if direct {
                            // a second atom between the same pair goes through a unit edge
                            let m = self.vertex();
                            self.edge(t, a, &m);
                            self.edge(&Expr::Unit, &m, b);
                        } else {
                            direct = true;
                            self.edge(t, a, b);
                        }
                    } else {
                        self.build(t, a, b);
                    }
                }
            }
            atom => self.edge(atom, a, b),
        }
    }
}
