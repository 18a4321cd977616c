//! Chains, simple blocks and complex blocks; cross-level edge segmentation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::graph::{DiffGraph, Edge};
use crate::natord;
use crate::net::{is_direct_branch, Kind, Net};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    DirectSimpleChain,
    IndirectSimpleChain,
    ComplexChain,
    DirectSimpleBlock,
    IndirectSimpleBlock,
    ComplexBlock,
    Block,
    Edge,
}

impl Tag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tag::DirectSimpleChain => "direct-simple-chain",
            Tag::IndirectSimpleChain => "indirect-simple-chain",
            Tag::ComplexChain => "complex-chain",
            Tag::DirectSimpleBlock => "direct-simple-block",
            Tag::IndirectSimpleBlock => "indirect-simple-block",
            Tag::ComplexBlock => "complex-block",
            Tag::Block => "block",
            Tag::Edge => "edge",
        }
    }

    pub fn is_simple(&self) -> bool {
        matches!(
            self,
            Tag::DirectSimpleChain | Tag::IndirectSimpleChain | Tag::DirectSimpleBlock | Tag::IndirectSimpleBlock
        )
    }

    pub fn is_simple_block(&self) -> bool {
        matches!(self, Tag::DirectSimpleBlock | Tag::IndirectSimpleBlock)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureKind {
    pub tag: Tag,
    pub src: String,
    pub sink: String,
    pub vertices: BTreeSet<String>,
    pub edges: BTreeSet<String>,
}

impl StructureKind {
    pub fn sorted_vertices(&self) -> Vec<String> {
        let mut v: Vec<String> = self.vertices.iter().cloned().collect();
        natord::sort(&mut v);
        v
    }

    pub fn sorted_edges(&self) -> Vec<String> {
        let mut v: Vec<String> = self.edges.iter().cloned().collect();
        natord::sort(&mut v);
        v
    }
}

/// Replace every cross-level edge by unit edges followed by the original label.
pub fn segment_cross_level(g: &DiffGraph) -> DiffGraph {
    let lv = g.depth_levels();
    if lv.cross.is_empty() {
        return g.clone();
    }
    let mut used_v: BTreeSet<String> = g.vertices().into_iter().collect();
    let mut used_e: BTreeSet<String> = g.edges().iter().map(|e| e.id.clone()).collect();
    let fresh = |base: &str, used: &mut BTreeSet<String>| {
        let mut k = 1;
        loop {
            let c = format!("{base}.{k}");
            if used.insert(c.clone()) {
                return c;
            }
            k += 1;
        }
    };
    let mut edges = Vec::new();
    for e in g.edges() {
        let span = lv.of(&e.dst) - lv.of(&e.src);
        if span <= 1 {
            edges.push(e.clone());
            continue;
        }
        let mut at = e.src.clone();
        for _ in 1..span {
            let v = fresh(&e.src, &mut used_v);
            let id = fresh(&e.id, &mut used_e);
            edges.push(Edge::new(&id, &at, &v, Expr::Unit));
            at = v;
        }
        edges.push(Edge::new(&e.id, &at, &e.dst, e.label.clone()));
    }
    DiffGraph::new(edges).expect("segmentation keeps the graph acyclic")
}

/// Chains and blocks, innermost first.
pub fn find_structures(g: &DiffGraph) -> Vec<StructureKind> {
    let protected: BTreeSet<String> = g.roots().into_iter().chain(g.terminals()).collect();
    let mut net = Net::from_graph(g, protected);
    loop {
        net.reduce();
        let (u, w, mid) = match net.find_closed_region() {
            Some(r) => r,
            None => break,
        };
        for s in embedded_blocks(&net, &u, &w, &mid) {
            net.records.push((usize::MAX, s));
        }
        net.contract_region(&u, &w, &mid, Tag::ComplexBlock);
    }
    net.records.into_iter().map(|r| r.1).collect()
}

/// Simple blocks sitting inside a complex region when viewed in isolation.
fn embedded_blocks(net: &Net, u: &str, w: &str, mid: &BTreeSet<String>) -> Vec<StructureKind> {
    let topo = net.topo();
    let region: Vec<&String> = topo.iter().filter(|v| *v == u || *v == w || mid.contains(*v)).collect();
    let mut out = Vec::new();
    for (i, a) in region.iter().enumerate() {
        for b in region.iter().skip(i + 1) {
            if (a.as_str(), b.as_str()) == (u, w) {
                continue;
            }
            let mut view = net.view(a, b);
            if view.links.len() < 2 {
                continue;
            }
            view.reduce();
            if let Some(l) = view.single() {
                if l.kind == Kind::Block && l.expr.is_some() {
                    let rec = view.records.last().unwrap().1.clone();
                    if rec.tag.is_simple_block() {
                        out.push(rec);
                    }
                }
            }
        }
    }
    out
}

/// Classify the structure formed by all `src -> sink` paths, viewed in isolation.
pub fn classify_block(g: &DiffGraph, src: &str, sink: &str) -> Result<StructureKind> {
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
    let mut complex = false;
    loop {
        net.reduce();
        if net.single().is_some() {
            break;
        }
        match net.find_closed_region() {
            Some((u, w, mid)) => {
                complex = true;
                net.contract_region(&u, &w, &mid, Tag::ComplexBlock);
            }
            None => break,
        }
    }
    let vertices: BTreeSet<String> = sub.vertices().into_iter().collect();
    let tag = match net.single() {
        None => Tag::ComplexBlock,
        Some(l) => match (l.kind, &l.expr) {
            (Kind::Atom, _) => Tag::Edge,
            (Kind::Complex, _) => Tag::ComplexBlock,
            (Kind::Chain, None) => Tag::ComplexChain,
            (Kind::Block, None) => Tag::Block,
            (Kind::Chain, Some(Expr::Prod(fs))) if fs.iter().all(Expr::is_atom) => Tag::DirectSimpleChain,
            (Kind::Chain, Some(_)) => Tag::IndirectSimpleChain,
            (Kind::Block, Some(Expr::Sum(ts))) if ts.iter().all(is_direct_branch) => Tag::DirectSimpleBlock,
            (Kind::Block, Some(_)) => Tag::IndirectSimpleBlock,
        },
    };
    debug_assert!(!(complex && tag.is_simple()));
    Ok(StructureKind { tag, src: src.into(), sink: sink.into(), vertices, edges: keep })
}

/// True when the paths between the pair use no vertex with links leaving or entering them.
pub fn is_closed(g: &DiffGraph, s: &StructureKind) -> bool {
    s.vertices.iter().filter(|v| **v != s.src && **v != s.sink).all(|v| {
        g.in_edges(v).iter().all(|e| s.edges.contains(&e.id)) && g.out_edges(v).iter().all(|e| s.edges.contains(&e.id))
    })
}

/// Number of vertices per level index, useful in reports.
pub fn level_rows(g: &DiffGraph) -> BTreeMap<usize, Vec<String>> {
    let lv = g.depth_levels();
    let mut rows: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for v in g.vertices() {
        rows.entry(lv.of(&v)).or_default().push(v);
    }
    rows
}
