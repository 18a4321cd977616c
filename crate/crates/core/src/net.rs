//! Contracted multigraph used for series-parallel reduction and vertex splitting.
//! Each link stands for a sub-structure of the underlying graph and carries its
//! expression plus the real edges it covers.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::graph::{DiffGraph, Edge};
use crate::natord;
use crate::structure::{StructureKind, Tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Kind {
    Atom,
    Chain,
    Block,
    Complex,
}

#[derive(Clone, Debug)]
pub(crate) struct Link {
    pub src: String,
    pub dst: String,
    /// None once a complex region has been swallowed.
    pub expr: Option<Expr>,
    pub kind: Kind,
    pub edges: Vec<Edge>,
    pub inner: BTreeSet<String>,
    /// Position of the earliest covered edge; orders parallel terms.
    pub key: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Net {
    pub links: BTreeMap<usize, Link>,
    next: usize,
    pub protected: BTreeSet<String>,
    pub records: Vec<(usize, StructureKind)>,
    /// Creation index of every real edge id.
    order: BTreeMap<String, usize>,
    /// Copy name -> original vertex or edge id.
    pub origin: BTreeMap<String, String>,
    used_vertices: BTreeSet<String>,
}

impl Net {
    pub fn from_graph(g: &DiffGraph, protected: BTreeSet<String>) -> Net {
        let mut net = Net {
            links: BTreeMap::new(),
            next: 0,
            protected,
            records: Vec::new(),
            order: BTreeMap::new(),
            origin: BTreeMap::new(),
            used_vertices: g.vertices().into_iter().collect(),
        };
        for (k, e) in g.edges().iter().enumerate() {
            net.order.insert(e.id.clone(), k);
            net.add(Link {
                src: e.src.clone(),
                dst: e.dst.clone(),
                expr: Some(e.label.clone()),
                kind: Kind::Atom,
                edges: alloc::vec![e.clone()],
                inner: BTreeSet::new(),
                key: k,
            });
        }
        net
    }

    pub fn add(&mut self, l: Link) -> usize {
        let id = self.next;
        self.next += 1;
        self.links.insert(id, l);
        id
    }

    pub fn vertices(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        for l in self.links.values() {
            s.insert(l.src.clone());
            s.insert(l.dst.clone());
        }
        s
    }

    pub fn out_links(&self, v: &str) -> Vec<usize> {
        let mut v: Vec<usize> = self.links.iter().filter(|(_, l)| l.src == v).map(|(&k, _)| k).collect();
        v.sort_by_key(|k| self.links[k].key);
        v
    }

    pub fn in_links(&self, v: &str) -> Vec<usize> {
        let mut v: Vec<usize> = self.links.iter().filter(|(_, l)| l.dst == v).map(|(&k, _)| k).collect();
        v.sort_by_key(|k| self.links[k].key);
        v
    }

    /// Topological order of the link graph.
    pub fn topo(&self) -> Vec<String> {
        let verts = self.vertices();
        let mut indeg: BTreeMap<String, usize> = verts.iter().map(|v| (v.clone(), 0)).collect();
        for l in self.links.values() {
            *indeg.get_mut(&l.dst).unwrap() += 1;
        }
        let mut ready: Vec<String> = indeg.iter().filter(|(_, &d)| d == 0).map(|(v, _)| v.clone()).collect();
        let mut out = Vec::new();
        while !ready.is_empty() {
            ready.sort_by(|a, b| natord::cmp(b, a));
            let v = ready.pop().unwrap();
            for k in self.out_links(&v) {
                let d = indeg.get_mut(&self.links[&k].dst).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(self.links[&k].dst.clone());
                }
            }
            out.push(v);
        }
        out
    }

    /// Longest-path level of each vertex from the sources of the link graph.
    pub fn levels(&self) -> BTreeMap<String, usize> {
        let mut lv: BTreeMap<String, usize> = BTreeMap::new();
        for v in self.topo() {
            let l = self.in_links(&v).iter().map(|k| lv[&self.links[k].src] + 1).max().unwrap_or(0);
            lv.insert(v, l);
        }
        lv
    }


    fn record(&mut self, id: usize, tag: Tag) {
        let l = &self.links[&id];
        let mut vertices = l.inner.clone();
        vertices.insert(l.src.clone());
        vertices.insert(l.dst.clone());
        let edges = l.edges.iter().map(|e| e.id.clone()).collect();
        self.records.push((
            id,
            StructureKind { tag, src: l.src.clone(), sink: l.dst.clone(), vertices, edges },
        ));
    }

    fn drop_record(&mut self, id: usize) {
        self.records.retain(|r| r.0 != id);
    }

    /// Merge a maximal run of degree-(1,1) vertices into one link.
    fn series_step(&mut self) -> bool {
        let cand = self.vertices().into_iter().find(|v| self.is_series(v));
        let v = match cand {
            Some(v) => v,
            None => return false,
        };
        let mut first = self.in_links(&v)[0];
        while self.is_series(&self.links[&first].src.clone()) {
            first = self.in_links(&self.links[&first].src.clone())[0];
        }
        let mut parts = alloc::vec![first];
        let mut at = self.links[&first].dst.clone();
        while self.is_series(&at) {
            let nxt = self.out_links(&at)[0];
            parts.push(nxt);
            at = self.links[&nxt].dst.clone();
        }
        let merged = self.merge(&parts, Kind::Chain);
        let tag = self.chain_tag(merged);
        self.record(merged, tag);
        true
    }

    fn is_series(&self, v: &str) -> bool {
        if self.protected.contains(v) {
            return false;
        }
        let (i, o) = (self.in_links(v), self.out_links(v));
        i.len() == 1 && o.len() == 1 && self.links[&i[0]].src != self.links[&o[0]].dst
    }

    fn parallel_step(&mut self) -> bool {
        let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
        for (&k, l) in &self.links {
            groups.entry((l.src.clone(), l.dst.clone())).or_default().push(k);
        }
        let found = groups.into_values().find(|g| g.len() > 1);
        let mut parts = match found {
            Some(p) => p,
            None => return false,
        };
        parts.sort_by_key(|k| self.links[k].key);
        let merged = self.merge(&parts, Kind::Block);
        let tag = self.block_tag(merged);
        self.record(merged, tag);
        true
    }

    /// Replace `parts` (a chain in order, or parallel links) by one link.
    pub fn merge(&mut self, parts: &[usize], kind: Kind) -> usize {
        let mut exprs = Vec::new();
        let mut edges = Vec::new();
        let mut inner = BTreeSet::new();
        let mut key = usize::MAX;
        let src = self.links[&parts[0]].src.clone();
        let dst = self.links[&parts[parts.len() - 1]].dst.clone();
        let mut complete = true;
        for (n, p) in parts.iter().enumerate() {
            let l = self.links.remove(p).unwrap();
            if l.kind == kind {
                self.drop_record(*p);
            }
            match l.expr {
                Some(e) => exprs.push(e),
                None => complete = false,
            }
            edges.extend(l.edges);
            inner.extend(l.inner);
            if kind == Kind::Chain && n > 0 {
                inner.insert(l.src);
            }
            key = key.min(l.key);
        }
        let expr = if !complete {
            None
        } else if kind == Kind::Chain {
            Some(Expr::product(exprs))
        } else {
            Some(Expr::sum(exprs))
        };
        self.add(Link { src, dst, expr, kind, edges, inner, key })
    }


    fn chain_tag(&self, id: usize) -> Tag {
        match &self.links[&id].expr {
            None => Tag::ComplexChain,
            Some(Expr::Prod(fs)) if fs.iter().all(Expr::is_atom) => Tag::DirectSimpleChain,
            Some(_) => Tag::IndirectSimpleChain,
        }
    }

    fn block_tag(&self, id: usize) -> Tag {
        match &self.links[&id].expr {
            None => Tag::Block,
            Some(Expr::Sum(ts)) if ts.iter().all(is_direct_branch) => Tag::DirectSimpleBlock,
            Some(_) => Tag::IndirectSimpleBlock,
        }
    }

    /// Series and parallel contractions until neither applies.
    pub fn reduce(&mut self) {
        loop {
            if self.series_step() {
                continue;
            }
            if self.parallel_step() {
                continue;
            }
            break;
        }
    }

    pub fn single(&self) -> Option<&Link> {
        if self.links.len() == 1 {
            self.links.values().next()
        } else {
            None
        }
    }

    /// Smallest closed region `u -> w` whose interior has no outside links.
    pub fn find_closed_region(&self) -> Option<(String, String, BTreeSet<String>)> {
        let topo = self.topo();
        let pos: BTreeMap<&str, usize> = topo.iter().enumerate().map(|(k, v)| (v.as_str(), k)).collect();
        let desc = self.reach(false);
        let anc = self.reach(true);
        let mut best: Option<(usize, usize, usize, String, String, BTreeSet<String>)> = None;
        for u in &topo {
            for w in &desc[u] {
                let mid: BTreeSet<String> = desc[u].intersection(&anc[w]).cloned().collect();
                if mid.is_empty() || mid.iter().any(|m| self.protected.contains(m)) {
                    continue;
                }
                let closed = mid.iter().all(|m| {
                    self.in_links(m).iter().all(|k| {
                        let s = &self.links[k].src;
                        s == u || mid.contains(s)
                    }) && self.out_links(m).iter().all(|k| {
                        let d = &self.links[k].dst;
                        d == w || mid.contains(d)
                    })
                });
                if !closed {
                    continue;
                }
                let cand = (mid.len(), pos[u.as_str()], pos[w.as_str()], u.clone(), w.clone(), mid);
                if best.as_ref().map_or(true, |b| (cand.0, cand.1, cand.2) < (b.0, b.1, b.2)) {
                    best = Some(cand);
                }
            }
        }
        best.map(|b| (b.3, b.4, b.5))
    }

    fn reach(&self, backward: bool) -> BTreeMap<String, BTreeSet<String>> {
        let topo = self.topo();
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let order: Vec<&String> = if backward { topo.iter().collect() } else { topo.iter().rev().collect() };
        for v in order {
            let mut s = BTreeSet::new();
            let next: Vec<String> = if backward {
                self.in_links(v).iter().map(|k| self.links[k].src.clone()).collect()
            } else {
                self.out_links(v).iter().map(|k| self.links[k].dst.clone()).collect()
            };
            for n in next {
                s.extend(out[&n].iter().cloned());
                s.insert(n);
            }
            out.insert(v.clone(), s);
        }
        out
    }

    /// Contract a closed region into one opaque link and record it.
    pub fn contract_region(&mut self, u: &str, w: &str, mid: &BTreeSet<String>, tag: Tag) -> usize {
        let parts: Vec<usize> = self
            .links
            .iter()
            .filter(|(_, l)| (l.src == u || mid.contains(&l.src)) && (l.dst == w || mid.contains(&l.dst)))
            .map(|(&k, _)| k)
            .collect();
        let mut edges = Vec::new();
        let mut inner = mid.clone();
        let mut key = usize::MAX;
        for p in parts {
            let l = self.links.remove(&p).unwrap();
            edges.extend(l.edges);
            inner.extend(l.inner);
            key = key.min(l.key);
        }
        let id = self.add(Link {
            src: u.to_string(),
            dst: w.to_string(),
            expr: None,
            kind: Kind::Complex,
            edges,
            inner,
            key,
        });
        self.record(id, tag);
        id
    }

    /// Sub-net holding the links that lie on some `a -> b` path.
    pub fn view(&self, a: &str, b: &str) -> Net {
        let desc = self.reach(false);
        let anc = self.reach(true);
        let ok = |v: &String, is_src: bool| {
            if is_src {
                v == a || (desc[a].contains(v) && anc[b].contains(v))
            } else {
                v == b || (desc[a].contains(v) && anc[b].contains(v))
            }
        };
        let mut net = Net {
            links: BTreeMap::new(),
            next: 0,
            protected: [a.to_string(), b.to_string()].into_iter().collect(),
            records: Vec::new(),
            order: self.order.clone(),
            origin: self.origin.clone(),
            used_vertices: self.used_vertices.clone(),
        };
        if !desc.contains_key(a) || !anc.contains_key(b) {
            return net;
        }
        for l in self.links.values() {
            if ok(&l.src, true) && ok(&l.dst, false) {
                net.add(l.clone());
            }
        }
        net
    }

    /// Fresh copy name `<origin>.<k>` for a vertex.
    pub fn fresh_vertex(&mut self, v: &str) -> String {
        let base = self.origin.get(v).cloned().unwrap_or_else(|| v.to_string());
        let mut k = 1;
        loop {
            let cand = format!("{base}.{k}");
            if !self.used_vertices.contains(&cand) {
                self.used_vertices.insert(cand.clone());
                self.origin.insert(cand.clone(), base);
                return cand;
            }
            k += 1;
        }
    }

    fn fresh_edge(&mut self, id: &str) -> String {
        let base = self.origin.get(id).cloned().unwrap_or_else(|| id.to_string());
        let mut k = 1;
        loop {
            let cand = format!("{base}.{k}");
            if !self.order.contains_key(&cand) {
                let n = self.order.len();
                self.order.insert(cand.clone(), n);
                self.origin.insert(cand.clone(), base);
                return cand;
            }
            k += 1;
        }
    }

    /// Register a new real edge id (used by reference edges).
    pub fn claim_edge_id(&mut self, id: &str) -> usize {
        let n = self.order.len();
        *self.order.entry(id.to_string()).or_insert(n)
    }


    /// Deep copy of a link with new interior names; `src`/`dst` rebound.
    pub fn copy_link(&mut self, id: usize, src: &str, dst: &str) -> usize {
        let l = self.links[&id].clone();
        let mut rename: BTreeMap<String, String> = BTreeMap::new();
        for v in &l.inner {
            let n = self.fresh_vertex(v);
            rename.insert(v.clone(), n);
        }
        rename.insert(l.src.clone(), src.to_string());
        rename.insert(l.dst.clone(), dst.to_string());
        let mut edges = Vec::new();
        let mut key = usize::MAX;
        for e in &l.edges {
            let nid = self.fresh_edge(&e.id);
            key = key.min(self.order[&nid]);
            edges.push(Edge {
                id: nid,
                src: rename.get(&e.src).cloned().unwrap_or_else(|| e.src.clone()),
                dst: rename.get(&e.dst).cloned().unwrap_or_else(|| e.dst.clone()),
                label: e.label.clone(),
            });
        }
        let inner = l.inner.iter().map(|v| rename[v].clone()).collect();
        self.add(Link { src: src.to_string(), dst: dst.to_string(), expr: l.expr, kind: l.kind, edges, inner, key })
    }

    /// Move one end of a link; `head` picks the destination end.
    /// A link moved at its head sorts after every existing parallel term.
    pub fn rebind(&mut self, id: usize, from: &str, to: &str, head: bool) {
        let last = self.links.values().map(|l| l.key).max().unwrap_or(0).max(self.order.len());
        let l = self.links.get_mut(&id).unwrap();
        if head {
            l.key = last + 1;
        }
        if head {
            l.dst = to.to_string();
        } else {
            l.src = to.to_string();
        }
        for e in &mut l.edges {
            if head && e.dst == from {
                e.dst = to.to_string();
            }
            if !head && e.src == from {
                e.src = to.to_string();
            }
        }
    }

    /// Replace a link by a single reference edge `name`.
    pub fn to_ref(&mut self, id: usize, name: &str) -> Expr {
        let key = self.claim_edge_id(name);
        let l = self.links.remove(&id).unwrap();
        self.drop_record(id);
        let def = l.expr.clone().expect("reference to a complete link");
        let e = Edge::new(name, &l.src, &l.dst, Expr::Ref(name.to_string()));
        self.links.insert(
            id,
            Link {
                src: l.src,
                dst: l.dst,
                expr: Some(Expr::Ref(name.to_string())),
                kind: Kind::Atom,
                edges: alloc::vec![e],
                inner: BTreeSet::new(),
                key,
            },
        );
        def
    }

    /// Underlying graph of all covered edges, in creation order.
    pub fn to_graph(&self) -> Result<DiffGraph> {
        let mut edges: Vec<Edge> = self.links.values().flat_map(|l| l.edges.iter().cloned()).collect();
        edges.sort_by_key(|e| self.order.get(&e.id).copied().unwrap_or(usize::MAX));
        DiffGraph::new(edges)
    }


    pub fn error_for_stall(&self) -> Error {
        match self.find_closed_region() {
            Some((u, w, _)) => Error::ComplexBlock { src: u, sink: w },
            None => {
                let v = self.vertices().into_iter().next().unwrap_or_default();
                Error::ComplexBlock { src: v.clone(), sink: v }
            }
        }
    }
}

pub(crate) fn is_direct_branch(e: &Expr) -> bool {
    match e {
        Expr::Prod(fs) => fs.iter().all(Expr::is_atom),
        a => a.is_atom(),
    }
}

