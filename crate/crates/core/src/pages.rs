//! Multi-root, multi-terminal strategy: split the graph into pages, factorize
//! locally, and merge the per-pair results.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::{Expr, ExprSet};
use crate::factor::{factorize, pick_target, split, Direction, RefNamer, Transcript};
use crate::graph::DiffGraph;
use crate::natord;
use crate::net::{Kind, Net};

/// Upper bound on processed pages before giving up.
pub const PAGE_GUARD: usize = 100_000;

#[derive(Clone, Debug)]
pub struct Page {
    pub id: usize,
    pub graph: DiffGraph,
    /// Local vertex -> vertex of the input graph.
    pub provenance: BTreeMap<String, String>,
    pub roots: Vec<String>,
    pub terminals: Vec<String>,
    /// Entries computed on this page once it holds a single pair or no pivots.
    pub entries: BTreeMap<(String, String), Expr>,
}

#[derive(Clone, Debug)]
pub struct Plan {
    pub pages: Vec<Page>,
    pub defs: Vec<(String, Expr)>,
    pub transcript: Transcript,
}

impl Plan {
    /// Pages that produced entries.
    pub fn leaves(&self) -> impl Iterator<Item = &Page> {
        self.pages.iter().filter(|p| !p.entries.is_empty())
    }
}

fn pair_key(a: &(String, String), b: &(String, String)) -> core::cmp::Ordering {
    natord::cmp(&a.0, &b.0).then_with(|| natord::cmp(&a.1, &b.1))
}

/// Edges on root-to-terminal paths that start at one of `roots` through an edge in
/// `first` and end at one of `terms` through an edge in `last`.
pub fn extract(
    g: &DiffGraph,
    roots: &BTreeSet<String>,
    terms: &BTreeSet<String>,
    first: Option<&BTreeSet<String>>,
    last: Option<&BTreeSet<String>>,
) -> BTreeSet<String> {
    let mut fwd: BTreeSet<String> = BTreeSet::new();
    let mut seen_v: BTreeSet<String> = BTreeSet::new();
    for r in roots {
        for e in g.out_edges(r) {
            if first.is_none_or(|f| f.contains(&e.id)) {
                fwd.insert(e.id.clone());
                seen_v.insert(e.dst.clone());
            }
        }
    }
    for v in g.topo_order() {
        if seen_v.contains(v) {
            for e in g.out_edges(v) {
                fwd.insert(e.id.clone());
                seen_v.insert(e.dst.clone());
            }
        }
    }
    let mut bwd: BTreeSet<String> = BTreeSet::new();
    let mut seen_b: BTreeSet<String> = BTreeSet::new();
    for t in terms {
        for e in g.in_edges(t) {
            if last.is_none_or(|l| l.contains(&e.id)) {
                bwd.insert(e.id.clone());
                seen_b.insert(e.src.clone());
            }
        }
    }
    for v in g.topo_order().iter().rev() {
        if seen_b.contains(v) {
            for e in g.in_edges(v) {
                bwd.insert(e.id.clone());
                seen_b.insert(e.src.clone());
            }
        }
    }
    fwd.intersection(&bwd).cloned().collect()
}

/// Pivot pair: the highest-r-degree vertex closest to the roots, then the
/// highest-t-degree vertex below it closest to the terminals.
pub fn pivots(g: &DiffGraph) -> Option<(String, String)> {
    let lv = g.aligned_levels();
    let deg = g.rt_degrees();
    let inner: Vec<String> = g.vertices().into_iter().filter(|v| !g.is_root(v) && !g.is_terminal(v)).collect();
    if inner.is_empty() {
        return None;
    }
    let vi = pick(&inner, &lv, |v| deg[v].0, true)?;
    let mut below: Vec<String> = g.descendants_of(&vi).into_iter().filter(|v| !g.is_terminal(v)).collect();
    below.push(vi.clone());
    let vj = pick(&below, &lv, |v| deg[v].1, false)?;
    Some((vi, vj))
}

fn pick(
    cands: &[String],
    lv: &crate::graph::Levels,
    d: impl Fn(&String) -> usize,
    top: bool,
) -> Option<String> {
    let best = cands.iter().map(&d).max()?;
    let mut rows: BTreeMap<usize, Vec<&String>> = BTreeMap::new();
    for v in cands {
        rows.entry(lv.of(v)).or_default().push(v);
    }
    let mut order: Vec<usize> = rows.keys().copied().collect();
    if !top {
        order.reverse();
    }
    let unique = order.iter().find_map(|l| {
        let row = &rows[l];
        let hits: Vec<&&String> = row.iter().filter(|v| d(v) == best).collect();
        (hits.len() == 1).then(|| (*hits[0]).clone())
    });
    unique.or_else(|| {
        order.iter().find_map(|l| {
            let mut hits: Vec<String> = rows[l].iter().filter(|v| d(v) == best).map(|v| (*v).clone()).collect();
            natord::sort(&mut hits);
            hits.into_iter().next()
        })
    })
}

struct Planner {
    names: RefNamer,
    defs: Vec<(String, Expr)>,
    tr: Transcript,
    pages: Vec<Page>,
    original: BTreeSet<String>,
    finish_dir: Direction,
    finish_refs: bool,
}

enum Outcome {
    Done(BTreeMap<(String, String), Expr>),
    Split(Vec<DiffGraph>),
    Again(DiffGraph),
}

impl Planner {
    fn provenance(&self, g: &DiffGraph) -> BTreeMap<String, String> {
        g.vertices()
            .into_iter()
            .map(|v| {
                let mut o = v.clone();
                while !self.original.contains(&o) {
                    match o.rfind('.') {
                        Some(k) => o.truncate(k),
                        None => break,
                    }
                }
                (v, o)
            })
            .collect()
    }

    /// Replace every compound link by a reference edge; a page that collapses to
    /// one link per pair yields its entries directly.
    fn replace_simple(&mut self, g: &DiffGraph, page: usize) -> Result<(DiffGraph, Option<BTreeMap<(String, String), Expr>>)> {
        let protected: BTreeSet<String> = g.roots().into_iter().chain(g.terminals()).collect();
        let mut net = Net::from_graph(g, protected);
        net.reduce();
        if net.links.values().all(|l| {
            g.is_root(&l.src) && g.is_terminal(&l.dst)
        }) {
            let mut out = BTreeMap::new();
            for l in net.links.values() {
                out.insert((l.src.clone(), l.dst.clone()), l.expr.clone().expect("reduced link"));
            }
            return Ok((net.to_graph()?, Some(out)));
        }
        self.to_refs(&mut net, page);
        Ok((net.to_graph()?, None))
    }

    fn to_refs(&mut self, net: &mut Net, page: usize) {
        let mut ids: Vec<usize> = net
            .links
            .iter()
            .filter(|(_, l)| matches!(l.kind, Kind::Chain | Kind::Block) && l.expr.is_some())
            .map(|(&k, _)| k)
            .collect();
        ids.sort_by_key(|k| net.links[k].key);
        for k in ids {
            let name = self.names.fresh();
            let (s, d) = (net.links[&k].src.clone(), net.links[&k].dst.clone());
            let def = net.to_ref(k, &name);
            self.tr.push("replace", alloc::vec![name.clone(), s, d, def.to_string()], page);
            self.defs.push((name, def));
        }
    }

    fn finish(&mut self, g: &DiffGraph, page: usize) -> Result<BTreeMap<(String, String), Expr>> {
        let mut out = BTreeMap::new();
        for r in g.roots() {
            for t in g.terminals() {
                let keep = extract(g, &[r.clone()].into(), &[t.clone()].into(), None, None);
                if keep.is_empty() {
                    continue;
                }
                let sub = g.restrict(&keep)?;
                let mut f = factorize(&sub, self.finish_dir, self.finish_refs)?;
                // rename the factorization's local refs into the global namespace
                let mut map: BTreeMap<String, String> = BTreeMap::new();
                for (n, _) in &f.exprs.defs {
                    map.insert(n.clone(), self.names.fresh());
                }
                let ren = |e: &Expr| e.map_refs(&|r| map.get(r).map(|n| Expr::Ref(n.clone())));
                for (n, d) in &f.exprs.defs {
                    self.defs.push((map[n].clone(), ren(d)));
                }
                let body = f.exprs.entries.remove(&(r.clone(), t.clone())).expect("single pair entry");
                self.tr.push("finish", alloc::vec![r.clone(), t.clone()], page);
                out.insert((r.clone(), t.clone()), ren(&body));
            }
        }
        Ok(out)
    }

    fn sub(&self, g: &DiffGraph, keep: &BTreeSet<String>) -> Result<Option<DiffGraph>> {
        if keep.is_empty() {
            return Ok(None);
        }
        Ok(Some(g.restrict(keep)?))
    }

    /// Separate one root (or one terminal) from the rest.
    fn singleton(&mut self, g: &DiffGraph, by_root: bool, page: usize) -> Result<Outcome> {
        let (ys, xs): (BTreeSet<String>, BTreeSet<String>) =
            (g.roots().into_iter().collect(), g.terminals().into_iter().collect());
        let by_root = if ys.len() == 1 { false } else if xs.len() == 1 { true } else { by_root };
        let mut parts = Vec::new();
        if by_root {
            let mut rs: Vec<String> = ys.iter().cloned().collect();
            natord::sort(&mut rs);
            let one: BTreeSet<String> = [rs[0].clone()].into();
            let rest: BTreeSet<String> = ys.difference(&one).cloned().collect();
            self.tr.push("separate-root", alloc::vec![rs[0].clone()], page);
            parts.extend(self.sub(g, &extract(g, &one, &xs, None, None))?);
            parts.extend(self.sub(g, &extract(g, &rest, &xs, None, None))?);
        } else {
            let mut ts: Vec<String> = xs.iter().cloned().collect();
            natord::sort(&mut ts);
            let one: BTreeSet<String> = [ts[0].clone()].into();
            let rest: BTreeSet<String> = xs.difference(&one).cloned().collect();
            self.tr.push("separate-terminal", alloc::vec![ts[0].clone()], page);
            parts.extend(self.sub(g, &extract(g, &ys, &one, None, None))?);
            parts.extend(self.sub(g, &extract(g, &ys, &rest, None, None))?);
        }
        Ok(Outcome::Split(parts))
    }

    fn step(&mut self, g: &DiffGraph, page: usize) -> Result<Outcome> {
        let (g, done) = self.replace_simple(g, page)?;
        if let Some(entries) = done {
            return Ok(Outcome::Done(entries));
        }
        let (ys, xs): (BTreeSet<String>, BTreeSet<String>) =
            (g.roots().into_iter().collect(), g.terminals().into_iter().collect());
        if ys.len() == 1 && xs.len() == 1 {
            return Ok(Outcome::Done(self.finish(&g, page)?));
        }
        let Some((vi, vj)) = pivots(&g) else {
            return Ok(Outcome::Done(self.finish(&g, page)?));
        };
        self.tr.push("pivots", alloc::vec![vi.clone(), vj.clone()], page);
        let rs = g.root_sets();
        let ts = g.terminal_sets();
        let yi = rs[&vi].clone();
        let xj = ts[&vj].clone();
        if yi != ys || xj != xs {
            let mut parts = Vec::new();
            parts.extend(self.sub(&g, &extract(&g, &yi, &xj, None, None))?);
            let other_y: BTreeSet<String> = ys.difference(&yi).cloned().collect();
            let other_x: BTreeSet<String> = xs.difference(&xj).cloned().collect();
            parts.extend(self.sub(&g, &extract(&g, &other_y, &xs, None, None))?);
            parts.extend(self.sub(&g, &extract(&g, &yi, &other_x, None, None))?);
            self.tr.push("split-page", alloc::vec![vi, vj], page);
            return Ok(Outcome::Split(parts));
        }
        let lv = g.aligned_levels();
        let (li, lj) = (lv.of(&vi), lv.of(&vj));
        let last = lv.depth();
        if li >= lj || g.count_paths(&vi, &vj) == 1 {
            return self.separate(&g, li, lj, last, page);
        }
        // local factorization between the pivot levels
        let backward = li >= last - lj;
        let region: BTreeSet<String> = g
            .vertices()
            .into_iter()
            .filter(|v| !g.is_root(v) && !g.is_terminal(v))
            .filter(|v| {
                let l = lv.of(v);
                if backward {
                    l >= li && l < lj
                } else {
                    l > li && l <= lj
                }
            })
            .collect();
        let protected: BTreeSet<String> = g.vertices().into_iter().filter(|v| !region.contains(v)).collect();
        let dir = if backward { Direction::Backward } else { Direction::Forward };
        self.tr.push(
            "factorize-local",
            alloc::vec![vi.clone(), vj.clone(), String::from(if backward { "backward" } else { "forward" })],
            page,
        );
        let mut net = Net::from_graph(&g, protected);
        let mut scratch = ExprSet::new();
        let mut changed = false;
        loop {
            net.reduce();
            let Some(v) = pick_target(&net, dir) else { break };
            split(&mut net, &v, dir, true, &mut scratch, &mut self.tr, &mut self.names, page);
            changed = true;
        }
        self.defs.append(&mut scratch.defs);
        if !changed {
            return self.singleton(&g, li >= last - lj, page);
        }
        net.protected = g.roots().into_iter().chain(g.terminals()).collect();
        net.reduce();
        self.to_refs(&mut net, page);
        Ok(Outcome::Again(net.to_graph()?))
    }

    fn separate(&mut self, g: &DiffGraph, li: usize, lj: usize, last: usize, page: usize) -> Result<Outcome> {
        let lv = g.aligned_levels();
        let span = |e: &crate::graph::Edge| lv.of(&e.dst) - lv.of(&e.src);
        let (ys, xs): (BTreeSet<String>, BTreeSet<String>) =
            (g.roots().into_iter().collect(), g.terminals().into_iter().collect());
        let from_roots: Vec<&crate::graph::Edge> = ys.iter().flat_map(|r| g.out_edges(r)).collect();
        let into_terms: Vec<&crate::graph::Edge> = xs.iter().flat_map(|t| g.in_edges(t)).collect();
        for (side, edges) in [(true, &from_roots), (false, &into_terms)] {
            let top = edges.iter().map(|e| span(e)).max().unwrap_or(0);
            if top <= 1 {
                continue;
            }
            let sel: BTreeSet<String> = edges.iter().filter(|e| span(e) == top).map(|e| e.id.clone()).collect();
            if sel.len() == edges.len() {
                continue;
            }
            let rest: BTreeSet<String> = edges.iter().filter(|e| span(e) != top).map(|e| e.id.clone()).collect();
            let (a, b) = if side {
                (extract(g, &ys, &xs, Some(&sel), None), extract(g, &ys, &xs, Some(&rest), None))
            } else {
                (extract(g, &ys, &xs, None, Some(&sel)), extract(g, &ys, &xs, None, Some(&rest)))
            };
            let mut args: Vec<String> = sel.into_iter().collect();
            natord::sort(&mut args);
            self.tr.push(if side { "separate-cross-root" } else { "separate-cross-terminal" }, args, page);
            let mut parts = Vec::new();
            parts.extend(self.sub(g, &a)?);
            parts.extend(self.sub(g, &b)?);
            return Ok(Outcome::Split(parts));
        }
        self.singleton(g, li >= last - lj, page)
    }
}

/// Run the page strategy on any graph.
pub fn plan_pages(g: &DiffGraph) -> Result<Plan> {
    plan_pages_with(g, Direction::Backward, true)
}

/// As [`plan_pages`], with the factorization used on single-pair pages chosen by the caller.
pub fn plan_pages_with(g: &DiffGraph, finish_dir: Direction, finish_refs: bool) -> Result<Plan> {
    let mut pl = Planner {
        finish_dir,
        finish_refs,
        names: RefNamer::new(g),
        defs: Vec::new(),
        tr: Transcript::default(),
        pages: Vec::new(),
        original: g.vertices().into_iter().collect(),
    };
    let mut queue: VecDeque<(usize, DiffGraph)> = VecDeque::new();
    queue.push_back((0, g.clone()));
    let mut next = 1;
    let mut processed = 0;
    while let Some((id, pg)) = queue.pop_front() {
        processed += 1;
        if processed > PAGE_GUARD {
            return Err(Error::NoProgress);
        }
        let before: BTreeSet<String> = pg.edges().iter().map(|e| e.id.clone()).collect();
        let outcome = pl.step(&pg, id)?;
        let mut page = Page {
            id,
            provenance: pl.provenance(&pg),
            roots: pg.roots(),
            terminals: pg.terminals(),
            graph: pg,
            entries: BTreeMap::new(),
        };
        match outcome {
            Outcome::Done(e) => page.entries = e,
            Outcome::Split(parts) => {
                for p in parts {
                    pl.tr.push("page", alloc::vec![format!("{next}"), format!("{}", p.edges().len())], id);
                    queue.push_back((next, p));
                    next += 1;
                }
            }
            Outcome::Again(ng) => {
                let after: BTreeSet<String> = ng.edges().iter().map(|e| e.id.clone()).collect();
                if after == before {
                    return Err(Error::NoProgress);
                }
                queue.push_front((next, ng));
                pl.tr.push("page", alloc::vec![format!("{next}"), String::from("refactored")], id);
                next += 1;
            }
        }
        pl.pages.push(page);
    }
    Ok(Plan { pages: pl.pages, defs: pl.defs, transcript: pl.tr })
}

/// Sum entries per pair, share identical definitions, inline single-use
/// references and renumber the rest in dependency order.
pub fn merge_pages(plan: &Plan, avoid: &BTreeSet<String>) -> Result<ExprSet> {
    let mut defs: BTreeMap<String, Expr> = BTreeMap::new();
    for (n, d) in &plan.defs {
        match defs.get(n) {
            Some(old) if old != d => return Err(Error::ConflictingRef(n.clone())),
            _ => {
                defs.insert(n.clone(), d.clone());
            }
        }
    }
    let mut acc: BTreeMap<(String, String), Vec<Expr>> = BTreeMap::new();
    for p in plan.leaves() {
        for (k, e) in &p.entries {
            acc.entry(k.clone()).or_default().push(e.clone());
        }
    }
    let mut entries: BTreeMap<(String, String), Expr> =
        acc.into_iter().map(|(k, v)| (k, factor_common(terms_of(Expr::sum(v))))).collect();

    // identical definitions collapse onto the first name
    loop {
        let mut seen: BTreeMap<Expr, String> = BTreeMap::new();
        let mut alias: BTreeMap<String, String> = BTreeMap::new();
        let mut names: Vec<String> = defs.keys().cloned().collect();
        natord::sort(&mut names);
        for n in names {
            let c = defs[&n].canonical();
            match seen.get(&c) {
                Some(first) => {
                    alias.insert(n, first.clone());
                }
                None => {
                    seen.insert(c, n);
                }
            }
        }
        if alias.is_empty() {
            break;
        }
        let f = |r: &str| alias.get(r).map(|n| Expr::Ref(n.clone()));
        for a in alias.keys() {
            defs.remove(a);
        }
        for d in defs.values_mut() {
            *d = d.map_refs(&f);
        }
        for e in entries.values_mut() {
            *e = e.map_refs(&f);
        }
    }

    // inline references used at most once
    loop {
        let mut uses: BTreeMap<String, usize> = defs.keys().map(|k| (k.clone(), 0)).collect();
        let mut count = |e: &Expr| {
            for r in ref_occurrences(e) {
                *uses.entry(r).or_insert(0) += 1;
            }
        };
        defs.values().for_each(&mut count);
        entries.values().for_each(&mut count);
        let Some(n) = uses.iter().find(|(_, &c)| c <= 1).map(|(n, _)| n.clone()) else { break };
        let d = defs.remove(&n).unwrap();
        let f = |r: &str| (r == n).then(|| d.clone());
        for x in defs.values_mut() {
            *x = x.map_refs(&f).normalize();
        }
        for x in entries.values_mut() {
            *x = x.map_refs(&f).normalize();
        }
    }

    let mut set = ExprSet::new();
    set.defs = defs.into_iter().collect();
    let order = set.topo_defs()?;
    let mut taken: BTreeSet<String> = avoid.clone();
    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    let mut k = 1;
    for n in &order {
        loop {
            let cand = format!("s{k}");
            k += 1;
            if taken.insert(cand.clone()) {
                rename.insert(n.clone(), cand);
                break;
            }
        }
    }
    let f = |r: &str| rename.get(r).map(|n| Expr::Ref(n.clone()));
    let old: BTreeMap<String, Expr> = set.defs.into_iter().collect();
    let mut out = ExprSet::new();
    for n in &order {
        out.defs.push((rename[n].clone(), old[n].map_refs(&f)));
    }
    let mut keys: Vec<(String, String)> = entries.keys().cloned().collect();
    keys.sort_by(pair_key);
    for key in keys {
        out.entries.insert(key.clone(), entries[&key].map_refs(&f));
    }
    Ok(out)
}

fn terms_of(e: Expr) -> Vec<Expr> {
    match e {
        Expr::Sum(ts) => ts,
        e => alloc::vec![e],
    }
}

/// `a*x + b*x` becomes `(a+b)*x`, and likewise for a shared first factor.
fn factor_common(terms: Vec<Expr>) -> Expr {
    let split = |t: &Expr, last: bool| -> Option<(Expr, Expr)> {
        match t {
            Expr::Prod(fs) if fs.len() > 1 => Some(if last {
                (Expr::product(fs[..fs.len() - 1].to_vec()), fs[fs.len() - 1].clone())
            } else {
                (Expr::product(fs[1..].to_vec()), fs[0].clone())
            }),
            _ => None,
        }
    };
    if terms.len() > 1 {
        for last in [true, false] {
            let parts: Option<Vec<(Expr, Expr)>> = terms.iter().map(|t| split(t, last)).collect();
            if let Some(parts) = parts {
                if parts.iter().all(|p| p.1 == parts[0].1) {
                    let shared = parts[0].1.clone();
                    let rest = factor_common(parts.into_iter().flat_map(|p| terms_of(p.0)).collect());
                    return if last { Expr::mul(rest, shared) } else { Expr::mul(shared, rest) };
                }
            }
        }
    }
    Expr::sum(terms)
}

fn ref_occurrences(e: &Expr) -> Vec<String> {
    match e {
        Expr::Ref(r) => alloc::vec![r.clone()],
        Expr::Prod(xs) | Expr::Sum(xs) => xs.iter().flat_map(ref_occurrences).collect(),
        _ => Vec::new(),
    }
}

/// Plan and merge in one call; ref names avoid the edge ids of `g`.
pub fn factorize_pages(g: &DiffGraph) -> Result<(Plan, ExprSet)> {
    factorize_pages_with(g, Direction::Backward, true)
}

pub fn factorize_pages_with(g: &DiffGraph, finish_dir: Direction, finish_refs: bool) -> Result<(Plan, ExprSet)> {
    let plan = plan_pages_with(g, finish_dir, finish_refs)?;
    let avoid: BTreeSet<String> = g.edges().iter().map(|e| e.id.clone()).collect();
    let set = merge_pages(&plan, &avoid)?;
    Ok((plan, set))
}

/// Leaf pages in the graph text format, each under a `# page <id>` header.
pub fn format_pages(plan: &Plan) -> String {
    let mut out = String::new();
    for p in plan.leaves() {
        out.push_str(&format!("# page {}\n", p.id));
        out.push_str(&crate::graph::format_graph(&p.graph));
    }
    out
}

pub fn sorted_pairs<V>(m: &BTreeMap<(String, String), V>) -> Vec<&(String, String)> {
    let mut v: Vec<&(String, String)> = m.keys().collect();
    v.sort_by(|a, b| pair_key(a, b));
    v
}
