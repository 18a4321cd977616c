//! Sparse symbolic local Jacobians and matrix-chain accumulation.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::convert::graph_to_expr;
use crate::error::{Error, Result};
use crate::expr::{Expr, ExprSet};
use crate::graph::{DiffGraph, Edge};

pub const EXHAUSTIVE_BOUND: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalJacobian {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// Absent entries are structural zeros.
    pub entries: BTreeMap<(String, String), Expr>,
}

impl LocalJacobian {
    pub fn get(&self, r: &str, c: &str) -> Option<&Expr> {
        self.entries.get(&(r.to_string(), c.to_string()))
    }

    pub fn nonzeros(&self) -> usize {
        self.entries.len()
    }
}

/// Entry (r, c) holds the expression of the paths from r to c that avoid the other listed vertices.
pub fn extract_local_jacobian(g: &DiffGraph, rows: &[String], cols: &[String]) -> Result<LocalJacobian> {
    for v in rows.iter().chain(cols) {
        if !g.has_vertex(v) {
            return Err(Error::UnknownVertex(v.clone()));
        }
    }
    let listed: BTreeSet<&String> = rows.iter().chain(cols).collect();
    let mut entries = BTreeMap::new();
    for r in rows {
        for c in cols {
            let keep: BTreeSet<String> = g
                .edges_between(r, c)
                .into_iter()
                .filter(|id| {
                    let e = g.edge(id).unwrap();
                    (e.src == *r || !listed.contains(&e.src)) && (e.dst == *c || !listed.contains(&e.dst))
                })
                .collect();
            if keep.is_empty() {
                continue;
            }
            let sub = g.restrict(&keep)?;
            // drop dangling pieces left by the filter
            let keep2 = sub.edges_between(r, c);
            if keep2.is_empty() {
                continue;
            }
            let sub = sub.restrict(&keep2)?;
            entries.insert((r.clone(), c.clone()), graph_to_expr(&sub, r, c)?);
        }
    }
    Ok(LocalJacobian { rows: rows.to_vec(), cols: cols.to_vec(), entries })
}

/// Local Jacobians between consecutive depth levels.
pub fn level_chain(g: &DiffGraph) -> Result<Vec<LocalJacobian>> {
    let lv = g.depth_levels();
    if !lv.cross.is_empty() {
        return Err(Error::RuleViolated("cross-level edges; segment the graph first".into()));
    }
    let rows = crate::structure::level_rows(g);
    let mut out = Vec::new();
    for l in 0..lv.depth() {
        out.push(extract_local_jacobian(g, &rows[&l], &rows[&(l + 1)])?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Paren {
    Leaf(usize),
    Node(Box<Paren>, Box<Paren>),
}

impl Paren {
    pub fn left_to_right(n: usize) -> Paren {
        let mut p = Paren::Leaf(0);
        for k in 1..n {
            p = Paren::Node(Box::new(p), Box::new(Paren::Leaf(k)));
        }
        p
    }

    pub fn right_to_left(n: usize) -> Paren {
        let mut p = Paren::Leaf(n - 1);
        for k in (0..n - 1).rev() {
            p = Paren::Node(Box::new(Paren::Leaf(k)), Box::new(p));
        }
        p
    }

    pub fn leaves(&self) -> Vec<usize> {
        match self {
            Paren::Leaf(k) => alloc::vec![*k],
            Paren::Node(a, b) => {
                let mut v = a.leaves();
                v.extend(b.leaves());
                v
            }
        }
    }

    /// Every binary bracketing of `lo..=hi`.
    pub fn all(lo: usize, hi: usize) -> Vec<Paren> {
        if lo == hi {
            return alloc::vec![Paren::Leaf(lo)];
        }
        let mut out = Vec::new();
        for k in lo..hi {
            for a in Paren::all(lo, k) {
                for b in Paren::all(k + 1, hi) {
                    out.push(Paren::Node(Box::new(a.clone()), Box::new(b)));
                }
            }
        }
        out
    }
}

/// Letters name the matrices: `((AB)C)D`.
impl fmt::Display for Paren {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(p: &Paren, top: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match p {
                Paren::Leaf(k) => write!(f, "{}", (b'A' + *k as u8) as char),
                Paren::Node(a, b) => {
                    if !top {
                        f.write_str("(")?;
                    }
                    go(a, false, f)?;
                    go(b, false, f)?;
                    if !top {
                        f.write_str(")")?;
                    }
                    Ok(())
                }
            }
        }
        go(self, true, f)
    }
}

/// Parse the letter form; juxtaposition groups left to right.
pub fn parse_paren(text: &str) -> Result<Paren> {
    fn seq(s: &[u8], pos: &mut usize) -> Result<Paren> {
        let mut acc: Option<Paren> = None;
        while *pos < s.len() && s[*pos] != b')' {
            let item = match s[*pos] {
                b'(' => {
                    *pos += 1;
                    let p = seq(s, pos)?;
                    if *pos >= s.len() || s[*pos] != b')' {
                        return Err(syntax(*pos, "expected `)`"));
                    }
                    *pos += 1;
                    p
                }
                c if c.is_ascii_uppercase() => {
                    *pos += 1;
                    Paren::Leaf((c - b'A') as usize)
                }
                b' ' => {
                    *pos += 1;
                    continue;
                }
                _ => return Err(syntax(*pos, "expected a matrix letter or `(`")),
            };
            acc = Some(match acc {
                None => item,
                Some(a) => Paren::Node(Box::new(a), Box::new(item)),
            });
        }
        acc.ok_or_else(|| syntax(*pos, "empty group"))
    }
    fn syntax(pos: usize, msg: &str) -> Error {
        Error::Syntax { line: 1, col: pos + 1, msg: msg.to_string() }
    }
    let mut pos = 0;
    let p = seq(text.as_bytes(), &mut pos)?;
    if pos != text.len() {
        return Err(syntax(pos, "unbalanced `)`"));
    }
    Ok(p)
}

fn check_chain(chain: &[LocalJacobian]) -> Result<()> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    for k in 1..chain.len() {
        if chain[k - 1].cols != chain[k].rows {
            return Err(Error::NonConformable(k - 1, k));
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Accumulation {
    pub exprs: ExprSet,
    pub cost: usize,
}

/// Symbolic product in the given association order.
pub fn accumulate(chain: &[LocalJacobian], paren: &Paren) -> Result<Accumulation> {
    check_chain(chain)?;
    if paren.leaves() != (0..chain.len()).collect::<Vec<_>>() {
        return Err(Error::RuleViolated(format!("bracketing {paren} does not cover the chain")));
    }
    let mut st = AccState { exprs: ExprSet::new(), cost: 0 };
    let m = st.eval(chain, paren)?;
    st.exprs.entries = m.entries;
    Ok(Accumulation { exprs: st.exprs, cost: st.cost })
}

struct AccState {
    exprs: ExprSet,
    cost: usize,
}

impl AccState {
    fn eval(&mut self, chain: &[LocalJacobian], p: &Paren) -> Result<LocalJacobian> {
        match p {
            Paren::Leaf(k) => Ok(chain[*k].clone()),
            Paren::Node(a, b) => {
                let mut l = self.eval(chain, a)?;
                let mut r = self.eval(chain, b)?;
                self.share(&mut l, |(_, c)| r.entries.keys().filter(|(rr, _)| rr == c).count());
                self.share(&mut r, |(rr, _)| l.entries.keys().filter(|(_, c)| c == rr).count());
                Ok(self.product(&l, &r))
            }
        }
    }

    /// Name compound entries that the next product would use more than once.
    fn share(&mut self, m: &mut LocalJacobian, uses: impl Fn(&(String, String)) -> usize) {
        let keys: Vec<(String, String)> = m.entries.keys().cloned().collect();
        for k in keys {
            let e = &m.entries[&k];
            if e.cost() > 0 && uses(&k) > 1 {
                let name = self.exprs.next_ref_name();
                self.exprs.defs.push((name.clone(), e.clone()));
                m.entries.insert(k, Expr::Ref(name));
            }
        }
    }

    fn product(&mut self, l: &LocalJacobian, r: &LocalJacobian) -> LocalJacobian {
        let mut entries = BTreeMap::new();
        for i in &l.rows {
            for k in &r.cols {
                let mut terms = Vec::new();
                for j in &l.cols {
                    if let (Some(a), Some(b)) = (l.get(i, j), r.get(j, k)) {
                        if *a != Expr::Unit && *b != Expr::Unit {
                            self.cost += 1;
                        }
                        terms.push(Expr::mul(a.clone(), b.clone()));
                    }
                }
                if !terms.is_empty() {
                    entries.insert((i.clone(), k.clone()), Expr::sum(terms));
                }
            }
        }
        LocalJacobian { rows: l.rows.clone(), cols: r.cols.clone(), entries }
    }
}

/// Nonzero pattern with unit flags: `Some(true)` marks an exact unit entry.
type Pattern = BTreeMap<(usize, usize), bool>;

fn pattern(m: &LocalJacobian) -> (usize, usize, Pattern) {
    let ri: BTreeMap<&String, usize> = m.rows.iter().enumerate().map(|(k, v)| (v, k)).collect();
    let ci: BTreeMap<&String, usize> = m.cols.iter().enumerate().map(|(k, v)| (v, k)).collect();
    let p = m.entries.iter().map(|((r, c), e)| ((ri[r], ci[c]), *e == Expr::Unit)).collect();
    (m.rows.len(), m.cols.len(), p)
}

fn pattern_product(a: &(usize, usize, Pattern), b: &(usize, usize, Pattern)) -> ((usize, usize, Pattern), usize) {
    let mut cost = 0;
    let mut paths: BTreeMap<(usize, usize), (usize, bool)> = BTreeMap::new();
    for (&(i, j), &ua) in &a.2 {
        for (&(jj, k), &ub) in b.2.range((j, 0)..(j + 1, 0)) {
            debug_assert_eq!(jj, j);
            if !ua && !ub {
                cost += 1;
            }
            let slot = paths.entry((i, k)).or_insert((0, true));
            slot.0 += 1;
            slot.1 &= ua && ub;
        }
    }
    let p = paths.into_iter().map(|(k, (n, unit))| (k, n == 1 && unit)).collect();
    ((a.0, b.1, p), cost)
}

/// Cheapest bracketing by dynamic programming over intervals.
pub fn best_accumulation_order(chain: &[LocalJacobian]) -> Result<(Paren, usize)> {
    check_chain(chain)?;
    let n = chain.len();
    if n > EXHAUSTIVE_BOUND {
        return Err(Error::ChainTooLong(n, EXHAUSTIVE_BOUND));
    }
    let mut pat: BTreeMap<(usize, usize), (usize, usize, Pattern)> = BTreeMap::new();
    let mut cost: BTreeMap<(usize, usize), (usize, Paren)> = BTreeMap::new();
    for (k, m) in chain.iter().enumerate() {
        pat.insert((k, k), pattern(m));
        cost.insert((k, k), (0, Paren::Leaf(k)));
    }
    for len in 2..=n {
        for i in 0..=n - len {
            let j = i + len - 1;
            let mut best: Option<(usize, Paren)> = None;
            let mut best_pat = None;
            for k in i..j {
                let (prod, c) = pattern_product(&pat[&(i, k)], &pat[&(k + 1, j)]);
                let total = cost[&(i, k)].0 + cost[&(k + 1, j)].0 + c;
                if best.as_ref().map_or(true, |b| total < b.0) {
                    let p = Paren::Node(Box::new(cost[&(i, k)].1.clone()), Box::new(cost[&(k + 1, j)].1.clone()));
                    best = Some((total, p));
                    best_pat = Some(prod);
                }
            }
            cost.insert((i, j), best.unwrap());
            pat.insert((i, j), best_pat.unwrap());
        }
    }
    let (c, p) = cost.remove(&(0, n - 1)).unwrap();
    Ok((p, c))
}

/// Replace the paths between `rows` and `cols` (through `mids`) by reference edges.
pub fn contract_local(
    g: &DiffGraph,
    rows: &[String],
    mids: &[String],
    cols: &[String],
) -> Result<(DiffGraph, ExprSet)> {
    let a = extract_local_jacobian(g, rows, mids)?;
    let b = extract_local_jacobian(g, mids, cols)?;
    let acc = accumulate(&[a.clone(), b.clone()], &Paren::left_to_right(2))?;
    let mut used: BTreeSet<String> = BTreeSet::new();
    for m in [&a, &b] {
        for (r, c) in m.entries.keys() {
            let sub = g.edges_between(r, c);
            used.extend(sub);
        }
    }
    let mut exprs = ExprSet::new();
    exprs.defs = acc.exprs.defs.clone();
    let mut edges: Vec<Edge> = g.edges().iter().filter(|e| !used.contains(&e.id)).cloned().collect();
    let mut k = 0;
    for ((r, c), e) in acc.exprs.sorted_entries() {
        let name = loop {
            k += 1;
            let n = format!("s{k}");
            if g.edge(&n).is_none() && exprs.def(&n).is_none() {
                break n;
            }
        };
        exprs.defs.push((name.clone(), e.clone()));
        edges.push(Edge::new(&name, r, c, Expr::Ref(name.clone())));
    }
    Ok((DiffGraph::new(edges)?, exprs))
}
