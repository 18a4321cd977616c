//! Directed line graphs with meta sources and sinks, and face elimination.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::graph::DiffGraph;
use crate::natord;

pub const SOURCE_PREFIX: &str = "src:";
pub const SINK_PREFIX: &str = "snk:";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Meta {
    Source(String),
    Sink(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LgVertex {
    pub id: String,
    pub label: Expr,
    pub pred: BTreeSet<String>,
    pub succ: BTreeSet<String>,
    pub meta: Option<Meta>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineGraph {
    pub vertices: BTreeMap<String, LgVertex>,
    next: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum StepKind {
    Absorb,
    Fillin,
    FillinReuseI,
    FillinReuseJ,
    Merge,
    RemoveIsolated,
    ExtendedAbsorbSubset,
    ExtendedFillinSuperset,
    ExtendedMergeSuperset,
}

impl StepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepKind::Absorb => "absorb",
            StepKind::Fillin => "fillin",
            StepKind::FillinReuseI => "fillin-reuse-i",
            StepKind::FillinReuseJ => "fillin-reuse-j",
            StepKind::Merge => "merge",
            StepKind::RemoveIsolated => "remove-isolated",
            StepKind::ExtendedAbsorbSubset => "extended-absorb-subset",
            StepKind::ExtendedFillinSuperset => "extended-fillin-superset",
            StepKind::ExtendedMergeSuperset => "extended-merge-superset",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One trace record. `primary` records are the ones a replay re-issues.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationStep {
    pub kind: StepKind,
    pub face: (String, String),
    pub created: Vec<String>,
    pub updated: Vec<String>,
    pub removed: Vec<String>,
    pub mults: usize,
    pub primary: bool,
    /// Extended rule that produced this record, for replay.
    pub rule: Option<ExtRule>,
}

impl EliminationStep {
    fn new(kind: StepKind, i: &str, j: &str) -> Self {
        EliminationStep {
            kind,
            face: (i.to_string(), j.to_string()),
            created: Vec::new(),
            updated: Vec::new(),
            removed: Vec::new(),
            mults: 0,
            primary: false,
            rule: None,
        }
    }
}

/// The split-based rewrites; `k` is the vertex absorbing or being split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtRule {
    /// P_k = P_i, S_k ⊂ S_j.
    AbsorbSubsetSucc { i: String, j: String, k: String },
    /// P_k ⊂ P_i, S_k = S_j.
    AbsorbSubsetPred { i: String, j: String, k: String },
    /// P_k = P_i, S_k ⊃ S_j.
    FillinSupersetSucc { i: String, j: String, k: String },
    /// P_k ⊃ P_i, S_k = S_j.
    FillinSupersetPred { i: String, j: String, k: String },
    /// P_i' ⊇ P_i, S_i' = S_i.
    MergeSupersetPred { i: String, other: String },
    /// P_i' = P_i, S_i' ⊇ S_i.
    MergeSupersetSucc { i: String, other: String },
}

fn mul_cost(a: &Expr, b: &Expr) -> usize {
    usize::from(*a != Expr::Unit && *b != Expr::Unit)
}

pub fn source_id(root: &str) -> String {
    format!("{SOURCE_PREFIX}{root}")
}

pub fn sink_id(terminal: &str) -> String {
    format!("{SINK_PREFIX}{terminal}")
}

/// One labeled vertex per edge of `g`, one biclique per intermediate vertex.
pub fn build_line_graph(g: &DiffGraph) -> LineGraph {
    let mut vs: BTreeMap<String, LgVertex> = BTreeMap::new();
    for r in g.roots() {
        let id = source_id(&r);
        vs.insert(
            id.clone(),
            LgVertex { id, label: Expr::Unit, pred: BTreeSet::new(), succ: BTreeSet::new(), meta: Some(Meta::Source(r)) },
        );
    }
    for t in g.terminals() {
        let id = sink_id(&t);
        vs.insert(
            id.clone(),
            LgVertex { id, label: Expr::Unit, pred: BTreeSet::new(), succ: BTreeSet::new(), meta: Some(Meta::Sink(t)) },
        );
    }
    for e in g.edges() {
        let pred: BTreeSet<String> = if g.is_root(&e.src) {
            [source_id(&e.src)].into_iter().collect()
        } else {
            g.in_edges(&e.src).iter().map(|x| x.id.clone()).collect()
        };
        let succ: BTreeSet<String> = if g.is_terminal(&e.dst) {
            [sink_id(&e.dst)].into_iter().collect()
        } else {
            g.out_edges(&e.dst).iter().map(|x| x.id.clone()).collect()
        };
        vs.insert(e.id.clone(), LgVertex { id: e.id.clone(), label: e.label.clone(), pred, succ, meta: None });
    }
    let links: Vec<(String, String)> = vs
        .values()
        .flat_map(|v| v.pred.iter().map(move |p| (p.clone(), v.id.clone())))
        .collect();
    for (p, v) in links {
        vs.get_mut(&p).unwrap().succ.insert(v);
    }
    LineGraph { vertices: vs, next: 1 }
}

impl LineGraph {
    pub fn vertex(&self, id: &str) -> Option<&LgVertex> {
        self.vertices.get(id)
    }

    pub fn is_meta(&self, id: &str) -> bool {
        self.vertices.get(id).is_some_and(|v| v.meta.is_some())
    }

    pub fn labeled(&self) -> Vec<&LgVertex> {
        let mut v: Vec<&LgVertex> = self.vertices.values().filter(|v| v.meta.is_none()).collect();
        v.sort_by(|a, b| natord::cmp(&a.id, &b.id));
        v
    }

    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for v in self.vertices.values() {
            for s in &v.succ {
                out.push((v.id.clone(), s.clone()));
            }
        }
        out.sort_by(|a, b| natord::cmp(&a.0, &b.0).then_with(|| natord::cmp(&a.1, &b.1)));
        out
    }

    /// Faces between two labeled vertices.
    pub fn intermediate_faces(&self) -> Vec<(String, String)> {
        self.edges().into_iter().filter(|(a, b)| !self.is_meta(a) && !self.is_meta(b)).collect()
    }

    fn fresh_id(&mut self) -> String {
        loop {
            let id = format!("n{}", self.next);
            self.next += 1;
            if !self.vertices.contains_key(&id) {
                return id;
            }
        }
    }

    fn link(&mut self, a: &str, b: &str) {
        self.vertices.get_mut(a).unwrap().succ.insert(b.to_string());
        self.vertices.get_mut(b).unwrap().pred.insert(a.to_string());
    }

    fn unlink(&mut self, a: &str, b: &str) {
        self.vertices.get_mut(a).unwrap().succ.remove(b);
        self.vertices.get_mut(b).unwrap().pred.remove(a);
    }

    fn set_pred(&mut self, v: &str, pred: &BTreeSet<String>) {
        let old: Vec<String> = self.vertices[v].pred.iter().cloned().collect();
        for p in old {
            self.unlink(&p, v);
        }
        for p in pred {
            self.link(p, v);
        }
    }

    fn set_succ(&mut self, v: &str, succ: &BTreeSet<String>) {
        let old: Vec<String> = self.vertices[v].succ.iter().cloned().collect();
        for s in old {
            self.unlink(v, &s);
        }
        for s in succ {
            self.link(v, s);
        }
    }

    fn add_vertex(&mut self, label: Expr, pred: &BTreeSet<String>, succ: &BTreeSet<String>) -> String {
        let id = self.fresh_id();
        self.vertices.insert(
            id.clone(),
            LgVertex { id: id.clone(), label, pred: BTreeSet::new(), succ: BTreeSet::new(), meta: None },
        );
        self.set_pred(&id, pred);
        self.set_succ(&id, succ);
        id
    }

    fn remove_vertex(&mut self, v: &str) {
        let (p, s) = {
            let x = &self.vertices[v];
            (x.pred.clone(), x.succ.clone())
        };
        for a in p {
            self.unlink(&a, v);
        }
        for b in s {
            self.unlink(v, &b);
        }
        self.vertices.remove(v);
    }

    fn check_face(&self, i: &str, j: &str) -> Result<()> {
        let vi = self.vertices.get(i).ok_or_else(|| Error::FaceMissing(i.into(), j.into()))?;
        if !vi.succ.contains(j) {
            return Err(Error::FaceMissing(i.into(), j.into()));
        }
        if self.is_meta(i) || self.is_meta(j) {
            return Err(Error::MetaFace(i.into(), j.into()));
        }
        Ok(())
    }

    fn twin(&self, v: &str) -> Option<String> {
        let x = &self.vertices[v];
        self.vertices
            .values()
            .filter(|o| o.id != v && o.meta.is_none() && o.pred == x.pred && o.succ == x.succ)
            .map(|o| o.id.clone())
            .min_by(|a, b| natord::cmp(a, b))
    }

    /// The four elimination steps for the face (i, j).
    pub fn eliminate_face(&mut self, i: &str, j: &str) -> Result<Vec<EliminationStep>> {
        self.check_face(i, j)?;
        let (vi, vj) = (self.vertices[i].clone(), self.vertices[j].clone());
        let prod = Expr::mul(vi.label.clone(), vj.label.clone());
        let mults = mul_cost(&vi.label, &vj.label);
        let absorber = self
            .vertices
            .values()
            .filter(|k| k.meta.is_none() && k.id != i && k.id != j && k.pred == vi.pred && k.succ == vj.succ)
            .map(|k| k.id.clone())
            .min_by(|a, b| natord::cmp(a, b));
        let mut first;
        let mut touched: Vec<String> = alloc::vec![i.to_string(), j.to_string()];
        if let Some(k) = absorber {
            first = EliminationStep::new(StepKind::Absorb, i, j);
            let l = Expr::add(self.vertices[&k].label.clone(), prod);
            self.vertices.get_mut(&k).unwrap().label = l;
            self.unlink(i, j);
            first.updated.push(k.clone());
            touched.push(k);
        } else if vi.succ.len() == 1 {
            first = EliminationStep::new(StepKind::FillinReuseI, i, j);
            self.vertices.get_mut(i).unwrap().label = prod;
            self.set_succ(i, &vj.succ);
            first.updated.push(i.to_string());
        } else if vj.pred.len() == 1 {
            first = EliminationStep::new(StepKind::FillinReuseJ, i, j);
            self.vertices.get_mut(j).unwrap().label = prod;
            self.set_pred(j, &vi.pred);
            first.updated.push(j.to_string());
        } else {
            first = EliminationStep::new(StepKind::Fillin, i, j);
            let k = self.add_vertex(prod, &vi.pred, &vj.succ);
            self.unlink(i, j);
            first.created.push(k.clone());
            touched.push(k);
        }
        first.mults = mults;
        first.primary = true;
        let mut out = alloc::vec![first];
        self.tidy(&touched, false, &mut out);
        Ok(out)
    }

    /// Remove isolated vertices and merge twins until nothing changes.
    fn tidy(&mut self, touched: &[String], extended: bool, out: &mut Vec<EliminationStep>) {
        loop {
            let dead: Vec<String> = self
                .vertices
                .values()
                .filter(|v| v.meta.is_none() && (v.pred.is_empty() || v.succ.is_empty()))
                .map(|v| v.id.clone())
                .collect();
            if !dead.is_empty() {
                for d in dead {
                    self.remove_vertex(&d);
                    let mut s = EliminationStep::new(StepKind::RemoveIsolated, &d, &d);
                    s.removed.push(d);
                    out.push(s);
                }
                continue;
            }
            let mut merged = false;
            let mut order: Vec<String> = touched.iter().filter(|t| self.vertices.contains_key(*t)).cloned().collect();
            let mut rest: Vec<String> =
                self.vertices.values().filter(|v| v.meta.is_none()).map(|v| v.id.clone()).collect();
            natord::sort(&mut rest);
            order.extend(rest);
            for v in &order {
                if !self.vertices.contains_key(v) {
                    continue;
                }
                if let Some(o) = self.twin(v) {
                    let l = Expr::add(self.vertices[v].label.clone(), self.vertices[&o].label.clone());
                    self.vertices.get_mut(v).unwrap().label = l;
                    self.remove_vertex(&o);
                    let mut s = EliminationStep::new(StepKind::Merge, v, &o);
                    s.updated.push(v.clone());
                    s.removed.push(o);
                    out.push(s);
                    merged = true;
                    break;
                }
                if extended {
                    if let Some(o) = self.superset_twin(v) {
                        let rule = o;
                        let steps = self.apply_ext(&rule).expect("condition checked");
                        out.extend(steps);
                        merged = true;
                        break;
                    }
                }
            }
            if !merged {
                return;
            }
        }
    }

    fn superset_twin(&self, v: &str) -> Option<ExtRule> {
        let x = &self.vertices[v];
        for o in self.vertices.values() {
            if o.id == v || o.meta.is_some() {
                continue;
            }
            if o.succ == x.succ && o.pred.is_superset(&x.pred) && o.pred != x.pred {
                return Some(ExtRule::MergeSupersetPred { i: v.to_string(), other: o.id.clone() });
            }
            if o.pred == x.pred && o.succ.is_superset(&x.succ) && o.succ != x.succ {
                return Some(ExtRule::MergeSupersetSucc { i: v.to_string(), other: o.id.clone() });
            }
        }
        None
    }

    /// Apply one of the split-based rewrites; its condition must hold exactly.
    pub fn extended_rewrite(&mut self, rule: &ExtRule) -> Result<Vec<EliminationStep>> {
        let mut steps = self.apply_ext(rule)?;
        let touched: Vec<String> = steps.iter().flat_map(|s| s.updated.iter().chain(&s.created).cloned()).collect();
        self.tidy(&touched, false, &mut steps);
        Ok(steps)
    }

    fn get(&self, id: &str) -> Result<&LgVertex> {
        self.vertices.get(id).ok_or_else(|| Error::RuleViolated(format!("no vertex `{id}`")))
    }

    fn apply_ext(&mut self, rule: &ExtRule) -> Result<Vec<EliminationStep>> {
        let bad = |m: &str| Err(Error::RuleViolated(m.to_string()));
        match rule {
            ExtRule::AbsorbSubsetSucc { i, j, k } | ExtRule::AbsorbSubsetPred { i, j, k } => {
                self.check_face(i, j)?;
                let (vi, vj, vk) = (self.get(i)?.clone(), self.get(j)?.clone(), self.get(k)?.clone());
                let succ_side = matches!(rule, ExtRule::AbsorbSubsetSucc { .. });
                let (eq, sub, sup) = if succ_side {
                    (vk.pred == vi.pred, &vk.succ, &vj.succ)
                } else {
                    (vk.succ == vj.succ, &vk.pred, &vi.pred)
                };
                if !eq || !sub.is_subset(sup) || sub.is_empty() {
                    return bad("absorption needs an equal set and a subset on the other side");
                }
                if sub == sup {
                    return self.eliminate_face(i, j);
                }
                let mut s = EliminationStep::new(StepKind::ExtendedAbsorbSubset, i, j);
                s.mults = mul_cost(&vi.label, &vj.label);
                let l = Expr::add(vk.label.clone(), Expr::mul(vi.label.clone(), vj.label.clone()));
                self.vertices.get_mut(k).unwrap().label = l;
                s.updated.push(k.clone());
                if succ_side {
                    // j keeps S_j - S_k; the other predecessors of j still reach S_k through a copy
                    let others: BTreeSet<String> = vj.pred.iter().filter(|p| *p != i).cloned().collect();
                    if !others.is_empty() {
                        let c = self.add_vertex(vj.label.clone(), &others, &vk.succ);
                        s.created.push(c);
                    }
                    let rest: BTreeSet<String> = vj.succ.difference(&vk.succ).cloned().collect();
                    self.set_succ(j, &rest);
                    s.updated.push(j.clone());
                } else {
                    let others: BTreeSet<String> = vi.succ.iter().filter(|x| *x != j).cloned().collect();
                    if !others.is_empty() {
                        let c = self.add_vertex(vi.label.clone(), &vk.pred, &others);
                        s.created.push(c);
                    }
                    let rest: BTreeSet<String> = vi.pred.difference(&vk.pred).cloned().collect();
                    self.set_pred(i, &rest);
                    s.updated.push(i.clone());
                }
                s.primary = true;
                s.rule = Some(rule.clone());
                Ok(alloc::vec![s])
            }
            ExtRule::FillinSupersetSucc { i, j, k } | ExtRule::FillinSupersetPred { i, j, k } => {
                self.check_face(i, j)?;
                let (vi, vj, vk) = (self.get(i)?.clone(), self.get(j)?.clone(), self.get(k)?.clone());
                let succ_side = matches!(rule, ExtRule::FillinSupersetSucc { .. });
                let (eq, big, small) = if succ_side {
                    (vk.pred == vi.pred, &vk.succ, &vj.succ)
                } else {
                    (vk.succ == vj.succ, &vk.pred, &vi.pred)
                };
                if !eq || !big.is_superset(small) {
                    return bad("fillin needs an equal set and a superset on the other side");
                }
                if big == small {
                    return self.eliminate_face(i, j);
                }
                let mut s = EliminationStep::new(StepKind::ExtendedFillinSuperset, i, j);
                s.mults = mul_cost(&vi.label, &vj.label);
                let label = Expr::add(Expr::mul(vi.label.clone(), vj.label.clone()), vk.label.clone());
                let rest: BTreeSet<String> = big.difference(small).cloned().collect();
                if succ_side {
                    self.set_succ(k, &rest);
                } else {
                    self.set_pred(k, &rest);
                }
                s.updated.push(k.clone());
                if vi.succ.len() == 1 {
                    self.vertices.get_mut(i).unwrap().label = label;
                    self.set_succ(i, &vj.succ);
                    s.updated.push(i.clone());
                } else if vj.pred.len() == 1 {
                    self.vertices.get_mut(j).unwrap().label = label;
                    self.set_pred(j, &vi.pred);
                    s.updated.push(j.clone());
                } else {
                    let n = self.add_vertex(label, &vi.pred, &vj.succ);
                    self.unlink(i, j);
                    s.created.push(n);
                }
                s.primary = true;
                s.rule = Some(rule.clone());
                Ok(alloc::vec![s])
            }
            ExtRule::MergeSupersetPred { i, other } | ExtRule::MergeSupersetSucc { i, other } => {
                let (vi, vo) = (self.get(i)?.clone(), self.get(other)?.clone());
                if vi.meta.is_some() || vo.meta.is_some() || i == other {
                    return bad("merge needs two distinct labeled vertices");
                }
                let pred_side = matches!(rule, ExtRule::MergeSupersetPred { .. });
                let ok = if pred_side {
                    vo.succ == vi.succ && vo.pred.is_superset(&vi.pred)
                } else {
                    vo.pred == vi.pred && vo.succ.is_superset(&vi.succ)
                };
                if !ok {
                    return bad("merge needs an equal set and a superset on the other side");
                }
                let mut s = EliminationStep::new(StepKind::ExtendedMergeSuperset, i, other);
                let l = Expr::add(vi.label.clone(), vo.label.clone());
                self.vertices.get_mut(i).unwrap().label = l;
                if (pred_side && vo.pred == vi.pred) || (!pred_side && vo.succ == vi.succ) {
                    self.remove_vertex(other);
                    s.kind = StepKind::Merge;
                    s.removed.push(other.clone());
                } else if pred_side {
                    let rest: BTreeSet<String> = vo.pred.difference(&vi.pred).cloned().collect();
                    self.set_pred(other, &rest);
                    s.updated.push(other.clone());
                } else {
                    let rest: BTreeSet<String> = vo.succ.difference(&vi.succ).cloned().collect();
                    self.set_succ(other, &rest);
                    s.updated.push(other.clone());
                }
                s.updated.insert(0, i.clone());
                s.primary = true;
                s.rule = Some(rule.clone());
                Ok(alloc::vec![s])
            }
        }
    }

    /// Sum of labels per (root, terminal) over vertices wired only to meta vertices.
    pub fn readout_jacobian(&self) -> Result<BTreeMap<(String, String), Expr>> {
        let left = self.intermediate_faces().len();
        if left > 0 {
            return Err(Error::FacesRemain(left));
        }
        let mut acc: BTreeMap<(String, String), Vec<Expr>> = BTreeMap::new();
        for v in self.labeled() {
            for p in &v.pred {
                for s in &v.succ {
                    if let (Some(Meta::Source(r)), Some(Meta::Sink(t))) =
                        (&self.vertices[p].meta, &self.vertices[s].meta)
                    {
                        acc.entry((r.clone(), t.clone())).or_default().push(v.label.clone());
                    }
                }
            }
        }
        Ok(acc.into_iter().map(|(k, v)| (k, Expr::sum(v))).collect())
    }
}

/// Trace of a run with its multiplication count.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<EliminationStep>,
}

impl Trace {
    pub fn mults(&self) -> usize {
        self.steps.iter().map(|s| s.mults).sum()
    }
}

/// Eliminate faces in the given order; with `allow_extended`, also merge superset twins after each step.
pub fn run_elimination(lg: &mut LineGraph, order: &[(String, String)], allow_extended: bool) -> Result<Trace> {
    let mut trace = Trace::default();
    for (i, j) in order {
        let steps = lg.eliminate_face(i, j)?;
        let touched: Vec<String> = steps.iter().flat_map(|s| s.updated.iter().chain(&s.created).cloned()).collect();
        trace.steps.extend(steps);
        if allow_extended {
            lg.tidy(&touched, true, &mut trace.steps);
        }
    }
    Ok(trace)
}

/// Eliminate whatever faces remain, lowest first, until none are left.
pub fn eliminate_all(lg: &mut LineGraph, trace: &mut Trace) -> Result<()> {
    let mut guard = 0usize;
    while let Some((i, j)) = lg.intermediate_faces().into_iter().next() {
        trace.steps.extend(lg.eliminate_face(&i, &j)?);
        guard += 1;
        if guard > 1_000_000 {
            return Err(Error::NoProgress);
        }
    }
    Ok(())
}

/// Re-issue the primary records of `trace` on a fresh copy of `initial`.
pub fn replay(initial: &LineGraph, trace: &Trace) -> Result<LineGraph> {
    let mut lg = initial.clone();
    for s in trace.steps.iter().filter(|s| s.primary) {
        match &s.rule {
            Some(r) => {
                lg.extended_rewrite(r)?;
            }
            None => {
                lg.eliminate_face(&s.face.0, &s.face.1)?;
            }
        }
    }
    Ok(lg)
}
