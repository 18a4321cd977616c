//! Ground truth: Bauer's formula by path enumeration, randomized equivalence checks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::expr::{Expr, ExprSet};
use crate::graph::DiffGraph;

/// Mersenne prime 2^61 - 1.
pub const P: u64 = (1 << 61) - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fp(pub u64);

pub trait Num: Copy + PartialEq + core::fmt::Display {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn close(self, o: Self) -> bool;
}

impl core::fmt::Display for Fp {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Num for Fp {
    fn zero() -> Self {
        Fp(0)
    }
    fn one() -> Self {
        Fp(1)
    }
    fn add(self, o: Self) -> Self {
        let s = self.0 + o.0;
        Fp(if s >= P { s - P } else { s })
    }
    fn mul(self, o: Self) -> Self {
        let w = self.0 as u128 * o.0 as u128;
        let lo = (w & P as u128) as u64;
        let hi = (w >> 61) as u64;
        Fp(0).add(Fp(lo)).add(Fp(hi))
    }
    fn close(self, o: Self) -> bool {
        self == o
    }
}

pub const REL_TOL: f64 = 1e-9;

impl Num for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn close(self, o: Self) -> bool {
        let scale = self.abs().max(o.abs()).max(1.0);
        (self - o).abs() <= REL_TOL * scale
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instantiation<N> {
    pub seed: u64,
    pub values: BTreeMap<String, N>,
}

impl<N: Num> Instantiation<N> {
    pub fn get(&self, label: &Expr) -> Result<N> {
        match label {
            Expr::Unit => Ok(N::one()),
            Expr::Sym(s) => self.values.get(s).copied().ok_or_else(|| Error::UnknownEdge(s.clone())),
            Expr::Ref(r) => Err(Error::UnresolvedRef(r.clone())),
            _ => Err(Error::RuleViolated("compound label".into())),
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Field values drawn uniformly from [2, p-2].
pub fn instantiate(labels: &BTreeSet<String>, seed: u64) -> Instantiation<Fp> {
    let mut r = rng(seed);
    let mut values = BTreeMap::new();
    for l in labels {
        if l == "1" {
            continue;
        }
        let v = loop {
            let x = r.next_u64() >> 3;
            if (2..=P - 2).contains(&x) {
                break x;
            }
        };
        values.insert(l.clone(), Fp(v));
    }
    Instantiation { seed, values }
}

/// Float values drawn from [0.5, 2).
pub fn instantiate_float(labels: &BTreeSet<String>, seed: u64) -> Instantiation<f64> {
    let mut r = rng(seed);
    let mut values = BTreeMap::new();
    for l in labels {
        if l == "1" {
            continue;
        }
        let u = (r.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        values.insert(l.clone(), 0.5 + 1.5 * u);
    }
    Instantiation { seed, values }
}

pub fn eval_expr<N: Num>(e: &Expr, inst: &Instantiation<N>, refs: &BTreeMap<String, N>) -> Result<N> {
    Ok(match e {
        Expr::Ref(r) => *refs.get(r).ok_or_else(|| Error::UnresolvedRef(r.clone()))?,
        Expr::Prod(fs) => {
            let mut acc = N::one();
            for f in fs {
                acc = acc.mul(eval_expr(f, inst, refs)?);
            }
            acc
        }
        Expr::Sum(ts) => {
            let mut acc = N::zero();
            for t in ts {
                acc = acc.add(eval_expr(t, inst, refs)?);
            }
            acc
        }
        atom => inst.get(atom)?,
    })
}

fn eval_defs<N: Num>(s: &ExprSet, inst: &Instantiation<N>) -> Result<BTreeMap<String, N>> {
    let mut vals = BTreeMap::new();
    for name in s.topo_defs()? {
        let v = eval_expr(s.def(&name).unwrap(), inst, &vals)?;
        vals.insert(name, v);
    }
    Ok(vals)
}

pub type Pair = (String, String);

/// Anything whose root-terminal values can be computed.
#[derive(Clone, Copy, Debug)]
pub enum Artifact<'a> {
    Graph(&'a DiffGraph),
    /// Graph whose reference labels resolve through the definitions.
    GraphRefs(&'a DiffGraph, &'a ExprSet),
    Exprs(&'a ExprSet),
    Entries(&'a BTreeMap<Pair, Expr>),
}

impl Artifact<'_> {
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let add_set = |s: &ExprSet, out: &mut BTreeSet<String>| {
            for e in s.defs.iter().map(|d| &d.1).chain(s.entries.values()) {
                out.extend(e.symbols());
            }
        };
        match self {
            Artifact::Graph(g) => g.edges().iter().for_each(|e| out.extend(e.label.symbols())),
            Artifact::GraphRefs(g, s) => {
                g.edges().iter().for_each(|e| out.extend(e.label.symbols()));
                add_set(s, &mut out);
            }
            Artifact::Exprs(s) => add_set(s, &mut out),
            Artifact::Entries(m) => m.values().for_each(|e| out.extend(e.symbols())),
        }
        out
    }

    pub fn eval<N: Num>(&self, inst: &Instantiation<N>, guard: usize) -> Result<BTreeMap<Pair, N>> {
        match self {
            Artifact::Graph(g) => bauer_eval_with(g, inst, &BTreeMap::new(), guard),
            Artifact::GraphRefs(g, s) => bauer_eval_with(g, inst, &eval_defs(s, inst)?, guard),
            Artifact::Exprs(s) => {
                let refs = eval_defs(s, inst)?;
                s.entries.iter().map(|(k, e)| Ok((k.clone(), eval_expr(e, inst, &refs)?))).collect()
            }
            Artifact::Entries(m) => {
                let refs = BTreeMap::new();
                m.iter().map(|(k, e)| Ok((k.clone(), eval_expr(e, inst, &refs)?))).collect()
            }
        }
    }
}

/// Sum over all root-terminal paths of the product of edge values.
pub fn bauer_eval<N: Num>(g: &DiffGraph, inst: &Instantiation<N>, guard: usize) -> Result<BTreeMap<Pair, N>> {
    bauer_eval_with(g, inst, &BTreeMap::new(), guard)
}

fn bauer_eval_with<N: Num>(
    g: &DiffGraph,
    inst: &Instantiation<N>,
    refs: &BTreeMap<String, N>,
    guard: usize,
) -> Result<BTreeMap<Pair, N>> {
    let mut out = BTreeMap::new();
    let mut budget = guard;
    for y in g.roots() {
        for x in g.terminals() {
            let paths = g.enumerate_paths(&y, &x, budget)?;
            if paths.is_empty() {
                continue;
            }
            budget -= paths.len().min(budget);
            let mut acc = N::zero();
            for p in &paths {
                let mut prod = N::one();
                for id in &p.0 {
                    let e = g.edge(id).unwrap();
                    prod = prod.mul(eval_expr(&e.label, inst, refs)?);
                }
                acc = acc.add(prod);
            }
            out.insert((y.clone(), x), acc);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Field,
    Float,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub pair: Pair,
    pub seed: u64,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivReport {
    pub trials: usize,
    pub mode: Mode,
    pub mismatches: Vec<Mismatch>,
}

impl EquivReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compare two artifacts on `trials` random instantiations; trial k uses seed `seed + k`.
pub fn check_equiv(a: &Artifact, b: &Artifact, trials: usize, seed: u64, mode: Mode) -> Result<EquivReport> {
    let mut syms = a.symbols();
    syms.extend(b.symbols());
    let mut report = EquivReport { trials, mode, mismatches: Vec::new() };
    for k in 0..trials {
        let s = seed.wrapping_add(k as u64);
        let found = match mode {
            Mode::Field => compare(a, b, &instantiate(&syms, s))?,
            Mode::Float => compare(a, b, &instantiate_float(&syms, s))?,
        };
        if let Some((pair, lhs, rhs)) = found {
            report.mismatches.push(Mismatch { pair, seed: s, lhs, rhs });
            break;
        }
    }
    Ok(report)
}

fn compare<N: Num>(a: &Artifact, b: &Artifact, inst: &Instantiation<N>) -> Result<Option<(Pair, String, String)>> {
    let guard = crate::graph::DEFAULT_PATH_GUARD;
    let va = a.eval(inst, guard)?;
    let vb = b.eval(inst, guard)?;
    let ka: BTreeSet<&Pair> = va.keys().collect();
    let kb: BTreeSet<&Pair> = vb.keys().collect();
    if ka != kb {
        let only: Vec<String> =
            ka.symmetric_difference(&kb).map(|(r, t)| format!("({r},{t})")).collect();
        return Err(Error::SupportMismatch(only.join(" ")));
    }
    for (k, x) in &va {
        let y = vb[k];
        if !x.close(y) {
            return Ok(Some((k.clone(), x.to_string(), y.to_string())));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_mul_matches_u128() {
        let a = Fp(P - 2);
        let b = Fp(123_456_789_012_345);
        let want = ((a.0 as u128 * b.0 as u128) % P as u128) as u64;
        assert_eq!(a.mul(b).0, want);
        assert_eq!(Fp(P - 1).add(Fp(1)), Fp(0));
    }

    #[test]
    fn same_seed_same_values() {
        let labels: BTreeSet<String> = ["a", "b", "1"].iter().map(|s| s.to_string()).collect();
        let x = instantiate(&labels, 9);
        assert_eq!(x, instantiate(&labels, 9));
        assert!(!x.values.contains_key("1"));
        assert_eq!(x.get(&Expr::Unit).unwrap(), Fp(1));
    }
}
