//! Noncommutative expressions over edge symbols and reference variables.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::natord;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Unit,
    Sym(String),
    Ref(String),
    Prod(Vec<Expr>),
    Sum(Vec<Expr>),
}

/// `s<k>` names are reference variables everywhere.
pub fn is_ref_name(s: &str) -> bool {
    s.len() > 1 && s.starts_with('s') && s[1..].bytes().all(|c| c.is_ascii_digit())
}

impl Expr {
    /// Atom from a label string: `1` is the unit, `s<k>` a reference.
    pub fn atom(s: &str) -> Expr {
        if s == "1" {
            Expr::Unit
        } else if is_ref_name(s) {
            Expr::Ref(s.to_string())
        } else {
            Expr::Sym(s.to_string())
        }
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, Expr::Unit | Expr::Sym(_) | Expr::Ref(_))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Prod(alloc::vec![a, b]).normalize()
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Sum(alloc::vec![a, b]).normalize()
    }

    pub fn product(factors: Vec<Expr>) -> Expr {
        Expr::Prod(factors).normalize()
    }

    pub fn sum(terms: Vec<Expr>) -> Expr {
        Expr::Sum(terms).normalize()
    }

    /// Flatten nested sums and products, drop unit factors, unwrap singletons.
    pub fn normalize(self) -> Expr {
        match self {
            Expr::Prod(fs) => {
                let mut out = Vec::new();
                for f in fs {
                    match f.normalize() {
                        Expr::Unit => {}
                        Expr::Prod(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                match out.len() {
                    0 => Expr::Unit,
                    1 => out.pop().unwrap(),
                    _ => Expr::Prod(out),
                }
            }
            Expr::Sum(ts) => {
                let mut out = Vec::new();
                for t in ts {
                    match t.normalize() {
                        Expr::Sum(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                match out.len() {
                    0 => Expr::Unit,
                    1 => out.pop().unwrap(),
                    _ => Expr::Sum(out),
                }
            }
            atom => atom,
        }
    }

    /// Normal form with sum terms sorted; product order is kept.
    pub fn canonical(&self) -> Expr {
        match self.clone().normalize() {
            Expr::Prod(fs) => Expr::Prod(fs.iter().map(Expr::canonical).collect()),
            Expr::Sum(ts) => {
                let mut ts: Vec<(String, Expr)> = ts
                    .iter()
                    .map(|t| {
                        let c = t.canonical();
                        (c.to_string(), c)
                    })
                    .collect();
                ts.sort_by(|a, b| natord::cmp(&a.0, &b.0));
                Expr::Sum(ts.into_iter().map(|p| p.1).collect())
            }
            atom => atom,
        }
    }

    /// Structural equality up to the order of sum terms.
    pub fn same(&self, other: &Expr) -> bool {
        self.canonical() == other.canonical()
    }

    /// Multiplications needed to evaluate this tree once.
    pub fn cost(&self) -> usize {
        match self {
            Expr::Prod(fs) => {
                let live = fs.iter().filter(|f| **f != Expr::Unit).count();
                fs.iter().map(Expr::cost).sum::<usize>() + live.saturating_sub(1)
            }
            Expr::Sum(ts) => ts.iter().map(Expr::cost).sum(),
            _ => 0,
        }
    }

    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk_atoms(&mut |a| {
            if let Expr::Sym(s) = a {
                out.insert(s.clone());
            }
        });
        out
    }

    pub fn refs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk_atoms(&mut |a| {
            if let Expr::Ref(s) = a {
                out.insert(s.clone());
            }
        });
        out
    }

    fn walk_atoms(&self, f: &mut dyn FnMut(&Expr)) {
        match self {
            Expr::Prod(xs) | Expr::Sum(xs) => xs.iter().for_each(|x| x.walk_atoms(f)),
            a => f(a),
        }
    }

    pub fn map_refs(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Ref(r) => f(r).unwrap_or_else(|| self.clone()),
            Expr::Prod(xs) => Expr::Prod(xs.iter().map(|x| x.map_refs(f)).collect()).normalize(),
            Expr::Sum(xs) => Expr::Sum(xs.iter().map(|x| x.map_refs(f)).collect()).normalize(),
            a => a.clone(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Unit => f.write_str("1"),
            Expr::Sym(s) | Expr::Ref(s) => f.write_str(s),
            Expr::Prod(fs) => {
                for (k, x) in fs.iter().enumerate() {
                    if k > 0 {
                        f.write_str("*")?;
                    }
                    if matches!(x, Expr::Sum(_)) {
                        write!(f, "({x})")?;
                    } else {
                        write!(f, "{x}")?;
                    }
                }
                Ok(())
            }
            Expr::Sum(ts) => {
                for (k, x) in ts.iter().enumerate() {
                    if k > 0 {
                        f.write_str("+")?;
                    }
                    if matches!(x, Expr::Sum(_)) {
                        write!(f, "({x})")?;
                    } else {
                        write!(f, "{x}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

pub fn format_expr(e: &Expr) -> String {
    e.to_string()
}

/// Parse `*`, `+`, parentheses, identifiers and `1`; the result is normalized.
pub fn parse_expr(text: &str) -> Result<Expr> {
    let mut p = Parser { s: text.as_bytes(), pos: 0 };
    let e = p.sum()?;
    p.ws();
    if p.pos < p.s.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e.normalize())
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Syntax { line: 1, col: self.pos + 1, msg: msg.to_string() }
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut terms = alloc::vec![self.prod()?];
        while self.peek() == Some(b'+') {
            self.pos += 1;
            terms.push(self.prod()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Sum(terms) })
    }

    fn prod(&mut self) -> Result<Expr> {
        let mut fs = alloc::vec![self.factor()?];
        while self.peek() == Some(b'*') {
            self.pos += 1;
            fs.push(self.factor()?);
        }
        Ok(if fs.len() == 1 { fs.pop().unwrap() } else { Expr::Prod(fs) })
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphanumeric() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.s.len() && is_ident_byte(self.s[self.pos]) {
                    self.pos += 1;
                }
                let tok = core::str::from_utf8(&self.s[start..self.pos]).unwrap();
                if tok.as_bytes()[0].is_ascii_digit() && tok != "1" {
                    self.pos = start;
                    return Err(self.err("only the constant 1 is allowed"));
                }
                Ok(Expr::atom(tok))
            }
            Some(_) => Err(self.err("expected a symbol, `1` or `(`")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

pub(crate) fn is_ident_byte(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'.' || c == b'\''
}

/// Reference definitions plus one expression per (root, terminal) pair.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExprSet {
    pub defs: Vec<(String, Expr)>,
    pub entries: BTreeMap<(String, String), Expr>,
}

impl ExprSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(root: &str, terminal: &str, e: Expr) -> Self {
        let mut s = Self::new();
        s.entries.insert((root.to_string(), terminal.to_string()), e);
        s
    }

    pub fn def(&self, name: &str) -> Option<&Expr> {
        self.defs.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    pub fn push_def(&mut self, name: &str, e: Expr) -> Result<()> {
        if self.def(name).is_some() {
            return Err(Error::DuplicateRef(name.to_string()));
        }
        self.defs.push((name.to_string(), e));
        Ok(())
    }

    /// Entries sorted naturally by root then terminal.
    pub fn sorted_entries(&self) -> Vec<(&(String, String), &Expr)> {
        let mut v: Vec<_> = self.entries.iter().collect();
        v.sort_by(|a, b| natord::cmp(&a.0 .0, &b.0 .0).then_with(|| natord::cmp(&a.0 .1, &b.0 .1)));
        v
    }

    /// Every reference resolves and definitions are acyclic.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (n, _) in &self.defs {
            if !seen.insert(n.clone()) {
                return Err(Error::DuplicateRef(n.clone()));
            }
        }
        for e in self.defs.iter().map(|d| &d.1).chain(self.entries.values()) {
            for r in e.refs() {
                if self.def(&r).is_none() {
                    return Err(Error::UnresolvedRef(r));
                }
            }
        }
        self.topo_defs().map(|_| ())
    }

    /// Definition names ordered so that each comes after the refs it uses.
    pub fn topo_defs(&self) -> Result<Vec<String>> {
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        let mut out = Vec::new();
        fn visit<'a>(
            s: &'a ExprSet,
            n: &'a str,
            state: &mut BTreeMap<&'a str, u8>,
            out: &mut Vec<String>,
        ) -> Result<()> {
            match state.get(n) {
                Some(2) => return Ok(()),
                Some(1) => return Err(Error::RefCycle(n.to_string())),
                _ => {}
            }
            state.insert(n, 1);
            let e = s.def(n).ok_or_else(|| Error::UnresolvedRef(n.to_string()))?;
            for r in e.refs() {
                let name = s.defs.iter().find(|d| d.0 == r).map(|d| d.0.as_str());
                match name {
                    Some(name) => visit(s, name, state, out)?,
                    None => return Err(Error::UnresolvedRef(r)),
                }
            }
            state.insert(n, 2);
            out.push(n.to_string());
            Ok(())
        }
        for (n, _) in &self.defs {
            visit(self, n, &mut state, &mut out)?;
        }
        Ok(out)
    }

    /// Fully substituted value of an expression.
    pub fn expand(&self, e: &Expr) -> Result<Expr> {
        let mut stack = Vec::new();
        self.expand_inner(e, &mut stack)
    }

    fn expand_inner(&self, e: &Expr, stack: &mut Vec<String>) -> Result<Expr> {
        Ok(match e {
            Expr::Ref(r) => {
                if stack.contains(r) {
                    return Err(Error::RefCycle(r.clone()));
                }
                let d = self.def(r).ok_or_else(|| Error::UnresolvedRef(r.clone()))?;
                stack.push(r.clone());
                let x = self.expand_inner(d, stack)?;
                stack.pop();
                x
            }
            Expr::Prod(xs) => Expr::Prod(
                xs.iter().map(|x| self.expand_inner(x, stack)).collect::<Result<Vec<_>>>()?,
            )
            .normalize(),
            Expr::Sum(xs) => Expr::Sum(
                xs.iter().map(|x| self.expand_inner(x, stack)).collect::<Result<Vec<_>>>()?,
            )
            .normalize(),
            a => a.clone(),
        })
    }

    pub fn next_ref_name(&self) -> String {
        let mut k = 1;
        loop {
            let n = format!("s{k}");
            if self.def(&n).is_none() {
                return n;
            }
            k += 1;
        }
    }
}

/// Total multiplications, each definition counted once.
pub fn fma_cost(s: &ExprSet) -> Result<usize> {
    s.validate()?;
    Ok(s.defs.iter().map(|d| d.1.cost()).sum::<usize>() + s.entries.values().map(Expr::cost).sum::<usize>())
}

/// Substitute all definitions; the result holds no refs.
pub fn expand_refs(s: &ExprSet) -> Result<ExprSet> {
    s.topo_defs()?;
    let mut out = ExprSet::new();
    for (k, e) in &s.entries {
        out.entries.insert(k.clone(), s.expand(e)?);
    }
    Ok(out)
}

/// `s<k> = <expr>` lines followed by `J[<root>,<terminal>] = <expr>` lines.
pub fn format_exprset(s: &ExprSet) -> String {
    let mut out = String::new();
    for (n, e) in &s.defs {
        out.push_str(&format!("{n} = {e}\n"));
    }
    for ((r, t), e) in s.sorted_entries() {
        out.push_str(&format!("J[{r},{t}] = {e}\n"));
    }
    out
}

pub fn parse_exprset(text: &str) -> Result<ExprSet> {
    let mut s = ExprSet::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |col: usize, msg: &str| Error::Syntax { line: ln + 1, col, msg: msg.to_string() };
        let eq = line.find('=').ok_or_else(|| err(1, "expected `=`"))?;
        let lhs = line[..eq].trim();
        let rhs = &line[eq + 1..];
        let e = parse_expr(rhs).map_err(|e| match e {
            Error::Syntax { col, msg, .. } => Error::Syntax { line: ln + 1, col: col + eq + 1, msg },
            other => other,
        })?;
        if let Some(inner) = lhs.strip_prefix("J[").and_then(|x| x.strip_suffix(']')) {
            let mut parts = inner.split(',');
            let (r, t) = match (parts.next(), parts.next(), parts.next()) {
                (Some(r), Some(t), None) if !r.trim().is_empty() && !t.trim().is_empty() => {
                    (r.trim(), t.trim())
                }
                _ => return Err(err(1, "expected `J[root,terminal]`")),
            };
            if s.entries.insert((r.to_string(), t.to_string()), e).is_some() {
                return Err(err(1, "entry defined twice"));
            }
        } else if is_ref_name(lhs) {
            s.push_def(lhs, e).map_err(|_| err(1, "reference defined twice"))?;
        } else {
            return Err(err(1, "left side must be `s<k>` or `J[root,terminal]`"));
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_factor_is_stripped() {
        assert_eq!(parse_expr("1*e5").unwrap(), Expr::Sym("e5".into()));
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_expr("e1*(e2+") {
            Err(Error::Syntax { col, .. }) => assert_eq!(col, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip_keeps_text() {
        let t = "(e1*e3+e2*e4)*(e5*e7+e6*e8)";
        assert_eq!(parse_expr(t).unwrap().to_string(), t);
    }

    #[test]
    fn nested_products_flatten() {
        let e = parse_expr("(a*b)*c").unwrap();
        assert_eq!(e.to_string(), "a*b*c");
    }

    #[test]
    fn ref_cycle_detected() {
        let s = parse_exprset("s1 = a*s1\nJ[x,y] = s1\n").unwrap();
        assert_eq!(expand_refs(&s), Err(Error::RefCycle("s1".into())));
    }
}
