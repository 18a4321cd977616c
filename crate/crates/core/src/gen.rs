//! Seeded random inputs for property checks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::expr::Expr;
use crate::graph::{DiffGraph, Edge};
use crate::local_jacobian::LocalJacobian;

pub struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(seed: u64) -> Gen {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform in `lo..=hi`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.rng.next_u64() % (hi - lo + 1) as u64) as usize
    }

    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.rng.next_u64() % den < num
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for k in (1..xs.len()).rev() {
            let j = self.range(0, k);
            xs.swap(k, j);
        }
    }

    /// Layered DAG with at most `max_v` vertices and `max_e` edges.
    ///
    /// Every vertex above level 0 has a predecessor one level up, so levels are exact;
    /// the remaining edge budget goes to random forward pairs, some crossing levels.
    pub fn layered_dag(&mut self, max_v: usize, max_e: usize) -> DiffGraph {
        let n = self.range(2, max_v.max(2));
        let depth = self.range(1, (n - 1).min(4));
        let mut level: Vec<usize> = (0..n).map(|k| if k <= depth { k } else { 0 }).collect();
        for l in level.iter_mut().skip(depth + 1) {
            *l = self.range(0, depth);
        }
        let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
        for v in 0..n {
            if level[v] == 0 || pairs.len() >= max_e {
                continue;
            }
            let ups: Vec<usize> = (0..n).filter(|&u| level[u] + 1 == level[v]).collect();
            let u = ups[self.range(0, ups.len() - 1)];
            pairs.insert((u, v));
        }
        let budget = self.range(pairs.len(), max_e.max(pairs.len()));
        let mut tries = 0;
        while pairs.len() < budget && tries < 200 {
            tries += 1;
            let (u, v) = (self.range(0, n - 1), self.range(0, n - 1));
            if level[u] < level[v] {
                pairs.insert((u, v));
            }
        }
        let edges = pairs
            .iter()
            .enumerate()
            .map(|(k, (u, v))| Edge::sym(&format!("e{}", k + 1), &format!("v{}", u + 1), &format!("v{}", v + 1)))
            .collect();
        DiffGraph::new(edges).expect("forward edges only")
    }

    /// Sum/product tree over fresh symbols `a1, a2, ...`.
    pub fn simple_expr(&mut self, max_leaves: usize) -> Expr {
        let mut next = 0;
        let n = self.range(1, max_leaves.max(1));
        self.expr_with(n, &mut next, 0).normalize()
    }

    fn expr_with(&mut self, leaves: usize, next: &mut usize, depth: usize) -> Expr {
        if leaves == 1 {
            *next += 1;
            return Expr::atom(&format!("a{next}"));
        }
        let parts = self.range(2, leaves.min(3));
        let mut sizes = alloc::vec![1; parts];
        for _ in parts..leaves {
            let k = self.range(0, parts - 1);
            sizes[k] += 1;
        }
        let kids = sizes.into_iter().map(|s| self.expr_with(s, next, depth + 1)).collect();
        if (depth % 2 == 0) == self.chance(1, 2) {
            Expr::Sum(kids)
        } else {
            Expr::Prod(kids)
        }
    }

    /// Conformable chain of sparse matrices; dimensions up to `max_dim`.
    pub fn sparse_chain(&mut self, len: usize, max_dim: usize) -> Vec<LocalJacobian> {
        let dims: Vec<usize> = (0..=len).map(|_| self.range(1, max_dim)).collect();
        let names = |k: usize, d: usize| -> Vec<String> { (0..d).map(|i| format!("u{k}_{i}")).collect() };
        let mut sym = 0;
        (0..len)
            .map(|k| {
                let (rows, cols) = (names(k, dims[k]), names(k + 1, dims[k + 1]));
                let mut entries = BTreeMap::new();
                for r in &rows {
                    for c in &cols {
                        if self.chance(2, 3) {
                            sym += 1;
                            let label = if self.chance(1, 8) { Expr::Unit } else { Expr::atom(&format!("m{sym}")) };
                            entries.insert((r.clone(), c.clone()), label);
                        }
                    }
                }
                LocalJacobian { rows, cols, entries }
            })
            .collect()
    }
}
