#![allow(dead_code)]

use ojacc_core::oracle::{check_equiv, Artifact, Mode};
use ojacc_core::{parse_exprset, parse_graph, DiffGraph, ExprSet};

pub fn text(name: &str) -> String {
    let p = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{p}: {e}"))
}

pub fn graph(name: &str) -> DiffGraph {
    parse_graph(&text(&format!("{name}.graph"))).unwrap()
}

pub fn exprs(name: &str) -> ExprSet {
    parse_exprset(&text(&format!("{name}.exprs"))).unwrap()
}

pub fn strs(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Exact field comparison over `trials` instantiations.
pub fn same_values(a: Artifact, b: Artifact, trials: usize) -> bool {
    let r = check_equiv(&a, &b, trials, 0, Mode::Field).unwrap();
    if let Some(m) = r.mismatches.first() {
        eprintln!("mismatch at {:?} seed {}: {} vs {}", m.pair, m.seed, m.lhs, m.rhs);
    }
    r.passed()
}
