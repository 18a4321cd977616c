//! DOT emitters. Output order follows the input order, so it is stable.

use std::fmt::Write as _;

use ojacc_core::{DiffGraph, LineGraph};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn graph(g: &DiffGraph) -> String {
    let mut out = String::from("digraph G {\n  rankdir=TB;\n");
    for v in g.vertices() {
        let _ = writeln!(out, "  {};", quote(&v));
    }
    for e in g.edges() {
        let label = if e.label.to_string() == e.id { e.id.clone() } else { format!("{}: {}", e.id, e.label) };
        let _ = writeln!(out, "  {} -> {} [label={}];", quote(&e.src), quote(&e.dst), quote(&label));
    }
    out.push_str("}\n");
    out
}

/// Labeled vertices only unless `meta` is set.
pub fn line_graph(lg: &LineGraph, meta: bool) -> String {
    let keep = |id: &str| meta || !lg.is_meta(id);
    let mut out = String::from("digraph L {\n");
    for (id, v) in &lg.vertices {
        if !keep(id) {
            continue;
        }
        if v.meta.is_some() {
            let _ = writeln!(out, "  {} [shape=point, xlabel={}];", quote(id), quote(id));
        } else {
            let _ = writeln!(out, "  {} [label={}];", quote(id), quote(&v.label.to_string()));
        }
    }
    for (a, b) in lg.edges() {
        if keep(&a) && keep(&b) {
            let _ = writeln!(out, "  {} -> {};", quote(&a), quote(&b));
        }
    }
    out.push_str("}\n");
    out
}
