mod common;

use common::{exprs, graph, same_values, text};
use ojacc_core::gen::Gen;
use ojacc_core::oracle::Artifact;
use ojacc_core::relations::{
    build_dep_graph, classify_relations, detect_cycles, face_order, audit_relations, parse_relations, replay_exprset,
    safe_elimination_order, DepGraph, RelKind,
};
use ojacc_core::{expr_to_graph, fma_cost, parse_exprset, Error, ExprSet};

fn f(a: &str, b: &str) -> (String, String) {
    (a.to_string(), b.to_string())
}

#[test]
fn single_product_is_direct() {
    let t = classify_relations(&parse_exprset("J[a,b] = x*y\n").unwrap());
    assert_eq!(t.relations.len(), 1);
    let r = t.get("x", "y").unwrap();
    assert_eq!(r.occurrences.len(), 1);
    assert_eq!((r.occurrences[0].kind, r.occurrences[0].expr.as_str()), (RelKind::Direct, "J[a,b]"));
}

#[test]
fn merged_set_direct_and_indirect() {
    let t = classify_relations(&exprs("fig9a"));
    let r = t.get("e4", "e8").unwrap();
    assert!(r.occurrences.iter().any(|o| o.kind == RelKind::Direct && o.expr == "J[v-2,v12]"));
    let ind = r.occurrences.iter().find(|o| o.kind == RelKind::IndirectRight).unwrap();
    assert_eq!((ind.expr.as_str(), ind.witness.as_deref()), ("s5", Some("e11")));
    let l = t.get("e8", "e15").unwrap();
    let left = l.occurrences.iter().find(|o| o.kind == RelKind::IndirectLeft).unwrap();
    assert_eq!((left.expr.as_str(), left.witness.as_deref()), ("J[v-2,v12]", Some("e4")));
    let r18 = t.get("e18", "e4").unwrap();
    assert!(r18.occurrences.iter().any(|o| o.expr == "s5" && o.kind == RelKind::IndirectRight));
}

#[test]
fn every_product_is_one_direct_occurrence() {
    for n in ["fig4a", "fig4a_expanded", "fig4b_backward", "fig4b_forward", "fig4b_refs", "fig9a"] {
        let s = exprs(n);
        assert_eq!(classify_relations(&s).direct_count(), fma_cost(&s).unwrap(), "{n}");
    }
}

#[test]
fn audit() {
    assert!(audit_relations(&classify_relations(&exprs("fig9a"))).is_empty());
    let bad = parse_exprset("J[r1,t1] = a*(b+c)\nJ[r2,t2] = d*(a*b+e)\n").unwrap();
    let v = audit_relations(&classify_relations(&bad));
    assert_eq!(v.len(), 1);
    assert_eq!((v[0].left.as_str(), v[0].right.as_str()), ("a", "b"));
    // sharing a*b saves the multiplication the audit points at
    let fixed = parse_exprset("s1 = a*b\nJ[r1,t1] = s1+a*c\nJ[r2,t2] = d*(s1+e)\n").unwrap();
    assert!(fma_cost(&fixed).unwrap() <= fma_cost(&bad).unwrap());
    assert!(same_values(Artifact::Exprs(&bad), Artifact::Exprs(&fixed), 20));
    assert!(audit_relations(&classify_relations(&parse_exprset("J[a,b] = x*y*z\n").unwrap())).is_empty());
}

#[test]
fn merged_set_dependencies() {
    let d = build_dep_graph(&classify_relations(&exprs("fig9a")));
    let out = |a: &str, b: &str| -> Vec<(String, String)> {
        d.edges.iter().filter(|e| e.from == f(a, b)).map(|e| e.to.clone()).collect()
    };
    assert!(out("e4", "e8").contains(&f("e8", "e11")));
    assert!(out("e5", "e9").contains(&f("e9", "e12")));
    assert!(out("e8", "e11").is_empty() && out("e9", "e12").is_empty());
    let m = d.edges.iter().find(|e| e.from == f("e8", "e15")).unwrap();
    assert!(m.mirrored);
    assert_eq!(m.to, f("e4", "e8"));
    assert!(detect_cycles(&d).is_empty());
}

#[test]
fn direct_only_has_no_dependencies() {
    let s = parse_exprset("J[a,b] = x*y*z\nJ[a,c] = x*w\n").unwrap();
    assert!(build_dep_graph(&classify_relations(&s)).edges.is_empty());
    let order = safe_elimination_order(&s).unwrap();
    assert_eq!(order.len(), 3);
}

#[test]
fn merged_set_safe_order() {
    let s = exprs("fig9a");
    let order = safe_elimination_order(&s).unwrap();
    assert_eq!(order.len(), fma_cost(&s).unwrap());
    assert_eq!(order[0].to_string(), "<e8,e11> in s4");
    assert_eq!(order[1].to_string(), "<e9,e12> in s4");
}

#[test]
fn merged_set_replay_cost_and_value() {
    let s = exprs("fig9a");
    let order = safe_elimination_order(&s).unwrap();
    let rep = replay_exprset(&graph("fig10e"), &s, &order).unwrap();
    assert_eq!(rep.trace.mults(), 26);
    assert_eq!(rep.trace.mults(), fma_cost(&s).unwrap());
    assert!(rep.shared.is_empty());
    let j = rep.graph.readout_jacobian().unwrap();
    assert!(same_values(Artifact::Exprs(&s), Artifact::Entries(&j), 100));
}

#[test]
fn shared_block_replay() {
    let s = exprs("fig4b_refs");
    let order = safe_elimination_order(&s).unwrap();
    let rep = replay_exprset(&graph("fig4b"), &s, &order).unwrap();
    assert_eq!(rep.trace.mults(), 10);
    let j = rep.graph.readout_jacobian().unwrap();
    assert!(same_values(Artifact::Graph(&graph("fig4b")), Artifact::Entries(&j), 50));
}

#[test]
fn cyclic_example() {
    let t = parse_relations(&text("cyclic.rel")).unwrap();
    let d = build_dep_graph(&t);
    let cycles = detect_cycles(&d);
    assert_eq!(cycles.len(), 1);
    assert_eq!(cycles[0].len(), 8);
    assert!(matches!(face_order(&t), Err(Error::DependencyCycle(c)) if c.len() == 1));
}

#[test]
fn empty_graph_has_no_cycles() {
    assert!(detect_cycles(&DepGraph::default()).is_empty());
}

#[test]
fn relation_file_syntax() {
    let t = parse_relations("a*b\ns1|s2s3\ns3s1|s2\n").unwrap();
    assert_eq!(t.get("a", "b").unwrap().occurrences[0].kind, RelKind::Direct);
    let r = t.get("s1", "s2").unwrap();
    assert_eq!(r.occurrences.len(), 2);
    assert_eq!(r.occurrences[1].witness.as_deref(), Some("s3"));
    assert!(matches!(parse_relations("a|b|c\n"), Err(Error::Syntax { line: 1, .. })));
    assert!(matches!(parse_relations("a b c\n"), Err(Error::Syntax { .. })));
}

#[test]
fn face_order_puts_targets_first() {
    let t = classify_relations(&exprs("fig9a"));
    let order = face_order(&t).unwrap();
    let pos = |a: &str, b: &str| order.iter().position(|x| *x == f(a, b)).unwrap();
    for e in build_dep_graph(&t).edges {
        assert!(pos(&e.to.0, &e.to.1) < pos(&e.from.0, &e.from.1));
    }
}

#[test]
fn cycles_iff_order_fails() {
    let mut gen = Gen::new(9);
    for _ in 0..40 {
        let e = gen.simple_expr(8);
        let s = ExprSet::single("y", "x", e.clone());
        let cyc = !detect_cycles(&build_dep_graph(&classify_relations(&s))).is_empty();
        assert_eq!(cyc, safe_elimination_order(&s).is_err());
    }
}

#[test]
fn random_sets_replay_at_cost() {
    let mut gen = Gen::new(4);
    for _ in 0..60 {
        let e = gen.simple_expr(9);
        let s = ExprSet::single("y", "x", e.clone());
        if !audit_relations(&classify_relations(&s)).is_empty() {
            continue;
        }
        let g = expr_to_graph(&e);
        let order = safe_elimination_order(&s).unwrap();
        let rep = replay_exprset(&g, &s, &order).unwrap();
        let j = rep.graph.readout_jacobian().unwrap_or_else(|err| panic!("{e}: {err} {:?}", rep.graph.intermediate_faces()));
        assert!(same_values(Artifact::Exprs(&s), Artifact::Entries(&j), 5), "{e}");
        assert_eq!(rep.trace.mults(), fma_cost(&s).unwrap(), "{e}");
    }
}
