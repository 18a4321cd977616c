mod common;

use common::{exprs, graph, same_values};
use ojacc_core::convert::graph_to_expr_single;
use ojacc_core::factor::factorize_backward;
use ojacc_core::gen::Gen;
use ojacc_core::oracle::Artifact;
use ojacc_core::{
    expand_refs, expr_to_graph, fma_cost, format_exprset, graph_to_expr, parse_expr, parse_exprset, parse_graph, Error,
    Expr, ExprSet,
};
use proptest::prelude::*;

fn only(s: &ExprSet) -> &Expr {
    s.entries.values().next().unwrap()
}

#[test]
fn nested_and_expanded_costs() {
    assert_eq!(fma_cost(&exprs("fig4a")).unwrap(), 5);
    assert_eq!(fma_cost(&exprs("fig4a_expanded")).unwrap(), 12);
}

#[test]
fn shared_reference_counted_once() {
    assert_eq!(fma_cost(&exprs("fig4b_refs")).unwrap(), 10);
    assert!(fma_cost(&expand_refs(&exprs("fig4b_refs")).unwrap()).unwrap() >= 10);
}

#[test]
fn parse_shapes() {
    let e = parse_expr("(e1*e3+e2*e4)*(e5*e7+e6*e8)").unwrap();
    match &e {
        Expr::Prod(fs) => {
            assert_eq!(fs.len(), 2);
            assert!(fs.iter().all(|f| matches!(f, Expr::Sum(ts) if ts.len() == 2)));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(parse_expr("1*e5").unwrap(), Expr::atom("e5"));
    assert!(matches!(parse_expr("e1*(e2+"), Err(Error::Syntax { .. })));
}

#[test]
fn fig4a_gives_nested_product() {
    let e = graph_to_expr(&graph("fig4a"), "v1", "v7").unwrap();
    assert_eq!(e, *only(&exprs("fig4a")));
}

#[test]
fn fig4b_is_not_expressible() {
    assert!(matches!(graph_to_expr(&graph("fig4b"), "v1", "v9"), Err(Error::ComplexBlock { .. })));
}

#[test]
fn chain_gives_product() {
    let g = parse_graph("e ea a b\ne eb b c\n").unwrap();
    assert_eq!(graph_to_expr(&g, "a", "c").unwrap().to_string(), "ea*eb");
    let back = expr_to_graph(&parse_expr("ea*eb").unwrap());
    assert_eq!((back.vertex_count(), back.edges().len()), (3, 2));
}

#[test]
fn nested_product_graph_shape() {
    // the shared middle vertex is split in two by the sum-of-products builder
    let g = expr_to_graph(only(&exprs("fig4a")));
    assert_eq!(g.edges().len(), 8);
    assert_eq!(g.vertex_count(), 7);
    assert_eq!(graph_to_expr_single(&g).unwrap(), *only(&exprs("fig4a")));
}

#[test]
fn backward_set_graph_matches_factorization() {
    let e = only(&exprs("fig4b_backward")).clone();
    let g = expr_to_graph(&e);
    let b = factorize_backward(&graph("fig4b")).unwrap();
    assert_eq!((g.vertex_count(), g.edges().len()), (b.vertex_count(), b.edges().len()));
    assert_eq!(graph_to_expr_single(&g).unwrap(), e);
}

#[test]
fn refs_expand_to_backward_set() {
    let x = expand_refs(&exprs("fig4b_refs")).unwrap();
    assert!(x.defs.is_empty());
    assert_eq!(only(&x).canonical(), only(&exprs("fig4b_backward")).canonical());
    let plain = exprs("fig4a");
    assert_eq!(expand_refs(&plain).unwrap(), plain);
}

#[test]
fn self_reference_is_cycle() {
    let s = parse_exprset("s1 = e1*s1\nJ[a,b] = s1\n");
    let err = s.and_then(|s| expand_refs(&s).map(|_| ()));
    assert!(matches!(err, Err(Error::RefCycle(_))));
}

#[test]
fn exprset_text_round_trip() {
    for n in ["fig4a", "fig4a_expanded", "fig4b_backward", "fig4b_forward", "fig4b_refs", "fig9a"] {
        let t = format_exprset(&exprs(n));
        assert_eq!(format_exprset(&parse_exprset(&t).unwrap()), t);
    }
}

#[test]
fn graph_to_expr_evaluates_like_graph() {
    let g = graph("fig4a");
    let set = ExprSet::single("v1", "v7", graph_to_expr(&g, "v1", "v7").unwrap());
    assert!(same_values(Artifact::Graph(&g), Artifact::Exprs(&set), 100));
}

#[test]
fn noncommutative_order_kept() {
    let e = parse_expr("e3*e1+e2*(e5+e4)").unwrap();
    assert_eq!(e.to_string(), "e3*e1+e2*(e5+e4)");
}

proptest! {
    #[test]
    fn expr_graph_expr_identity(seed in any::<u64>()) {
        let e = Gen::new(seed).simple_expr(9);
        let g = expr_to_graph(&e);
        let back = graph_to_expr_single(&g).unwrap();
        prop_assert_eq!(back.canonical(), e.canonical());
        let g2 = expr_to_graph(&back);
        prop_assert_eq!((g2.vertex_count(), g2.edges().len()), (g.vertex_count(), g.edges().len()));
    }

    #[test]
    fn text_round_trip(seed in any::<u64>()) {
        let e = Gen::new(seed).simple_expr(12);
        prop_assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn expansion_never_cheaper(seed in any::<u64>()) {
        let mut gen = Gen::new(seed);
        let d = gen.simple_expr(5);
        let body = gen.simple_expr(5);
        let mut s = ExprSet::new();
        s.push_def("s1", d).unwrap();
        s.entries.insert(("a".into(), "b".into()), Expr::mul(body, Expr::Ref("s1".into())));
        let x = expand_refs(&s).unwrap();
        prop_assert!(fma_cost(&x).unwrap() >= fma_cost(&s).unwrap());
    }
}
