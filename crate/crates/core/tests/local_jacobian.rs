mod common;

use std::collections::BTreeMap;

use common::{graph, same_values, strs};
use ojacc_core::gen::Gen;
use ojacc_core::local_jacobian::{
    accumulate, best_accumulation_order, contract_local, extract_local_jacobian, level_chain, parse_paren,
    LocalJacobian, Paren,
};
use ojacc_core::oracle::Artifact;
use ojacc_core::{fma_cost, Error, Expr, ExprSet};

/// Boolean sparsity product, counting every pair of nonzeros that meet.
fn count_products(chain: &[LocalJacobian], p: &Paren) -> (Vec<Vec<bool>>, usize) {
    match p {
        Paren::Leaf(k) => {
            let m = &chain[*k];
            let rows = m.rows.iter().map(|r| m.cols.iter().map(|c| m.get(r, c).is_some()).collect()).collect();
            (rows, 0)
        }
        Paren::Node(a, b) => {
            let (l, cl) = count_products(chain, a);
            let (r, cr) = count_products(chain, b);
            let mut n = 0;
            let out = (0..l.len())
                .map(|i| {
                    (0..r[0].len())
                        .map(|k| {
                            let hits = (0..r.len()).filter(|&j| l[i][j] && r[j][k]).count();
                            n += hits;
                            hits > 0
                        })
                        .collect()
                })
                .collect();
            (out, cl + cr + n)
        }
    }
}

fn fig4b_chain() -> Vec<LocalJacobian> {
    level_chain(&graph("fig4b")).unwrap()
}

#[test]
fn fig4b_matrices() {
    let c = fig4b_chain();
    assert_eq!(c.len(), 4);
    assert_eq!((c[0].rows.clone(), c[0].cols.clone()), (strs(&["v1"]), strs(&["v2", "v3"])));
    assert_eq!(c[0].get("v1", "v2"), Some(&Expr::atom("e1")));
    assert_eq!(c[0].get("v1", "v3"), Some(&Expr::atom("e2")));
    assert_eq!((c[1].rows.len() * c[1].cols.len(), c[1].nonzeros()), (6, 4));
    let one = extract_local_jacobian(&graph("fig4b"), &strs(&["v7"]), &strs(&["v9"])).unwrap();
    assert_eq!((one.nonzeros(), one.get("v7", "v9")), (1, Some(&Expr::atom("e11"))));
}

#[test]
fn fig4b_left_to_right() {
    let c = fig4b_chain();
    let p = parse_paren("((AB)C)D").unwrap();
    let acc = accumulate(&c, &p).unwrap();
    assert_eq!(acc.cost, 10);
    assert_eq!(count_products(&c, &p).1, 10);
    assert_eq!(fma_cost(&acc.exprs).unwrap(), 10);
    assert_eq!(acc.exprs.defs[0].1.to_string(), "e1*e4+e2*e5");
}

#[test]
fn fig4b_right_to_left() {
    let c = fig4b_chain();
    let p = parse_paren("A(B(CD))").unwrap();
    let acc = accumulate(&c, &p).unwrap();
    assert_eq!(acc.cost, 10);
    assert_eq!(count_products(&c, &p).1, 10);
    assert_eq!(acc.exprs.defs.len(), 1);
    assert_eq!(acc.exprs.defs[0].1.to_string(), "e8*e11+e9*e12");
    assert_eq!(fma_cost(&acc.exprs).unwrap(), 10);
}

#[test]
fn every_bracketing_same_value() {
    let g = graph("fig4b");
    let c = fig4b_chain();
    for p in Paren::all(0, c.len() - 1) {
        let acc = accumulate(&c, &p).unwrap();
        assert_eq!(acc.cost, count_products(&c, &p).1, "{p}");
        assert!(same_values(Artifact::Graph(&g), Artifact::Exprs(&acc.exprs), 20), "{p}");
    }
}

#[test]
fn fig4a_prefers_split_middle() {
    let c = level_chain(&graph("fig4a")).unwrap();
    let (p, cost) = best_accumulation_order(&c).unwrap();
    assert_eq!((p.to_string().as_str(), cost), ("(AB)(CD)", 5));
    assert!(accumulate(&c, &parse_paren("(A(BC))D").unwrap()).unwrap().cost > cost);
}

#[test]
fn scalar_chain_any_order() {
    let m = |r: &str, c: &str, e: &str| LocalJacobian {
        rows: strs(&[r]),
        cols: strs(&[c]),
        entries: BTreeMap::from([((r.to_string(), c.to_string()), Expr::atom(e))]),
    };
    let c = vec![m("a", "b", "x1"), m("b", "c", "x2"), m("c", "d", "x3")];
    let costs: Vec<usize> = Paren::all(0, 2).iter().map(|p| accumulate(&c, p).unwrap().cost).collect();
    assert_eq!(costs, [2, 2]);
    let two = accumulate(&c[..2], &Paren::left_to_right(2)).unwrap();
    assert_eq!((two.cost, two.exprs.entries.values().next().unwrap().to_string()), (1, "x1*x2".to_string()));
}

#[test]
fn chain_errors() {
    let c = fig4b_chain();
    let bad = vec![c[0].clone(), c[2].clone()];
    assert!(matches!(accumulate(&bad, &Paren::left_to_right(2)), Err(Error::NonConformable(0, 1))));
    assert!(matches!(best_accumulation_order(&[]), Err(Error::EmptyChain)));
    let long: Vec<LocalJacobian> = (0..13)
        .map(|k| LocalJacobian {
            rows: vec![format!("x{k}")],
            cols: vec![format!("x{}", k + 1)],
            entries: BTreeMap::new(),
        })
        .collect();
    assert!(matches!(best_accumulation_order(&long), Err(Error::ChainTooLong(13, 12))));
}

#[test]
fn fig7_contraction() {
    let g = graph("fig7a");
    let (h, s) = contract_local(&g, &strs(&["v1", "v11"]), &strs(&["v2", "v3", "v12", "v13"]), &strs(&["v4", "v14"]))
        .unwrap();
    let defs: Vec<String> = s.defs.iter().map(|(_, d)| d.to_string()).collect();
    assert_eq!(defs, ["e1*e3+e2*e4", "e11*e13+e12*e14"]);
    assert_eq!(h.find_edge("v1", "v4").unwrap().label, Expr::Ref("s1".into()));
    assert_eq!(h.find_edge("v11", "v14").unwrap().label, Expr::Ref("s2".into()));
    assert!(same_values(Artifact::Graph(&g), Artifact::GraphRefs(&h, &s), 50));
}

#[test]
fn dp_matches_brute_force() {
    let mut gen = Gen::new(11);
    for _ in 0..100 {
        let len = gen.range(1, 6);
        let c = gen.sparse_chain(len, 4);
        let (p, cost) = best_accumulation_order(&c).unwrap();
        let brute = Paren::all(0, len - 1).iter().map(|q| accumulate(&c, q).unwrap().cost).min().unwrap();
        assert_eq!(cost, brute);
        assert_eq!(accumulate(&c, &p).unwrap().cost, cost);
    }
}

#[test]
fn bracketings_agree_on_random_chains() {
    let mut gen = Gen::new(12);
    for _ in 0..30 {
        let len = gen.range(2, 5);
        let c = gen.sparse_chain(len, 3);
        let base = accumulate(&c, &Paren::left_to_right(len)).unwrap().exprs;
        for p in Paren::all(0, len - 1) {
            let e: ExprSet = accumulate(&c, &p).unwrap().exprs;
            assert!(same_values(Artifact::Exprs(&base), Artifact::Exprs(&e), 3));
        }
    }
}
