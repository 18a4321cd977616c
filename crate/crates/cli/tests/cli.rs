use std::path::PathBuf;
use std::process::Command;

fn fixture(name: &str) -> String {
    format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ojacc")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn scratch(name: &str, body: &str) -> String {
    let dir: PathBuf = std::env::temp_dir().join(format!("ojacc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn inspect_shows_degree_annotations() {
    let (code, out, _) = run(&["inspect", &fixture("fig9a.graph")]);
    assert_eq!(code, 0);
    assert!(out.contains("vertex v1 depth=1 level=1 (2,4)\n"), "{out}");
    assert!(out.contains("cross e18 e19\n"));
}

#[test]
fn inspect_single_edge() {
    let g = scratch("one.graph", "e e1 a b\n");
    let (code, out, _) = run(&["inspect", &g]);
    assert_eq!(code, 0);
    assert!(out.starts_with("roots a\ninner \nterminals b\ndepth 1\n"), "{out}");
}

#[test]
fn malformed_input_exits_two_with_line() {
    let g = scratch("bad.graph", "e e1 a b\ne e2 b\n");
    let (code, _, err) = run(&["inspect", &g]);
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "{err}");
    let cyc = scratch("cyc.graph", "e e1 a b\ne e2 b a\n");
    assert_eq!(run(&["inspect", &cyc]).0, 2);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["bogus"]).0, 1);
    assert_eq!(run(&["inspect"]).0, 1);
    assert_eq!(run(&["--trials", "0", "inspect", &fixture("fig1a.graph")]).0, 1);
    assert_eq!(run(&["inspect", "/no/such/file.graph"]).0, 1);
    assert_eq!(run(&["verify", &fixture("fig1a.graph"), &fixture("notes.txt")]).0, 1);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn factorize_backward_prints_nested_sum() {
    let (code, out, _) = run(&["factorize", &fixture("fig4b.graph"), "--direction", "backward"]);
    assert_eq!(code, 0);
    assert!(out.contains("J[v1,v9] = e1*(e3*e7*e11+e4*(e8*e11+e9*e12))+e2*(e6*e10*e12+e5*(e8*e11+e9*e12))\n"), "{out}");
    assert!(out.contains("# cost 12\n"));
    assert!(out.ends_with("# verify PASS trials=100 mode=field\n"));
}

#[test]
fn factorize_refs_shares_one_block() {
    let (code, out, _) = run(&["factorize", &fixture("fig4b.graph"), "--direction", "refs"]);
    assert_eq!(code, 0);
    assert!(out.contains("s1 = e8*e11+e9*e12\n"), "{out}");
    assert!(out.contains("# cost 10\n"));
}

#[test]
fn factorize_pages_json() {
    let (code, out, _) = run(&["--format", "json", "factorize", &fixture("fig9a.graph"), "--direction", "pages"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["paged"], true);
    assert_eq!(v["exprs"]["entries"].as_array().unwrap().len(), 16);
    assert_eq!(v["verify"]["mismatches"].as_array().unwrap().len(), 0);
    assert!(v["graph"].as_str().unwrap().starts_with("# page "));
}

#[test]
fn multi_pair_backward_goes_through_pages() {
    let (code, out, _) = run(&["--format", "json", "factorize", &fixture("fig7a.graph"), "--direction", "forward"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!((v["direction"].as_str(), v["paged"].as_bool()), (Some("forward"), Some(true)));
}

#[test]
fn eliminate_fig4a_costs_five() {
    let (code, out, _) = run(&["eliminate", &fixture("fig4a.graph")]);
    assert_eq!(code, 0);
    assert!(out.starts_with("# order derived\n"));
    assert!(out.contains("J[v1,v7] = (e1*e3+e2*e4)*(e5*e7+e6*e8)\n"), "{out}");
    assert!(out.contains("# mults 5\n"));
}

#[test]
fn eliminate_with_order_file() {
    let order = scratch("fig1a.order", "# one face per line\ne3 e1\n");
    let (code, out, _) = run(&["eliminate", &fixture("fig1a.graph"), "--order", &order]);
    assert_eq!(code, 0);
    assert!(out.contains("# completed 5 faces lowest-first\n"), "{out}");
    assert!(out.contains("# mults 6\n"));
    let bad = scratch("bad.order", "e1 e2\n");
    assert_eq!(run(&["eliminate", &fixture("fig1a.graph"), "--order", &bad]).0, 1);
}

#[test]
fn empty_order_on_single_edge_is_identity() {
    let g = scratch("edge.graph", "e e1 a b\n");
    let order = scratch("empty.order", "");
    let (code, out, _) = run(&["eliminate", &g, "--order", &order]);
    assert_eq!(code, 0);
    assert_eq!(out, "# order order\nJ[a,b] = e1\n# mults 0\n# verify PASS trials=100 mode=field\n");
}

#[test]
fn eliminate_from_exprset() {
    let (code, out, _) = run(&["eliminate", &fixture("fig4b.graph"), "--from-exprset", &fixture("fig4b_refs.exprs")]);
    assert_eq!(code, 0);
    assert!(out.contains("# mults 10\n"), "{out}");
    let (code, out, _) = run(&["eliminate", &fixture("fig10e.graph"), "--from-exprset", &fixture("fig9a.exprs")]);
    assert_eq!(code, 0);
    assert!(out.contains("# mults 26\n"), "{out}");
}

#[test]
fn cycles_exit_four_with_listing() {
    for f in ["cyclic.exprs", "cyclic.rel"] {
        for cmd in ["order", "deps"] {
            let (code, out, err) = run(&[cmd, &fixture(f)]);
            assert_eq!(code, 4, "{cmd} {f}");
            assert!(out.is_empty());
            assert_eq!(err.lines().filter(|l| l.starts_with("cycle: ")).count(), 1, "{err}");
        }
    }
    let (code, _, _) = run(&["eliminate", &fixture("fig4b.graph"), "--from-exprset", &fixture("cyclic.exprs")]);
    assert_eq!(code, 4);
}

#[test]
fn order_and_relations_of_merged_set() {
    let (code, out, _) = run(&["order", &fixture("fig9a.exprs")]);
    assert_eq!(code, 0);
    assert!(out.starts_with("<e8,e11> in s4\n<e9,e12> in s4\n"), "{out}");
    let (code, out, _) = run(&["relations", &fixture("fig9a.exprs")]);
    assert_eq!(code, 0);
    assert!(out.contains("e8 e15 indirect-left in J[v-2,v12] witness=e4\n"), "{out}");
    let (code, out, _) = run(&["deps", &fixture("fig9a.exprs")]);
    assert_eq!(code, 0);
    assert!(out.contains("<e8,e15> after <e4,e8> (mirrored)\n"), "{out}");
}

#[test]
fn verify_pass_and_fail() {
    let (code, out, _) = run(&["verify", &fixture("fig4b.graph"), &fixture("fig4b_forward.exprs")]);
    assert_eq!((code, out.as_str()), (0, "# verify PASS trials=100 mode=field\n"));
    assert_eq!(run(&["--float", "verify", &fixture("fig4a.exprs"), &fixture("fig4a_expanded.exprs")]).0, 0);
    let nested = std::fs::read_to_string(fixture("fig4a.exprs")).unwrap();
    let bad = scratch("bad.exprs", &nested.replacen("e1", "e2", 1));
    let (code, _, err) = run(&["verify", &fixture("fig4a.exprs"), &bad]);
    assert_eq!(code, 3);
    assert!(err.contains("differs at seed 0"), "{err}");
}

#[test]
fn verify_support_mismatch() {
    let other = scratch("other.exprs", "J[y,z] = e1\n");
    assert_eq!(run(&["verify", &fixture("fig4a.exprs"), &other]).0, 3);
}

#[test]
fn dot_line_graph_of_fig1a() {
    let (code, out, _) = run(&["dot", &fixture("fig1a.graph"), "--line-graph"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().filter(|l| l.contains("[label=")).count(), 5);
    assert_eq!(out.lines().filter(|l| l.contains("->")).count(), 6);
    let (_, meta, _) = run(&["dot", &fixture("fig1a.graph"), "--line-graph", "--meta"]);
    assert!(meta.contains("src:"));
    let (_, g, _) = run(&["dot", &fixture("fig4a.graph")]);
    assert_eq!(g.lines().filter(|l| l.contains("->")).count(), 8);
    let (_, d, _) = run(&["dot", &fixture("fig9a.exprs")]);
    assert!(d.starts_with("digraph deps {\n"));
}

#[test]
fn accumulate_chain() {
    let (code, out, _) = run(&["accumulate", &fixture("fig4b.graph"), "--paren", "((AB)C)D"]);
    assert_eq!(code, 0);
    assert!(out.contains("# matrix A\nJ v1 | v2 v3\nentry v1 v2 = e1\nentry v1 v3 = e2\n"), "{out}");
    assert!(out.contains("# cost 10\n"));
    let (_, best, _) = run(&["accumulate", &fixture("fig4a.graph"), "--best"]);
    assert!(best.contains("# paren (AB)(CD)\n# cost 5\n"), "{best}");
    assert_eq!(run(&["accumulate", &fixture("fig4a.graph"), "--paren", "(AB"]).0, 2);
}

#[test]
fn path_guard_exits_five() {
    assert_eq!(run(&["--guard", "3", "factorize", &fixture("fig4a.graph")]).0, 5);
    assert_eq!(run(&["--guard", "4", "factorize", &fixture("fig4a.graph")]).0, 0);
}

#[test]
fn identical_runs_are_byte_identical() {
    for args in [
        vec!["factorize", "--direction", "pages"],
        vec!["eliminate"],
        vec!["--format", "json", "inspect"],
        vec!["dot", "--line-graph"],
    ] {
        let mut a = args.clone();
        let f = fixture("fig10a.graph");
        a.push(&f);
        assert_eq!(run(&a), run(&a));
    }
}
