//! Front end and graph construction checked against independent scans of
//! the fixture methods.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use codegraph_core::bpe::MergeTable;
use codegraph_core::frontend::lexer::tokenize;
use codegraph_core::frontend::{parse, preorder_tokens, statement_subtrees, Ast, NodeKind, SourceUnit};
use codegraph_core::sast::{build_sast, EdgeKind, SAst};
use codegraph_core::vocab::Vocabulary;

fn fixtures() -> Vec<(String, SourceUnit)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "java"))
        .collect();
    paths.sort();
    assert!(paths.len() >= 5);
    paths
        .into_iter()
        .map(|p| (p.display().to_string(), SourceUnit::read(&p).unwrap()))
        .collect()
}

fn method(unit: &SourceUnit) -> Ast {
    parse(unit).unwrap().method(0).unwrap()
}

fn sast(ast: &Ast) -> SAst {
    build_sast(ast, Vocabulary::shipped(), MergeTable::shipped()).unwrap()
}

/// Recursive pre-order walk written independently of the library iterator.
fn walk(ast: &Ast, id: usize, out: &mut Vec<usize>) {
    out.push(id);
    for &c in &ast.nodes[id].children {
        walk(ast, c, out);
    }
}

#[test]
fn leaf_tokens_reproduce_the_lexer_stream() {
    for (name, unit) in fixtures() {
        let ast = parse(&unit).unwrap();
        let mut order = Vec::new();
        walk(&ast, ast.root, &mut order);
        let leaves: Vec<&str> = order
            .iter()
            .filter_map(|&id| ast.nodes[id].token.as_deref())
            .collect();
        let lexed: Vec<String> = tokenize(&unit.text)
            .unwrap()
            .into_iter()
            .filter(|t| t.is_content())
            .map(|t| t.text)
            .collect();
        assert_eq!(leaves, lexed, "{name}");
        for &id in &order {
            let n = &ast.nodes[id];
            if let Some(tok) = &n.token {
                assert_eq!(&unit.text[n.span.0..n.span.1], tok, "{name}: span of leaf {id}");
            }
        }
    }
}

#[test]
fn preorder_matches_recursive_walk_and_ids() {
    for (name, unit) in fixtures() {
        let ast = parse(&unit).unwrap();
        let mut order = Vec::new();
        walk(&ast, ast.root, &mut order);
        assert_eq!(order, (0..ast.len()).collect::<Vec<_>>(), "{name}");
        let expected: Vec<String> = order
            .iter()
            .map(|&id| match &ast.nodes[id].token {
                Some(t) => t.clone(),
                None => ast.nodes[id].kind.name().to_string(),
            })
            .collect();
        assert_eq!(preorder_tokens(&ast), expected, "{name}");
        let edges: usize = ast.nodes.iter().map(|n| n.children.len()).sum();
        assert_eq!(edges + 1, ast.len());
    }
}

#[test]
fn qualifier_precedes_member() {
    let ast = parse(&SourceUnit::from_text("class C { int f(int a, int b) { return Math.abs(a-b); } }")).unwrap();
    let toks = preorder_tokens(&ast);
    let m = toks.iter().position(|t| t == "Math").unwrap();
    let abs = toks.iter().position(|t| t == "abs").unwrap();
    assert!(m < abs);
}

#[test]
fn statement_counts() {
    let ast = method(&fixtures().into_iter().find(|(n, _)| n.ends_with("GetLarger.java")).unwrap().1);
    // Declaration, the if (one subtree, nested body included), return.
    assert_eq!(statement_subtrees(&ast).unwrap().len(), 3);
}

/// Expected DataFlow pairs as AST ids: consecutive same-spelling identifier
/// leaves, by source position.
fn brute_force_flow(ast: &Ast) -> BTreeSet<(usize, usize)> {
    let mut by_name: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
    for n in &ast.nodes {
        if n.kind == NodeKind::Identifier {
            by_name.entry(n.token.as_deref().unwrap()).or_default().push((n.span.0, n.id));
        }
    }
    let mut out = BTreeSet::new();
    for occ in by_name.values_mut() {
        occ.sort();
        for w in occ.windows(2) {
            out.insert((w[0].1, w[1].1));
        }
    }
    out
}

#[test]
fn data_flow_matches_occurrence_scan() {
    for (name, unit) in fixtures() {
        let ast = method(&unit);
        let g = sast(&ast);
        let got: BTreeSet<(usize, usize)> = g
            .edges_of(EdgeKind::DataFlow)
            .map(|e| (g.nodes[e.src].ast_id.unwrap(), g.nodes[e.dst].ast_id.unwrap()))
            .collect();
        assert_eq!(got, brute_force_flow(&ast), "{name}");
        for e in g.edges_of(EdgeKind::DataFlow) {
            assert_eq!(g.nodes[e.src].variable_name, g.nodes[e.dst].variable_name);
            assert!(g.nodes[e.src].variable_name.is_some());
        }
    }
}

#[test]
fn variable_used_three_times_has_two_flow_edges() {
    let ast = method(&SourceUnit::from_text("class C { int f(int a) { int b = a + a; return b; } }"));
    let g = sast(&ast);
    let a_edges = g
        .edges_of(EdgeKind::DataFlow)
        .filter(|e| g.nodes[e.src].variable_name.as_deref() == Some("a"))
        .count();
    assert_eq!(a_edges, 2);
}

#[test]
fn leaf_chain_and_reconstruction() {
    for (name, unit) in fixtures() {
        let ast = method(&unit);
        let g = sast(&ast);
        let leaves = ast.nodes.iter().filter(|n| n.token.is_some()).count();
        assert_eq!(g.edges_of(EdgeKind::NextLeaf).count(), leaves - 1, "{name}");
        assert!(g.edges.len() >= ast.len() - 1);
        assert!(g.len() >= ast.len());

        let mut tails: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for e in g.edges_of(EdgeKind::Subtoken) {
            tails.entry(e.src).or_default().push(e.dst);
        }
        for n in g.nodes.iter().filter(|n| n.is_original_leaf) {
            let mut text = n.label.clone();
            for &c in tails.get(&n.id).map(Vec::as_slice).unwrap_or(&[]) {
                text.push_str(&g.nodes[c].label);
            }
            let tok = ast.nodes[n.ast_id.unwrap()].token.as_deref().unwrap();
            assert_eq!(text, tok, "{name}");
        }
        g.validate().unwrap();
    }
}

#[test]
fn get_larger_splits_into_three_subtokens() {
    let ast = method(&SourceUnit::from_text("class C { int getLarger(int a, int b) { return a; } }"));
    let g = sast(&ast);
    let head = g.nodes.iter().find(|n| n.is_original_leaf && n.label == "get").unwrap();
    let kids: Vec<&str> = g
        .edges_of(EdgeKind::Subtoken)
        .filter(|e| e.src == head.id)
        .map(|e| g.nodes[e.dst].label.as_str())
        .collect();
    assert_eq!(kids, ["L", "arger"]);
}
