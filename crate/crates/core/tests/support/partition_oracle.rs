//! Step-by-step reference for statement partitioning, written against the
//! raw S-AST edge list without the library's partition helpers.
//!
//! The pseudocode's own variables are kept: a running `nodes_sum`, a
//! `nodes_set` being filled, and the output list `lx` of finished node sets.

use std::collections::{BTreeMap, BTreeSet};

use codegraph_core::sast::{EdgeKind, SAst};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSubgraph {
    pub statements: Vec<usize>,
    pub nodes: BTreeSet<usize>,
    pub carried: BTreeSet<usize>,
    /// (src, dst, kind index) triples.
    pub edges: BTreeSet<(usize, usize, usize)>,
}

impl OracleSubgraph {
    fn natives(&self) -> BTreeSet<usize> {
        self.nodes.difference(&self.carried).copied().collect()
    }
}

/// Tree T' keeps only parent-child and subtoken edges.
fn tree_children(s: &SAst) -> BTreeMap<usize, Vec<usize>> {
    let mut ch: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in &s.edges {
        if matches!(e.kind, EdgeKind::AstChild | EdgeKind::Subtoken) {
            ch.entry(e.src).or_default().push(e.dst);
        }
    }
    for v in ch.values_mut() {
        v.sort();
    }
    ch
}

fn collect(ch: &BTreeMap<usize, Vec<usize>>, root: usize, out: &mut BTreeSet<usize>) {
    out.insert(root);
    if let Some(kids) = ch.get(&root) {
        for &k in kids {
            collect(ch, k, out);
        }
    }
}

/// Close a group: import the closest earlier occurrence of each variable,
/// then restore edges among the members.
fn assign(s: &SAst, statements: Vec<usize>, natives: BTreeSet<usize>, lx: &[OracleSubgraph]) -> OracleSubgraph {
    let first = *natives.iter().next().unwrap();
    let mut carried = BTreeSet::new();
    if !lx.is_empty() {
        let names: BTreeSet<&str> = natives
            .iter()
            .filter_map(|&n| s.nodes[n].variable_name.as_deref())
            .collect();
        for name in names {
            // Walk earlier subgraphs from the most recent backwards and take
            // the latest occurrence positioned before this group.
            let mut best: Option<usize> = None;
            for prev in lx.iter().rev() {
                for &n in &prev.nodes {
                    if n < first && s.nodes[n].variable_name.as_deref() == Some(name) {
                        best = Some(best.map_or(n, |b: usize| b.max(n)));
                    }
                }
            }
            if let Some(b) = best {
                carried.insert(b);
            }
        }
    }
    let nodes: BTreeSet<usize> = natives.union(&carried).copied().collect();
    let mut edges = BTreeSet::new();
    for e in &s.edges {
        if !(nodes.contains(&e.src) && nodes.contains(&e.dst)) {
            continue;
        }
        if e.kind == EdgeKind::NextLeaf && (carried.contains(&e.src) || carried.contains(&e.dst)) {
            continue;
        }
        edges.insert((e.src, e.dst, e.kind as usize));
    }
    OracleSubgraph {
        statements,
        nodes,
        carried,
        edges,
    }
}

pub fn partition(s: &SAst, lambda: usize) -> Vec<OracleSubgraph> {
    partition_traced(s, lambda).0
}

/// Also reports whether the tail merge fired.
pub fn partition_traced(s: &SAst, lambda: usize) -> (Vec<OracleSubgraph>, bool) {
    let ch = tree_children(s);
    let body = s.body.unwrap();
    let subtrees: Vec<usize> = ch.get(&body).cloned().unwrap_or_default();

    let mut nodes_sum = 0usize;
    let mut nodes_set: BTreeSet<usize> = BTreeSet::new();
    let mut stmts: Vec<usize> = Vec::new();
    let mut lx: Vec<OracleSubgraph> = Vec::new();
    for (k, &root) in subtrees.iter().enumerate() {
        let mut sub = BTreeSet::new();
        collect(&ch, root, &mut sub);
        nodes_sum += sub.len();
        nodes_set.extend(sub);
        stmts.push(root);
        if nodes_sum >= lambda || k == subtrees.len() - 1 {
            let g = assign(s, std::mem::take(&mut stmts), std::mem::take(&mut nodes_set), &lx);
            lx.push(g);
            nodes_sum = 0;
        }
    }
    let mut merged_tail = false;
    // The tail rule: size of the last subgraph strictly below lambda / 2.
    if lx.len() > 1 && (lx.last().unwrap().nodes.len() as f64) < lambda as f64 / 2.0 {
        let last = lx.pop().unwrap();
        let pen = lx.pop().unwrap();
        let natives: BTreeSet<usize> = pen.natives().union(&last.natives()).copied().collect();
        let mut statements = pen.statements;
        statements.extend(last.statements);
        let merged = assign(s, statements, natives, &lx);
        lx.push(merged);
        merged_tail = true;
    }
    (lx, merged_tail)
}

/// The library result in the oracle's shape.
pub fn from_library(p: &codegraph_core::partition::PartitionResult) -> Vec<OracleSubgraph> {
    p.subgraphs
        .iter()
        .map(|g| OracleSubgraph {
            statements: g.statements.clone(),
            nodes: g.node_ids.iter().copied().collect(),
            carried: g.carried_nodes.iter().copied().collect(),
            edges: g.edges.iter().map(|e| (e.src, e.dst, e.kind as usize)).collect(),
        })
        .collect()
}

/// Random method graph: 5 to 40 statements with subtree sizes 1 to 30.
pub fn random_case(seed: u64) -> SAst {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(5..=40);
    let sizes: Vec<usize> = (0..count).map(|_| rng.random_range(1..=30)).collect();
    let spec = codegraph_core::synth::SynthSpec {
        statement_sizes: sizes,
        variables: rng.random_range(1..=6),
        variable_rate: 0.5,
        vocab_size: 200,
    };
    codegraph_core::synth::statement_sast(&mut rng, &spec)
}

pub const LAMBDAS: [usize; 3] = [8, 30, 70];
pub const CASES: u64 = 25;
