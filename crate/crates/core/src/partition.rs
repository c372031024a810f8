//! Statement partitioning of an S-AST.
//!
//! Statement subtrees under the method body are accumulated left to right
//! until their node count reaches `lambda`, at which point the group becomes
//! a subgraph. Every subgraph after the first also receives, for each
//! variable it mentions, the last earlier occurrence of that variable
//! ("carried" nodes). A trailing subgraph smaller than `lambda / 2` is folded
//! into its predecessor.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sast::{Edge, EdgeKind, GraphInput, SAst};

pub const MIN_RECOMMENDED_LAMBDA: usize = 10;
pub const MAX_RECOMMENDED_LAMBDA: usize = 190;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionConfig {
    pub lambda: usize,
}

impl PartitionConfig {
    pub fn new(lambda: usize) -> Result<Self> {
        if lambda == 0 {
            return Err(Error::InvalidArgument("lambda must be at least 1".into()));
        }
        Ok(PartitionConfig { lambda })
    }
}

/// Suggested `lambda` for a corpus with the given mean S-AST node count:
/// `round(avg / 4.5)`, clamped to `[10, 190]`.
pub fn recommend_lambda(average_nodes: f64) -> usize {
    if !average_nodes.is_finite() || average_nodes <= 0.0 {
        return MIN_RECOMMENDED_LAMBDA;
    }
    let raw = (average_nodes / 4.5).round();
    (raw.min(MAX_RECOMMENDED_LAMBDA as f64) as usize).clamp(MIN_RECOMMENDED_LAMBDA, MAX_RECOMMENDED_LAMBDA)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgraph {
    pub order_index: usize,
    /// Roots of the statement subtrees grouped here, in statement order.
    pub statements: Vec<usize>,
    /// All member S-AST node ids, ascending. Carried nodes included.
    pub node_ids: Vec<usize>,
    /// Members imported from earlier subgraphs, ascending.
    pub carried_nodes: Vec<usize>,
    /// Induced S-AST edges in S-AST order, minus `NextLeaf` edges touching a
    /// carried node.
    pub edges: Vec<Edge>,
}

impl Subgraph {
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn native_nodes(&self) -> Vec<usize> {
        self.node_ids
            .iter()
            .copied()
            .filter(|n| self.carried_nodes.binary_search(n).is_err())
            .collect()
    }

    /// Self-contained graph with nodes renumbered by position in `node_ids`.
    pub fn graph_input(&self, sast: &SAst) -> GraphInput {
        let local: HashMap<usize, usize> = self.node_ids.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        GraphInput {
            vocab_ids: self.node_ids.iter().map(|&n| sast.nodes[n].vocab_id).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| Edge::new(local[&e.src], local[&e.dst], e.kind))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionResult {
    pub subgraphs: Vec<Subgraph>,
    pub lambda_used: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionJson {
    pub schema_version: u32,
    pub lambda_used: usize,
    pub node_count: usize,
    pub subgraphs: Vec<SubgraphJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubgraphJson {
    pub order_index: usize,
    pub statements: Vec<usize>,
    pub native_nodes: Vec<usize>,
    pub carried_nodes: Vec<usize>,
    pub edges: Vec<Edge>,
}

impl PartitionResult {
    pub fn len(&self) -> usize {
        self.subgraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgraphs.is_empty()
    }

    pub fn to_json(&self, sast: &SAst) -> PartitionJson {
        PartitionJson {
            schema_version: crate::SCHEMA_VERSION,
            lambda_used: self.lambda_used,
            node_count: sast.len(),
            subgraphs: self
                .subgraphs
                .iter()
                .map(|s| SubgraphJson {
                    order_index: s.order_index,
                    statements: s.statements.clone(),
                    native_nodes: s.native_nodes(),
                    carried_nodes: s.carried_nodes.clone(),
                    edges: s.edges.clone(),
                })
                .collect(),
        }
    }
}

/// Root ids of the statement subtrees, left to right.
pub fn statement_roots(sast: &SAst) -> Result<Vec<usize>> {
    let body = sast.body.ok_or(Error::NoMethod { index: 0, available: 0 })?;
    let roots = sast.tree_children()[body].clone();
    if roots.is_empty() {
        return Err(Error::EmptyBody);
    }
    Ok(roots)
}

/// Node count of every statement subtree, subtoken children included.
pub fn statement_sizes(sast: &SAst) -> Result<Vec<usize>> {
    let children = sast.tree_children();
    Ok(statement_roots(sast)?
        .into_iter()
        .map(|r| subtree(&children, r).len())
        .collect())
}

fn subtree(children: &[Vec<usize>], root: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        out.push(v);
        stack.extend(&children[v]);
    }
    out
}

struct Ctx<'a> {
    sast: &'a SAst,
    /// Statement-region occurrences of each variable, ascending.
    occurrences: HashMap<&'a str, Vec<usize>>,
    /// Statement subtree members, per statement.
    members: Vec<Vec<usize>>,
}

impl Ctx<'_> {
    /// Subgraph for a contiguous run of statements.
    fn build(&self, statements: std::ops::Range<usize>, roots: &[usize]) -> Subgraph {
        let mut natives: Vec<usize> = statements.clone().flat_map(|s| self.members[s].iter().copied()).collect();
        natives.sort_unstable();
        let first = natives[0];

        let mut carried: Vec<usize> = Vec::new();
        let mut names: Vec<&str> = natives
            .iter()
            .filter_map(|&n| self.sast.nodes[n].variable_name.as_deref())
            .collect();
        names.sort_unstable();
        names.dedup();
        for name in names {
            let occ = &self.occurrences[name];
            let before = occ.partition_point(|&o| o < first);
            if before > 0 {
                carried.push(occ[before - 1]);
            }
        }
        carried.sort_unstable();

        let mut node_ids = natives;
        node_ids.extend(&carried);
        node_ids.sort_unstable();

        let member = |n: usize| node_ids.binary_search(&n).is_ok();
        let is_carried = |n: usize| carried.binary_search(&n).is_ok();
        let edges = self
            .sast
            .edges
            .iter()
            .filter(|e| member(e.src) && member(e.dst))
            .filter(|e| e.kind != EdgeKind::NextLeaf || !(is_carried(e.src) || is_carried(e.dst)))
            .copied()
            .collect();

        Subgraph {
            order_index: 0,
            statements: roots[statements].to_vec(),
            node_ids,
            carried_nodes: carried,
            edges,
        }
    }
}

/// Partition an S-AST by statements.
pub fn partition(sast: &SAst, cfg: &PartitionConfig) -> Result<PartitionResult> {
    if cfg.lambda == 0 {
        return Err(Error::InvalidArgument("lambda must be at least 1".into()));
    }
    let roots = statement_roots(sast)?;
    let children = sast.tree_children();
    let members: Vec<Vec<usize>> = roots.iter().map(|&r| subtree(&children, r)).collect();

    let mut occurrences: HashMap<&str, Vec<usize>> = HashMap::new();
    for &n in members.iter().flatten() {
        if let Some(name) = sast.nodes[n].variable_name.as_deref() {
            occurrences.entry(name).or_default().push(n);
        }
    }
    for occ in occurrences.values_mut() {
        occ.sort_unstable();
    }
    let ctx = Ctx {
        sast,
        occurrences,
        members,
    };

    let mut groups: Vec<std::ops::Range<usize>> = Vec::new();
    let mut start = 0;
    let mut sum = 0;
    for (i, m) in ctx.members.iter().enumerate() {
        sum += m.len();
        if sum >= cfg.lambda || i + 1 == roots.len() {
            groups.push(start..i + 1);
            start = i + 1;
            sum = 0;
        }
    }

    let mut subgraphs: Vec<Subgraph> = groups.iter().map(|g| ctx.build(g.clone(), &roots)).collect();
    if subgraphs.len() > 1 && 2 * subgraphs[subgraphs.len() - 1].len() < cfg.lambda {
        let n = groups.len();
        let merged = groups[n - 2].start..groups[n - 1].end;
        subgraphs.truncate(n - 2);
        subgraphs.push(ctx.build(merged, &roots));
    }
    for (i, s) in subgraphs.iter_mut().enumerate() {
        s.order_index = i;
    }
    log::debug!(
        "partitioned {} statements into {} subgraphs (lambda {})",
        roots.len(),
        subgraphs.len(),
        cfg.lambda
    );
    Ok(PartitionResult {
        subgraphs,
        lambda_used: cfg.lambda,
    })
}
