//! Subtoken-augmented AST.
//!
//! Leaves are split into BPE subtokens (first subtoken stays in place, the
//! rest hang off it through `Subtoken` edges), consecutive original leaves are
//! chained by `NextLeaf` edges, and consecutive occurrences of each variable
//! are chained by `DataFlow` edges. Parent-child edges of the AST are kept as
//! `AstChild`.
//!
//! Node ids follow a pre-order walk of the tree formed by `AstChild` and
//! `Subtoken` edges.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bpe::MergeTable;
use crate::error::{Error, Result};
use crate::frontend::{Ast, NodeId, NodeKind};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    AstChild,
    DataFlow,
    NextLeaf,
    Subtoken,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 4] = [
        EdgeKind::AstChild,
        EdgeKind::DataFlow,
        EdgeKind::NextLeaf,
        EdgeKind::Subtoken,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_tree(self) -> bool {
        matches!(self, EdgeKind::AstChild | EdgeKind::Subtoken)
    }

    fn dot_style(self) -> &'static str {
        match self {
            EdgeKind::AstChild => "color=black",
            EdgeKind::Subtoken => "color=blue",
            EdgeKind::NextLeaf => "color=darkgreen, style=dashed",
            EdgeKind::DataFlow => "color=red, style=bold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn new(src: usize, dst: usize, kind: EdgeKind) -> Self {
        Edge { src, dst, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SAstNode {
    pub id: usize,
    pub vocab_id: u32,
    /// Kind name for structural nodes, subtoken text otherwise.
    pub label: String,
    pub kind: NodeKind,
    /// AST node this one came from; subtoken children point at their leaf.
    pub ast_id: Option<NodeId>,
    pub is_original_leaf: bool,
    pub is_subtoken_child: bool,
    pub variable_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SAst {
    pub nodes: Vec<SAstNode>,
    pub edges: Vec<Edge>,
    pub root: usize,
    /// Method body whose children are the statement subtrees.
    pub body: Option<usize>,
}

/// Directed edge list with vocabulary ids, the shape the GNN consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub vocab_ids: Vec<u32>,
    pub edges: Vec<Edge>,
}

impl GraphInput {
    pub fn len(&self) -> usize {
        self.vocab_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab_ids.is_empty()
    }
}

struct Builder<'a> {
    ast: &'a Ast,
    vocab: &'a Vocabulary,
    merges: &'a MergeTable,
    nodes: Vec<SAstNode>,
    edges: Vec<Edge>,
    leaves: Vec<usize>,
    ast_to_sast: Vec<usize>,
}

impl Builder<'_> {
    fn push(&mut self, node: SAstNode) -> usize {
        let id = self.nodes.len();
        self.nodes.push(SAstNode { id, ..node });
        id
    }

    fn visit(&mut self, ast_id: NodeId) -> Result<usize> {
        let n = self.ast.node(ast_id);
        let sid = match &n.token {
            None => self.push(SAstNode {
                id: 0,
                vocab_id: self.vocab.kind_id(n.kind)?,
                label: n.kind.name().to_string(),
                kind: n.kind,
                ast_id: Some(ast_id),
                is_original_leaf: false,
                is_subtoken_child: false,
                variable_name: None,
            }),
            Some(token) => self.leaf(ast_id, n.kind, token),
        };
        self.ast_to_sast[ast_id] = sid;
        for &child in &n.children {
            // Parent edges are recorded before the child's subtree so that
            // construction order follows pre-order.
            let edge_slot = self.edges.len();
            self.edges.push(Edge::new(sid, usize::MAX, EdgeKind::AstChild));
            let cid = self.visit(child)?;
            self.edges[edge_slot].dst = cid;
        }
        Ok(sid)
    }

    fn leaf(&mut self, ast_id: NodeId, kind: NodeKind, token: &str) -> usize {
        let mut units: Vec<(u32, String)> = Vec::new();
        for sub in self.merges.segment(token) {
            let ids = self.vocab.subtoken_ids(&sub, self.merges);
            if ids.len() == 1 {
                units.push((ids[0], sub.text().into_owned()));
            } else {
                for (id, b) in ids.into_iter().zip(&sub.bytes) {
                    units.push((id, String::from_utf8_lossy(&[*b]).into_owned()));
                }
            }
        }
        let variable_name = (kind == NodeKind::Identifier).then(|| token.to_string());
        let mut units = units.into_iter();
        let (first_id, first_label) = units.next().expect("leaf tokens are non-empty");
        let head = self.push(SAstNode {
            id: 0,
            vocab_id: first_id,
            label: first_label,
            kind,
            ast_id: Some(ast_id),
            is_original_leaf: true,
            is_subtoken_child: false,
            variable_name,
        });
        self.leaves.push(head);
        for (vocab_id, label) in units {
            let child = self.push(SAstNode {
                id: 0,
                vocab_id,
                label,
                kind,
                ast_id: Some(ast_id),
                is_original_leaf: false,
                is_subtoken_child: true,
                variable_name: None,
            });
            self.edges.push(Edge::new(head, child, EdgeKind::Subtoken));
        }
        head
    }
}

/// Build the S-AST of a parsed unit.
pub fn build_sast(ast: &Ast, vocab: &Vocabulary, merges: &MergeTable) -> Result<SAst> {
    let mut b = Builder {
        ast,
        vocab,
        merges,
        nodes: Vec::with_capacity(ast.len() * 2),
        edges: Vec::new(),
        leaves: Vec::new(),
        ast_to_sast: vec![usize::MAX; ast.len()],
    };
    let root = b.visit(ast.root)?;

    for w in b.leaves.windows(2) {
        b.edges.push(Edge::new(w[0], w[1], EdgeKind::NextLeaf));
    }

    // Occurrence chains per variable, emitted in order of first occurrence.
    let mut order: Vec<&str> = Vec::new();
    let mut occurrences: HashMap<&str, Vec<usize>> = HashMap::new();
    for &leaf in &b.leaves {
        if let Some(name) = b.nodes[leaf].variable_name.as_deref() {
            occurrences
                .entry(name)
                .or_insert_with(|| {
                    order.push(name);
                    Vec::new()
                })
                .push(leaf);
        }
    }
    let mut flow = Vec::new();
    for name in order {
        for w in occurrences[name].windows(2) {
            flow.push(Edge::new(w[0], w[1], EdgeKind::DataFlow));
        }
    }
    b.edges.extend(flow);

    let body = ast.method_body().map(|id| b.ast_to_sast[id]);
    Ok(SAst {
        nodes: b.nodes,
        edges: b.edges,
        root,
        body,
    })
}

impl SAst {
    /// Assemble an S-AST from explicit parts, checking its structural
    /// invariants.
    pub fn from_parts(nodes: Vec<SAstNode>, edges: Vec<Edge>, root: usize, body: Option<usize>) -> Result<SAst> {
        let s = SAst {
            nodes,
            edges,
            root,
            body,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    /// Children lists of the tree formed by `AstChild` and `Subtoken` edges.
    pub fn tree_children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.nodes.len()];
        for e in self.edges.iter().filter(|e| e.kind.is_tree()) {
            children[e.src].push(e.dst);
        }
        children
    }

    /// Original leaves in source order.
    pub fn original_leaves(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.is_original_leaf)
            .map(|n| n.id)
            .collect()
    }

    pub fn graph_input(&self) -> GraphInput {
        GraphInput {
            vocab_ids: self.nodes.iter().map(|n| n.vocab_id).collect(),
            edges: self.edges.clone(),
        }
    }

    /// Undirected adjacency over all edge kinds.
    pub fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.src].push(e.dst);
            adj[e.dst].push(e.src);
        }
        adj
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("malformed S-AST: {msg}")));
        let n = self.nodes.len();
        if n == 0 {
            return bad("no nodes".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return bad(format!("node at position {i} has id {}", node.id));
            }
            if node.is_subtoken_child && node.is_original_leaf {
                return bad(format!("node {i} is both a leaf and a subtoken child"));
            }
        }
        if self.root >= n || self.body.is_some_and(|b| b >= n) {
            return bad("root or body out of range".into());
        }
        let mut parent = vec![None; n];
        for e in &self.edges {
            if e.src >= n || e.dst >= n {
                return bad(format!("edge {e:?} out of range"));
            }
            match e.kind {
                EdgeKind::AstChild | EdgeKind::Subtoken => {
                    if parent[e.dst].replace(e.src).is_some() || e.dst == self.root {
                        return bad(format!("node {} has more than one parent", e.dst));
                    }
                }
                EdgeKind::DataFlow => {
                    let (a, b) = (&self.nodes[e.src].variable_name, &self.nodes[e.dst].variable_name);
                    if a.is_none() || a != b {
                        return bad(format!("data-flow edge {e:?} joins different variables"));
                    }
                }
                EdgeKind::NextLeaf => {
                    if !self.nodes[e.src].is_original_leaf || !self.nodes[e.dst].is_original_leaf {
                        return bad(format!("next-leaf edge {e:?} touches a non-leaf"));
                    }
                }
            }
        }
        // Every node must hang off the root.
        let children = self.tree_children();
        let mut seen = vec![false; n];
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut seen[v], true) {
                return bad("tree edges contain a cycle".into());
            }
            stack.extend(&children[v]);
        }
        if seen.iter().any(|s| !s) {
            return bad("tree edges do not reach every node".into());
        }
        Ok(())
    }

    /// Breadth-first distances from `src` over the undirected view.
    pub fn distances_from(&self, src: usize) -> Vec<Option<usize>> {
        bfs(&self.undirected_adjacency(), src)
    }

    pub fn to_json(&self) -> SAstJson {
        SAstJson {
            schema_version: crate::SCHEMA_VERSION,
            root: self.root,
            body: self.body,
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            edge_counts: EdgeKind::ALL
                .iter()
                .map(|&k| (format!("{k:?}"), self.edges_of(k).count()))
                .collect(),
        }
    }

    /// Graphviz rendering with edges colored by kind.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph sast {\n  node [shape=box, fontname=\"monospace\"];\n");
        for n in &self.nodes {
            let shape = if n.is_original_leaf || n.is_subtoken_child {
                "ellipse"
            } else {
                "box"
            };
            let _ = writeln!(
                out,
                "  n{} [label=\"{}\", shape={}];",
                n.id,
                escape_dot(&n.label),
                shape
            );
        }
        for e in &self.edges {
            let _ = writeln!(out, "  n{} -> n{} [{}];", e.src, e.dst, e.kind.dot_style());
        }
        out.push_str("}\n");
        out
    }
}

pub(crate) fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap();
        for &w in &adj[v] {
            if dist[w].is_none() {
                dist[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

fn escape_dot(s: &str) -> String {
    s.chars()
        .flat_map(|c| match c {
            '"' => vec!['\\', '"'],
            '\\' => vec!['\\', '\\'],
            '\n' => vec!['\\', 'n'],
            c => vec![c],
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SAstJson {
    pub schema_version: u32,
    pub root: usize,
    pub body: Option<usize>,
    pub nodes: Vec<SAstNode>,
    pub edges: Vec<Edge>,
    pub edge_counts: BTreeMap<String, usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse, SourceUnit};

    fn sast_of(src: &str) -> (Ast, SAst) {
        let ast = parse(&SourceUnit::from_text(src)).unwrap();
        let s = build_sast(&ast, Vocabulary::shipped(), MergeTable::shipped()).unwrap();
        (ast, s)
    }

    #[test]
    fn subtoken_children_of_get_larger() {
        let (_, s) = sast_of("int getLarger(int a, int b) { return a; }");
        let head = s.nodes.iter().find(|n| n.label == "get").unwrap();
        assert!(head.is_original_leaf);
        let kids: Vec<_> = s
            .edges_of(EdgeKind::Subtoken)
            .filter(|e| e.src == head.id)
            .map(|e| s.nodes[e.dst].label.as_str())
            .collect();
        assert_eq!(kids, ["L", "arger"]);
    }

    #[test]
    fn next_leaf_is_a_chain() {
        let (ast, s) = sast_of("void f(int a) { a = a + 1; g(a); }");
        let leaves = ast.leaves().count();
        let chain: Vec<_> = s.edges_of(EdgeKind::NextLeaf).collect();
        assert_eq!(chain.len(), leaves - 1);
        for w in chain.windows(2) {
            assert_eq!(w[0].dst, w[1].src);
        }
    }

    #[test]
    fn data_flow_chain_not_clique() {
        let (_, s) = sast_of("void f() { int a = 1; a = a * 2; }");
        let a_edges: Vec<_> = s
            .edges_of(EdgeKind::DataFlow)
            .filter(|e| s.nodes[e.src].variable_name.as_deref() == Some("a"))
            .collect();
        assert_eq!(a_edges.len(), 2);
    }

    #[test]
    fn vocab_ids_by_node_class() {
        let (_, s) = sast_of("void f() { x(); }");
        let v = Vocabulary::shipped();
        for n in &s.nodes {
            if n.is_original_leaf || n.is_subtoken_child {
                assert!((n.vocab_id as usize) < v.base_size());
            } else {
                assert_eq!(n.vocab_id, v.kind_id(n.kind).unwrap());
            }
        }
    }

    #[test]
    fn missing_kind_in_vocab() {
        let ast = parse(&SourceUnit::from_text("void f() { x(); }")).unwrap();
        let v = Vocabulary::from_parts(["x"], ["CompilationUnit"]);
        let err = build_sast(&ast, &v, MergeTable::shipped()).unwrap_err();
        assert!(matches!(err, Error::VocabularyMiss { .. }));
    }

    #[test]
    fn validate_accepts_built_graphs_and_rejects_broken_ones() {
        let (_, s) = sast_of("void f() { int a = 1; a++; }");
        s.validate().unwrap();
        let mut broken = s.clone();
        broken.edges.retain(|e| e.kind != EdgeKind::AstChild || e.dst != 3);
        assert!(broken.validate().is_err());
    }

    #[test]
    fn dot_export_has_every_edge() {
        let (_, s) = sast_of("void f() { String q = \"x\\\"y\"; }");
        let dot = s.to_dot();
        assert_eq!(dot.matches(" -> ").count(), s.edges.len());
        assert!(dot.contains("color=red") || s.edges_of(EdgeKind::DataFlow).count() == 0);
        assert!(dot.contains("\\\""));
    }
}
