//! Java-subset front end: lexing, parsing and AST traversal.
//!
//! Node ids are assigned in depth-first pre-order, so walking the tree from
//! the root visits ids `0, 1, .., n-1` in sequence.

mod kind;
pub mod lexer;
mod parser;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};
pub use kind::{grammar_kinds, NodeKind, GRAMMAR};
use parser::RawNode;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Language {
    JavaSubset,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub text: String,
    pub language: Language,
}

impl SourceUnit {
    pub const MEMORY_PATH: &'static str = "<memory>";

    pub fn from_text(text: impl Into<String>) -> Self {
        SourceUnit {
            path: Self::MEMORY_PATH.to_string(),
            text: text.into(),
            language: Language::JavaSubset,
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Format {
            source_name: path.display().to_string(),
            line: 0,
            message: format!("source is not valid UTF-8: {e}"),
        })?;
        Ok(SourceUnit {
            path: path.display().to_string(),
            text,
            language: Language::JavaSubset,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstNode {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Source token; present exactly for leaf kinds.
    pub token: Option<String>,
    pub children: Vec<NodeId>,
    /// Byte range `[start, end)` in the source text.
    pub span: (usize, usize),
}

impl AstNode {
    pub fn is_leaf(&self) -> bool {
        self.kind.is_leaf()
    }
}

#[derive(Debug, Clone)]
pub struct Ast {
    pub root: NodeId,
    pub nodes: Vec<AstNode>,
    pub unit: Arc<SourceUnit>,
}

impl PartialEq for Ast {
    /// Structural equality: kinds, tokens, child order and spans.
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.nodes == other.nodes
    }
}

/// Parse a compilation unit of the Java subset.
pub fn parse(unit: &SourceUnit) -> Result<Ast> {
    if unit.text.trim().is_empty() {
        return Err(ParseError {
            line: 1,
            column: 1,
            expected: "a class or method declaration".into(),
            found: "empty input".into(),
        }
        .into());
    }
    let raw = parser::parse_compilation_unit(&unit.text)?;
    Ok(Ast::from_raw(raw, Arc::new(unit.clone())))
}

/// Pre-order serialization: kind names for structural nodes, tokens for leaves.
pub fn preorder_tokens(ast: &Ast) -> Vec<String> {
    ast.preorder()
        .map(|id| {
            let n = &ast.nodes[id];
            match &n.token {
                Some(tok) => tok.clone(),
                None => n.kind.name().to_string(),
            }
        })
        .collect()
}

/// Roots of the statement subtrees of the first method body, left to right.
pub fn statement_subtrees(ast: &Ast) -> Result<Vec<NodeId>> {
    let body = ast.method_body().ok_or(Error::NoMethod {
        index: 0,
        available: 0,
    })?;
    let stmts = ast.nodes[body].children.clone();
    if stmts.is_empty() {
        return Err(Error::EmptyBody);
    }
    Ok(stmts)
}

impl Ast {
    fn from_raw(raw: RawNode, unit: Arc<SourceUnit>) -> Ast {
        let mut nodes = Vec::new();
        flatten(raw, &mut nodes);
        Ast {
            root: 0,
            nodes,
            unit,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &AstNode {
        &self.nodes[id]
    }

    /// Depth-first pre-order walk from the root.
    pub fn preorder(&self) -> impl Iterator<Item = NodeId> + '_ {
        let mut stack = vec![self.root];
        std::iter::from_fn(move || {
            let id = stack.pop()?;
            stack.extend(self.nodes[id].children.iter().rev());
            Some(id)
        })
    }

    /// Leaf nodes in source order.
    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.preorder().filter(|&id| self.nodes[id].is_leaf())
    }

    pub fn parents(&self) -> Vec<Option<NodeId>> {
        let mut parents = vec![None; self.nodes.len()];
        for n in &self.nodes {
            for &c in &n.children {
                parents[c] = Some(n.id);
            }
        }
        parents
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.children.len()).sum()
    }

    /// Method declarations in source order.
    pub fn methods(&self) -> Vec<NodeId> {
        self.preorder()
            .filter(|&id| self.nodes[id].kind == NodeKind::MethodDeclaration)
            .collect()
    }

    /// Body of the first method declaration, if any.
    pub fn method_body(&self) -> Option<NodeId> {
        let method = *self.methods().first()?;
        self.nodes[method]
            .children
            .iter()
            .copied()
            .find(|&c| self.nodes[c].kind == NodeKind::MethodBody)
    }

    /// Standalone tree for the `index`-th method, re-numbered in pre-order.
    pub fn method(&self, index: usize) -> Result<Ast> {
        let methods = self.methods();
        let &root = methods.get(index).ok_or(Error::NoMethod {
            index,
            available: methods.len(),
        })?;
        Ok(self.subtree(root))
    }

    /// Copy of the subtree rooted at `root` with dense pre-order ids.
    pub fn subtree(&self, root: NodeId) -> Ast {
        let mut nodes = Vec::new();
        self.copy_into(root, &mut nodes);
        Ast {
            root: 0,
            nodes,
            unit: Arc::clone(&self.unit),
        }
    }

    fn copy_into(&self, id: NodeId, out: &mut Vec<AstNode>) -> NodeId {
        let src = &self.nodes[id];
        let new_id = out.len();
        out.push(AstNode {
            id: new_id,
            kind: src.kind,
            token: src.token.clone(),
            children: Vec::new(),
            span: src.span,
        });
        let children: Vec<_> = src.children.iter().map(|&c| self.copy_into(c, out)).collect();
        out[new_id].children = children;
        new_id
    }

    /// Source text covered by a node.
    pub fn text(&self, id: NodeId) -> &str {
        let (s, e) = self.nodes[id].span;
        &self.unit.text[s..e]
    }

    pub fn to_json(&self) -> AstJson {
        AstJson {
            schema_version: crate::SCHEMA_VERSION,
            path: self.unit.path.clone(),
            root: self.root,
            nodes: self
                .nodes
                .iter()
                .map(|n| AstNodeJson {
                    id: n.id,
                    kind: n.kind.name().to_string(),
                    token: n.token.clone(),
                    children: n.children.clone(),
                    span: [n.span.0, n.span.1],
                })
                .collect(),
        }
    }
}

fn flatten(raw: RawNode, out: &mut Vec<AstNode>) -> NodeId {
    let id = out.len();
    out.push(AstNode {
        id,
        kind: raw.kind,
        token: raw.token,
        children: Vec::new(),
        span: raw.span,
    });
    let children: Vec<_> = raw.children.into_iter().map(|c| flatten(c, out)).collect();
    out[id].children = children;
    id
}

/// Serialized form written by `codegraph parse`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AstJson {
    pub schema_version: u32,
    pub path: String,
    pub root: NodeId,
    pub nodes: Vec<AstNodeJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AstNodeJson {
    pub id: NodeId,
    pub kind: String,
    pub token: Option<String>,
    pub children: Vec<NodeId>,
    pub span: [usize; 2],
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(src: &str) -> Ast {
        parse(&SourceUnit::from_text(src)).unwrap()
    }

    fn kinds(ast: &Ast) -> Vec<&'static str> {
        ast.nodes.iter().map(|n| n.kind.name()).collect()
    }

    #[test]
    fn local_declaration_shape() {
        let ast = parse_str("void f() { int a = 1; }");
        let stmts = statement_subtrees(&ast).unwrap();
        assert_eq!(stmts.len(), 1);
        let decl = ast.subtree(stmts[0]);
        // Hand-drawn: LocalVariableDeclaration(BasicType int,
        //   VariableDeclarator(Identifier a, Operator =, Literal 1))
        assert_eq!(
            kinds(&decl),
            [
                "LocalVariableDeclaration",
                "BasicType",
                "VariableDeclarator",
                "Identifier",
                "Operator",
                "Literal"
            ]
        );
        assert_eq!(
            preorder_tokens(&decl),
            ["LocalVariableDeclaration", "int", "VariableDeclarator", "a", "=", "1"]
        );
        assert_eq!(decl.nodes[0].children, [1, 2]);
        assert_eq!(decl.nodes[2].children, [3, 4, 5]);
    }

    #[test]
    fn empty_body_has_no_statements() {
        let ast = parse_str("void f(){}");
        let body = ast.method_body().unwrap();
        assert!(ast.nodes[body].children.is_empty());
        assert!(matches!(statement_subtrees(&ast), Err(Error::EmptyBody)));
    }

    #[test]
    fn single_character_variables_are_separate_leaves() {
        let ast = parse_str(
            "int getLarger(int a, int b) { if (a > b) { return a; } else { return b; } }",
        );
        let idents: Vec<_> = ast
            .leaves()
            .filter(|&id| ast.nodes[id].kind == NodeKind::Identifier)
            .map(|id| ast.nodes[id].token.clone().unwrap())
            .collect();
        assert_eq!(idents, ["a", "b", "a", "b", "a", "b"]);
    }

    #[test]
    fn preorder_tiny_trees() {
        let ast = parse_str("void f() { x(); }");
        let inv = ast
            .preorder()
            .find(|&i| ast.nodes[i].kind == NodeKind::MethodInvocation)
            .unwrap();
        assert_eq!(preorder_tokens(&ast.subtree(inv)), ["MethodInvocation", "x"]);
        let member = ast.nodes[inv].children[0];
        assert_eq!(preorder_tokens(&ast.subtree(member)), ["x"]);
    }

    #[test]
    fn nested_if_is_one_statement() {
        let ast = parse_str("void f() { int a = 0; if (a > 0) { a = 1; a = 2; } return; }");
        let stmts = statement_subtrees(&ast).unwrap();
        let kinds: Vec<_> = stmts.iter().map(|&s| ast.nodes[s].kind).collect();
        assert_eq!(
            kinds,
            [
                NodeKind::LocalVariableDeclaration,
                NodeKind::IfStatement,
                NodeKind::ReturnStatement
            ]
        );
    }

    #[test]
    fn method_extraction_renumbers() {
        let ast = parse_str("class C { int x; void f() { x = 1; } int g() { return 2; } }");
        assert_eq!(ast.methods().len(), 2);
        let g = ast.method(1).unwrap();
        assert_eq!(g.nodes[0].kind, NodeKind::MethodDeclaration);
        assert!(g.preorder().eq(0..g.len()));
        assert_eq!(statement_subtrees(&g).unwrap().len(), 1);
        assert!(matches!(ast.method(2), Err(Error::NoMethod { index: 2, available: 2 })));
    }

    #[test]
    fn qualified_call_shape() {
        let ast = parse_str("int f(int a, int b) { return Math.abs(a - b); }");
        let toks = preorder_tokens(&ast);
        let m = toks.iter().position(|t| t == "Math").unwrap();
        assert_eq!(toks[m - 1], "MethodInvocation");
        assert_eq!(toks[m + 1], "abs");
    }

    #[test]
    fn precedence_and_associativity() {
        let ast = parse_str("void f() { x = a - b - c * d; }");
        let text: Vec<_> = ast
            .preorder()
            .filter(|&i| ast.nodes[i].kind == NodeKind::BinaryOperation)
            .map(|i| ast.text(i).to_string())
            .collect();
        assert_eq!(text, ["a - b - c * d", "a - b", "c * d"]);
    }

    #[test]
    fn for_loop_parts() {
        let ast = parse_str("void f(int n) { for (int i = 0; i < n; i++) { s += i; } for (;;) break; }");
        let stmts = statement_subtrees(&ast).unwrap();
        let first: Vec<_> = ast.nodes[stmts[0]]
            .children
            .iter()
            .map(|&c| ast.nodes[c].kind)
            .collect();
        assert_eq!(
            first,
            [NodeKind::ForInit, NodeKind::ForCondition, NodeKind::ForUpdate, NodeKind::Block]
        );
        assert_eq!(ast.nodes[stmts[1]].children.len(), 1);
    }

    #[test]
    fn rejects_constructs_outside_subset() {
        for src in [
            "void f() { try { x(); } catch (E e) {} }",
            "void f() { a + b; }",
            "void f() { List<String> x; }",
            "void f() { int[] a = {1, 2}; }",
            "void f() { ; }",
            "void f() { x = 1 }",
            "",
            "   // only a comment",
            "class { }",
        ] {
            assert!(
                matches!(parse(&SourceUnit::from_text(src)), Err(Error::Parse(_))),
                "{src:?}"
            );
        }
    }

    #[test]
    fn error_position_is_reported() {
        let err = parse(&SourceUnit::from_text("void f() {\n  x = 1\n}")).unwrap_err();
        let Error::Parse(p) = err else { panic!() };
        assert_eq!((p.line, p.column), (3, 1));
        assert_eq!(p.expected, "`;`");
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!("void f() {{ x = {}1{}; }}", "(".repeat(5000), ")".repeat(5000));
        assert!(parse(&SourceUnit::from_text(src)).is_err());
        let src = format!("void f() {{ x = {}1; }}", "-".repeat(5000));
        assert!(parse(&SourceUnit::from_text(src)).is_err());
    }

    #[test]
    fn creators_and_accesses() {
        let ast = parse_str(
            "void f() { Scanner s = new Scanner(in); int[][] m = new int[n][2]; m[0][1] = this.k; s.next().trim(); }",
        );
        let all: Vec<_> = kinds(&ast);
        for k in ["ClassCreator", "ArrayCreator", "ArrayAccess", "FieldAccess", "ArrayType", "This"] {
            assert!(all.contains(&k), "{k}");
        }
    }
}
