use std::fmt;

use serde::{Deserialize, Serialize};

/// Embedded grammar definition. The kind table at its top is the
/// authoritative list that [`NodeKind::ALL`] mirrors.
pub const GRAMMAR: &str = include_str!("grammar.txt");

macro_rules! node_kinds {
    ($( $variant:ident => $leaf:expr ),+ $(,)?) => {
        /// One kind per grammar production of the Java subset.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum NodeKind {
            $( $variant ),+
        }

        impl NodeKind {
            pub const ALL: &'static [NodeKind] = &[ $( NodeKind::$variant ),+ ];

            pub fn name(self) -> &'static str {
                match self {
                    $( NodeKind::$variant => stringify!($variant) ),+
                }
            }

            pub fn is_leaf(self) -> bool {
                match self {
                    $( NodeKind::$variant => $leaf ),+
                }
            }
        }
    };
}

node_kinds! {
    CompilationUnit => false,
    ClassDeclaration => false,
    FieldDeclaration => false,
    MethodDeclaration => false,
    FormalParameter => false,
    MethodBody => false,
    Block => false,
    LocalVariableDeclaration => false,
    VariableDeclarator => false,
    StatementExpression => false,
    IfStatement => false,
    WhileStatement => false,
    ForStatement => false,
    ForInit => false,
    ForCondition => false,
    ForUpdate => false,
    ReturnStatement => false,
    BreakStatement => false,
    ContinueStatement => false,
    ArrayType => false,
    Assignment => false,
    BinaryOperation => false,
    PrefixOperation => false,
    PostfixOperation => false,
    MethodInvocation => false,
    FieldAccess => false,
    ArrayAccess => false,
    ClassCreator => false,
    ArrayCreator => false,
    Modifier => true,
    BasicType => true,
    ReferenceType => true,
    Name => true,
    Identifier => true,
    Member => true,
    Literal => true,
    Operator => true,
    This => true,
}

impl NodeKind {
    /// Dense index of this kind within [`NodeKind::ALL`].
    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<NodeKind> {
        NodeKind::ALL.iter().copied().find(|k| k.name() == name)
    }

    /// Structural kinds in declaration order; these receive vocabulary
    /// entries of their own.
    pub fn non_leaf() -> impl Iterator<Item = NodeKind> {
        NodeKind::ALL.iter().copied().filter(|k| !k.is_leaf())
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The kind table parsed out of [`GRAMMAR`].
pub fn grammar_kinds() -> Vec<(String, bool)> {
    GRAMMAR
        .lines()
        .filter_map(|line| {
            let mut parts = line.split_whitespace();
            if parts.next()? != "kind" {
                return None;
            }
            let name = parts.next()?.to_string();
            let leaf = parts.next()? == "leaf";
            Some((name, leaf))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enum_matches_grammar_file() {
        let table = grammar_kinds();
        assert_eq!(table.len(), NodeKind::ALL.len());
        for ((name, leaf), kind) in table.iter().zip(NodeKind::ALL) {
            assert_eq!(name, kind.name());
            assert_eq!(*leaf, kind.is_leaf(), "{name}");
        }
    }

    #[test]
    fn ids_are_dense() {
        for (i, k) in NodeKind::ALL.iter().enumerate() {
            assert_eq!(k.id(), i);
            assert_eq!(NodeKind::from_name(k.name()), Some(*k));
        }
        assert_eq!(NodeKind::non_leaf().count(), 29);
    }
}
