//! Synthetic S-ASTs and graphs for property checks and the self-check suite.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::frontend::NodeKind;
use crate::sast::{Edge, EdgeKind, GraphInput, SAst, SAstNode};

/// Shape parameters for [`statement_sast`].
#[derive(Debug, Clone)]
pub struct SynthSpec {
    /// Node count of each statement subtree, subtoken children included.
    pub statement_sizes: Vec<usize>,
    /// Number of distinct variable names drawn from for leaves.
    pub variables: usize,
    /// Probability that a leaf is a variable occurrence.
    pub variable_rate: f64,
    pub vocab_size: u32,
}

#[derive(Clone)]
struct Proto {
    kind: Proto_,
    children: Vec<usize>,
    variable: Option<String>,
    vocab_id: u32,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Proto_ {
    Structural,
    Leaf,
    Subtoken,
}

/// Random method-shaped S-AST: a declaration root, one body node and one
/// subtree per entry of `statement_sizes`, with `NextLeaf` and `DataFlow`
/// edges derived the same way the builder derives them.
pub fn statement_sast<R: Rng>(rng: &mut R, spec: &SynthSpec) -> SAst {
    let names: Vec<String> = (0..spec.variables.max(1)).map(|i| format!("v{i}")).collect();
    let mut protos = vec![
        Proto {
            kind: Proto_::Structural,
            children: vec![1],
            variable: None,
            vocab_id: 0,
        },
        Proto {
            kind: Proto_::Structural,
            children: Vec::new(),
            variable: None,
            vocab_id: 1,
        },
    ];
    for &size in &spec.statement_sizes {
        let size = size.max(1);
        let root = protos.len();
        protos[1].children.push(root);
        protos.push(Proto {
            kind: Proto_::Structural,
            children: Vec::new(),
            variable: None,
            vocab_id: rng.random_range(0..spec.vocab_size),
        });
        let mut structural = vec![root];
        let mut leaves: Vec<usize> = Vec::new();
        for _ in 1..size {
            let id = protos.len();
            let roll: f64 = rng.random();
            let (kind, parent) = if roll < 0.15 && !leaves.is_empty() {
                (Proto_::Subtoken, *leaves.choose(rng).unwrap())
            } else {
                let parent = *structural.choose(rng).unwrap();
                if roll < 0.45 {
                    (Proto_::Structural, parent)
                } else {
                    (Proto_::Leaf, parent)
                }
            };
            let variable = (kind == Proto_::Leaf && rng.random_bool(spec.variable_rate))
                .then(|| names.choose(rng).unwrap().clone());
            protos.push(Proto {
                kind,
                children: Vec::new(),
                variable,
                vocab_id: rng.random_range(0..spec.vocab_size),
            });
            protos[parent].children.push(id);
            match kind {
                Proto_::Structural => structural.push(id),
                Proto_::Leaf => leaves.push(id),
                Proto_::Subtoken => {}
            }
        }
    }

    // Renumber in pre-order.
    let mut order = Vec::with_capacity(protos.len());
    let mut stack = vec![0usize];
    while let Some(p) = stack.pop() {
        order.push(p);
        stack.extend(protos[p].children.iter().rev());
    }
    let mut new_id = vec![0; protos.len()];
    for (i, &p) in order.iter().enumerate() {
        new_id[p] = i;
    }

    let mut nodes = Vec::with_capacity(order.len());
    let mut edges = Vec::new();
    for (i, &p) in order.iter().enumerate() {
        let proto = &protos[p];
        let kind = match (i, proto.kind) {
            (0, _) => NodeKind::MethodDeclaration,
            (1, _) => NodeKind::MethodBody,
            (_, Proto_::Structural) => NodeKind::Block,
            (_, _) if proto.variable.is_some() => NodeKind::Identifier,
            _ => NodeKind::Literal,
        };
        nodes.push(SAstNode {
            id: i,
            vocab_id: proto.vocab_id,
            label: proto.variable.clone().unwrap_or_else(|| format!("t{}", proto.vocab_id)),
            kind,
            ast_id: None,
            is_original_leaf: proto.kind == Proto_::Leaf,
            is_subtoken_child: proto.kind == Proto_::Subtoken,
            variable_name: proto.variable.clone(),
        });
        for &c in &proto.children {
            let kind = if protos[c].kind == Proto_::Subtoken {
                EdgeKind::Subtoken
            } else {
                EdgeKind::AstChild
            };
            edges.push(Edge::new(i, new_id[c], kind));
        }
    }

    let leaves: Vec<usize> = nodes.iter().filter(|n| n.is_original_leaf).map(|n| n.id).collect();
    for w in leaves.windows(2) {
        edges.push(Edge::new(w[0], w[1], EdgeKind::NextLeaf));
    }
    for name in &names {
        let occ: Vec<usize> = leaves
            .iter()
            .copied()
            .filter(|&l| nodes[l].variable_name.as_ref() == Some(name))
            .collect();
        for w in occ.windows(2) {
            edges.push(Edge::new(w[0], w[1], EdgeKind::DataFlow));
        }
    }

    SAst::from_parts(nodes, edges, 0, Some(1)).expect("synthetic S-AST is well formed")
}

/// Random multigraph with typed directed edges, for GNN property checks.
pub fn random_graph<R: Rng>(rng: &mut R, nodes: usize, edges: usize, vocab_size: u32) -> GraphInput {
    let vocab_ids = (0..nodes).map(|_| rng.random_range(0..vocab_size)).collect();
    let edges = if nodes < 2 {
        Vec::new()
    } else {
        (0..edges)
            .map(|_| {
                let src = rng.random_range(0..nodes);
                let mut dst = rng.random_range(0..nodes - 1);
                if dst >= src {
                    dst += 1;
                }
                Edge::new(src, dst, EdgeKind::ALL[rng.random_range(0..4)])
            })
            .collect()
    };
    GraphInput { vocab_ids, edges }
}

/// Relabel the nodes of a graph: node `i` becomes `perm[i]`.
pub fn permute_graph(graph: &GraphInput, perm: &[usize]) -> GraphInput {
    let mut vocab_ids = vec![0; graph.len()];
    for (i, &p) in perm.iter().enumerate() {
        vocab_ids[p] = graph.vocab_ids[i];
    }
    GraphInput {
        vocab_ids,
        edges: graph
            .edges
            .iter()
            .map(|e| Edge::new(perm[e.src], perm[e.dst], e.kind))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn statement_sizes_are_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = SynthSpec {
            statement_sizes: vec![1, 7, 30, 4],
            variables: 3,
            variable_rate: 0.6,
            vocab_size: 50,
        };
        let s = statement_sast(&mut rng, &spec);
        let children = s.tree_children();
        let sizes: Vec<usize> = children[1]
            .iter()
            .map(|&st| {
                let mut count = 0;
                let mut stack = vec![st];
                while let Some(v) = stack.pop() {
                    count += 1;
                    stack.extend(&children[v]);
                }
                count
            })
            .collect();
        assert_eq!(sizes, spec.statement_sizes);
        assert_eq!(s.len(), 2 + 42);
    }
}
