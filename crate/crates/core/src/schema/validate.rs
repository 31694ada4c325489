use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Node, Operator, SchemaTree};

/// Child indices from the root down to a node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodePath(pub Vec<usize>);

impl NodePath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn child(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        Self(v)
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("root")?;
        for i in &self.0 {
            write!(f, ".{i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    /// A composite with fewer than two children.
    Axiom1,
    /// A GUARD without exactly one inner and one outer child.
    GuardArity,
    /// A predicate expressed as a negation.
    NegatedPredicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub path: NodePath,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::Axiom1 => "composite needs at least two children",
            ViolationKind::GuardArity => "GUARD takes exactly two children (inner, outer)",
            ViolationKind::NegatedPredicate => "predicates must be stated positively",
        };
        write!(f, "{} at {}", what, self.path)
    }
}

/// Statically checkable structural rules. An empty report means the schema
/// is well formed.
pub fn validate_axioms(schema: &SchemaTree) -> Vec<Violation> {
    let mut out = Vec::new();
    walk(&schema.root, NodePath::root(), &mut out);
    out
}

fn walk(node: &Node, path: NodePath, out: &mut Vec<Violation>) {
    match node {
        Node::Primitive(p) => {
            if p.predicate.name.starts_with("not_") {
                out.push(Violation {
                    kind: ViolationKind::NegatedPredicate,
                    path,
                });
            }
        }
        Node::Composite(c) => {
            if c.children.len() < 2 {
                out.push(Violation {
                    kind: ViolationKind::Axiom1,
                    path: path.clone(),
                });
            } else if c.op == Operator::Guard && c.children.len() != 2 {
                out.push(Violation {
                    kind: ViolationKind::GuardArity,
                    path: path.clone(),
                });
            }
            for (i, child) in c.children.iter().enumerate() {
                walk(child, path.child(i), out);
            }
        }
    }
}
