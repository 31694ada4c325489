//! Event schemas: trees of morphological primitives joined by temporal
//! operators, plus the text format they are written in.

mod parser;
mod render;
mod validate;

pub use parser::{parse_schema, parse_schema_bytes, parse_schema_with};
pub use render::{render_catalog, render_schema};
pub use validate::{validate_axioms, NodePath, Violation, ViolationKind};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("syntax error at {line}:{col}: expected {expected}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
    },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("duplicate event type `{0}`")]
    DuplicateEventType(String),
    #[error("bad parameter `{name}` for predicate `{predicate}`")]
    BadParameter { predicate: String, name: String },
    #[error("event `{event}` violates axioms: {}", fmt_violations(.violations))]
    AxiomViolation {
        event: String,
        violations: Vec<Violation>,
    },
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Temporal-logic operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "SEQ")]
    Seq,
    #[serde(rename = "SYNC")]
    Sync,
    #[serde(rename = "GUARD")]
    Guard,
    #[serde(rename = "OR")]
    Or,
}

impl Operator {
    pub const ALL: [Operator; 4] = [Operator::Seq, Operator::Sync, Operator::Guard, Operator::Or];

    pub fn keyword(self) -> &'static str {
        match self {
            Operator::Seq => "SEQ",
            Operator::Sync => "SYNC",
            Operator::Guard => "GUARD",
            Operator::Or => "OR",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.keyword() == s)
    }

    /// SEQ, SYNC and GUARD are conjunctive; OR is not.
    pub fn is_conjunctive(self) -> bool {
        !matches!(self, Operator::Or)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Ident(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::Ident(s) => f.write_str(s),
        }
    }
}

/// A predicate name with optional named parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateRef {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, ParamValue>,
}

impl PredicateRef {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, name: impl Into<String>, value: f64) -> Self {
        self.params.insert(name.into(), ParamValue::Number(value));
        self
    }
}

/// Leaf: one predicate bound to one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveNode {
    pub predicate: PredicateRef,
    pub channel: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeNode {
    pub op: Operator,
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Primitive(PrimitiveNode),
    Composite(CompositeNode),
}

impl Node {
    pub fn prim(channel: impl Into<String>, predicate: PredicateRef) -> Node {
        Node::Primitive(PrimitiveNode {
            predicate,
            channel: channel.into(),
        })
    }

    /// Shorthand for a primitive with a parameterless predicate.
    pub fn leaf(channel: impl Into<String>, predicate: &str) -> Node {
        Node::prim(channel, PredicateRef::new(predicate))
    }

    pub fn composite(op: Operator, children: Vec<Node>) -> Node {
        Node::Composite(CompositeNode { op, children })
    }

    /// Primitive leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&PrimitiveNode> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a PrimitiveNode>) {
        match self {
            Node::Primitive(p) => out.push(p),
            Node::Composite(c) => c.children.iter().for_each(|n| n.collect_leaves(out)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Primitive(_) => 1,
            Node::Composite(c) => 1 + c.children.iter().map(Node::depth).max().unwrap_or(0),
        }
    }
}

/// A schema for one event type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaTree {
    pub event_type: String,
    pub root: Node,
}

impl SchemaTree {
    pub fn new(event_type: impl Into<String>, root: Node) -> Self {
        Self {
            event_type: event_type.into(),
            root,
        }
    }

    /// Channels referenced by any primitive.
    pub fn declared_channels(&self) -> BTreeSet<&str> {
        self.root
            .leaves()
            .into_iter()
            .map(|p| p.channel.as_str())
            .collect()
    }

    pub fn leaves(&self) -> Vec<&PrimitiveNode> {
        self.root.leaves()
    }
}

/// Schemas keyed by event type, in source order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventCatalog {
    schemas: Vec<SchemaTree>,
}

impl EventCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, schema: SchemaTree) -> Result<(), SchemaError> {
        if self.get(&schema.event_type).is_some() {
            return Err(SchemaError::DuplicateEventType(schema.event_type));
        }
        self.schemas.push(schema);
        Ok(())
    }

    pub fn get(&self, event_type: &str) -> Option<&SchemaTree> {
        self.schemas.iter().find(|s| s.event_type == event_type)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SchemaTree> {
        self.schemas.iter()
    }

    pub fn event_types(&self) -> Vec<&str> {
        self.schemas.iter().map(|s| s.event_type.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }

    pub fn declared_channels(&self) -> BTreeSet<&str> {
        self.schemas
            .iter()
            .flat_map(|s| s.declared_channels())
            .collect()
    }
}

impl FromIterator<SchemaTree> for Result<EventCatalog, SchemaError> {
    fn from_iter<I: IntoIterator<Item = SchemaTree>>(iter: I) -> Self {
        let mut cat = EventCatalog::new();
        for s in iter {
            cat.insert(s)?;
        }
        Ok(cat)
    }
}
