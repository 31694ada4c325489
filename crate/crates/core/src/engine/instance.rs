use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate, LeafSlot, Propagation};
use super::{EngineError, OperatorParams};
use crate::model::Interval;
use crate::schema::{
    CompositeNode, Node, NodePath, Operator, ParamValue, PredicateRef, PrimitiveNode, SchemaTree,
};

pub const INSTANCE_FORMAT: &str = "elt_instance_v1";

/// A primitive bound to an interval with its coherence degree.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveInstance {
    pub node: PrimitiveNode,
    pub interval: Interval,
    pub mu: f64,
}

/// A composite whose interval and confidence derive from its children.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeInstance {
    pub op: Operator,
    pub children: Vec<Instance>,
    pub interval: Interval,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Primitive(PrimitiveInstance),
    Composite(CompositeInstance),
}

impl Instance {
    pub fn primitive(node: PrimitiveNode, interval: Interval, mu: f64) -> Instance {
        Instance::Primitive(PrimitiveInstance { node, interval, mu })
    }

    /// Shorthand for tests and fixtures.
    pub fn leaf(channel: &str, predicate: &str, interval: Interval, mu: f64) -> Instance {
        Instance::primitive(
            PrimitiveNode {
                predicate: PredicateRef::new(predicate),
                channel: channel.to_string(),
            },
            interval,
            mu,
        )
    }

    /// Builds a composite, deriving its span and confidence from the
    /// children with the n-ary operator fold.
    pub fn composite(
        op: Operator,
        children: Vec<Instance>,
        params: &OperatorParams,
    ) -> Result<Instance, EngineError> {
        let schema = Node::composite(op, children.iter().map(Instance::schema_node).collect());
        let slots: Vec<LeafSlot> = children
            .iter()
            .flat_map(|c| c.leaf_slots())
            .map(Some)
            .collect();
        let prop = evaluate(&schema, &slots, params)?;
        Ok(prop.into_instance(&schema))
    }

    pub fn mu(&self) -> f64 {
        match self {
            Instance::Primitive(p) => p.mu,
            Instance::Composite(c) => c.mu,
        }
    }

    pub fn interval(&self) -> Interval {
        match self {
            Instance::Primitive(p) => p.interval,
            Instance::Composite(c) => c.interval,
        }
    }

    /// The schema node this instance instantiates.
    pub fn schema_node(&self) -> Node {
        match self {
            Instance::Primitive(p) => Node::Primitive(p.node.clone()),
            Instance::Composite(c) => Node::Composite(CompositeNode {
                op: c.op,
                children: c.children.iter().map(Instance::schema_node).collect(),
            }),
        }
    }

    /// `(interval, mu)` of every primitive leaf, left to right.
    pub fn leaf_slots(&self) -> Vec<(Interval, f64)> {
        let mut out = Vec::new();
        self.collect_slots(&mut out);
        out
    }

    fn collect_slots(&self, out: &mut Vec<(Interval, f64)>) {
        match self {
            Instance::Primitive(p) => out.push((p.interval, p.mu)),
            Instance::Composite(c) => c.children.iter().for_each(|ch| ch.collect_slots(out)),
        }
    }
}

/// Primitive instances that can collide on behalf of `inst`. Under an OR
/// only the branch with the highest confidence counts (earliest on ties).
pub fn primitive_descendants(inst: &Instance) -> Vec<&PrimitiveInstance> {
    let mut out = Vec::new();
    collect_descendants(inst, &mut out);
    out
}

fn collect_descendants<'a>(inst: &'a Instance, out: &mut Vec<&'a PrimitiveInstance>) {
    match inst {
        Instance::Primitive(p) => out.push(p),
        Instance::Composite(c) if c.op == Operator::Or => {
            if let Some(best) = argmax_child(&c.children) {
                collect_descendants(best, out);
            }
        }
        Instance::Composite(c) => c
            .children
            .iter()
            .for_each(|ch| collect_descendants(ch, out)),
    }
}

fn argmax_child(children: &[Instance]) -> Option<&Instance> {
    let mut best: Option<&Instance> = None;
    for c in children {
        if best.is_none_or(|b| c.mu() > b.mu()) {
            best = Some(c);
        }
    }
    best
}

/// A schema together with a full instantiation and the parameters used to
/// score it.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTree {
    pub schema: SchemaTree,
    pub root: Instance,
    pub params: OperatorParams,
}

impl InstanceTree {
    /// Builds the tree from one `(interval, mu)` per schema leaf.
    pub fn from_leaves(
        schema: SchemaTree,
        leaves: &[(Interval, f64)],
        params: OperatorParams,
    ) -> Result<Self, EngineError> {
        let slots: Vec<LeafSlot> = leaves.iter().copied().map(Some).collect();
        let prop = evaluate(&schema.root, &slots, &params)?;
        let root = prop.into_instance(&schema.root);
        Ok(Self {
            schema,
            root,
            params,
        })
    }

    /// Recomputes every composite from the leaves and reports per-node
    /// scores. Fails if the instance tree is not isomorphic to the schema.
    pub fn propagate(&self) -> Result<Propagation, EngineError> {
        check_shape(&self.schema.root, &self.root, NodePath::root())?;
        let slots: Vec<LeafSlot> = self.root.leaf_slots().into_iter().map(Some).collect();
        evaluate(&self.schema.root, &slots, &self.params)
    }

    pub fn root_score(&self) -> f64 {
        self.root.mu()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.to_doc()).expect("instance documents serialize")
    }

    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc {
            format: INSTANCE_FORMAT.to_string(),
            event_type: self.schema.event_type.clone(),
            params: self.params,
            root: NodeDoc::from_instance(&self.root),
        }
    }

    pub fn from_doc(doc: InstanceDoc) -> Result<Self, EngineError> {
        if doc.format != INSTANCE_FORMAT {
            return Err(EngineError::Document(format!(
                "expected format {INSTANCE_FORMAT}, got {}",
                doc.format
            )));
        }
        doc.params.validate()?;
        let root = doc.root.into_instance();
        let schema = SchemaTree::new(doc.event_type, root.schema_node());
        Ok(Self {
            schema,
            root,
            params: doc.params,
        })
    }
}

fn check_shape(node: &Node, inst: &Instance, path: NodePath) -> Result<(), EngineError> {
    match (node, inst) {
        (Node::Primitive(n), Instance::Primitive(p)) if *n == p.node => Ok(()),
        (Node::Composite(n), Instance::Composite(c))
            if n.op == c.op && n.children.len() == c.children.len() =>
        {
            for (i, (cn, ci)) in n.children.iter().zip(&c.children).enumerate() {
                check_shape(cn, ci, path.child(i))?;
            }
            Ok(())
        }
        _ => Err(EngineError::ShapeMismatch(path)),
    }
}

/// Serialized form of an instantiated tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub format: String,
    pub event_type: String,
    pub params: OperatorParams,
    pub root: NodeDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeDoc {
    Composite {
        op: Operator,
        interval: Interval,
        mu: f64,
        children: Vec<NodeDoc>,
    },
    Primitive {
        predicate: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        params: BTreeMap<String, ParamValue>,
        channel: String,
        interval: Interval,
        mu: f64,
    },
}

impl NodeDoc {
    fn from_instance(inst: &Instance) -> NodeDoc {
        match inst {
            Instance::Primitive(p) => NodeDoc::Primitive {
                predicate: p.node.predicate.name.clone(),
                params: p.node.predicate.params.clone(),
                channel: p.node.channel.clone(),
                interval: p.interval,
                mu: p.mu,
            },
            Instance::Composite(c) => NodeDoc::Composite {
                op: c.op,
                interval: c.interval,
                mu: c.mu,
                children: c.children.iter().map(NodeDoc::from_instance).collect(),
            },
        }
    }

    fn into_instance(self) -> Instance {
        match self {
            NodeDoc::Primitive {
                predicate,
                params,
                channel,
                interval,
                mu,
            } => Instance::primitive(
                PrimitiveNode {
                    predicate: PredicateRef {
                        name: predicate,
                        params,
                    },
                    channel,
                },
                interval,
                mu,
            ),
            NodeDoc::Composite {
                op,
                interval,
                mu,
                children,
            } => Instance::Composite(CompositeInstance {
                op,
                children: children.into_iter().map(NodeDoc::into_instance).collect(),
                interval,
                mu,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: usize, b: usize) -> Interval {
        Interval::of(a, b)
    }

    #[test]
    fn descendants_of_primitive_is_itself() {
        let p = Instance::leaf("A", "rise", iv(0, 5), 0.5);
        let d = primitive_descendants(&p);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].interval, iv(0, 5));
    }

    #[test]
    fn descendants_of_seq_and_or() {
        let params = OperatorParams::for_length(100);
        let seq = Instance::composite(
            Operator::Seq,
            vec![
                Instance::leaf("A", "rise", iv(0, 5), 0.5),
                Instance::leaf("B", "fall", iv(5, 9), 0.5),
            ],
            &params,
        )
        .unwrap();
        assert_eq!(primitive_descendants(&seq).len(), 2);

        let or = Instance::composite(
            Operator::Or,
            vec![
                Instance::leaf("A", "rise", iv(0, 5), 0.9),
                Instance::leaf("B", "fall", iv(0, 5), 0.2),
            ],
            &params,
        )
        .unwrap();
        let d = primitive_descendants(&or);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].node.channel, "A");
        assert_eq!(d[0].mu, 0.9);
    }

    #[test]
    fn shape_mismatch_detected() {
        let params = OperatorParams::for_length(100);
        let schema = SchemaTree::new(
            "e",
            Node::composite(
                Operator::Sync,
                vec![Node::leaf("A", "rise"), Node::leaf("B", "fall")],
            ),
        );
        let mut tree =
            InstanceTree::from_leaves(schema, &[(iv(0, 5), 0.5), (iv(0, 5), 0.5)], params).unwrap();
        assert!(tree.propagate().is_ok());
        if let Instance::Composite(c) = &mut tree.root {
            c.op = Operator::Seq;
        }
        assert_eq!(
            tree.propagate().unwrap_err(),
            EngineError::ShapeMismatch(NodePath::root())
        );
    }

    #[test]
    fn json_round_trip() {
        let params = OperatorParams::for_length(200);
        let schema = SchemaTree::new(
            "e",
            Node::composite(
                Operator::Seq,
                vec![
                    Node::prim("A", PredicateRef::new("rise").with_param("slope", 0.4)),
                    Node::leaf("B", "fall"),
                ],
            ),
        );
        let tree =
            InstanceTree::from_leaves(schema, &[(iv(0, 10), 0.9), (iv(12, 20), 0.8)], params)
                .unwrap();
        let text = serde_json::to_string(&tree.to_doc()).unwrap();
        assert!(text.starts_with(r#"{"format":"elt_instance_v1""#));
        let back = InstanceTree::from_doc(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, tree);
    }
}
