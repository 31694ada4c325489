//! Recursive confidence propagation with n-ary operator folds.
//!
//! Leaves may be left unassigned. An unassigned leaf behaves as a wildcard
//! with `mu = 1`, and every factor whose inputs are not yet fully known is
//! taken as 1. Since each factor lies in `[0, 1]`, the resulting score is
//! an upper bound on every completion of the partial assignment.

use serde::Serialize;

use super::instance::{CompositeInstance, Instance};
use super::ops::{guard_penalty, prob_sum, seq_gates, sync_penalty};
use super::{EngineError, OperatorParams};
use crate::model::{interval_intersection_length, Interval};
use crate::schema::{Node, NodePath, Operator};

/// `(interval, mu)` for one primitive leaf, or `None` for a wildcard.
pub type LeafSlot = Option<(Interval, f64)>;

/// Score annotation for one schema node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeScore {
    pub path: NodePath,
    /// `None` while any leaf beneath the node is unassigned.
    pub interval: Option<Interval>,
    pub mu: f64,
}

/// Per-node scores in pre-order (root first).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Propagation {
    pub nodes: Vec<NodeScore>,
}

impl Propagation {
    pub fn root_score(&self) -> f64 {
        self.nodes[0].mu
    }

    pub fn root_interval(&self) -> Option<Interval> {
        self.nodes[0].interval
    }

    pub fn is_complete(&self) -> bool {
        self.nodes.iter().all(|n| n.interval.is_some())
    }

    pub fn get(&self, path: &NodePath) -> Option<&NodeScore> {
        self.nodes.iter().find(|n| &n.path == path)
    }

    /// Materializes the instance tree.
    ///
    /// # Panics
    /// If some leaf was left unassigned or `schema` is not the node this
    /// propagation was computed from.
    pub fn into_instance(self, schema: &Node) -> Instance {
        let mut it = self.nodes.into_iter();
        let inst = build(schema, &mut it);
        assert!(it.next().is_none(), "propagation does not match schema");
        inst
    }
}

fn build(node: &Node, it: &mut impl Iterator<Item = NodeScore>) -> Instance {
    let score = it.next().expect("propagation does not match schema");
    let interval = score
        .interval
        .expect("cannot materialize a partial assignment");
    match node {
        Node::Primitive(p) => Instance::primitive(p.clone(), interval, score.mu),
        Node::Composite(c) => Instance::Composite(CompositeInstance {
            op: c.op,
            children: c.children.iter().map(|ch| build(ch, it)).collect(),
            interval,
            mu: score.mu,
        }),
    }
}

/// Scores `node` under the leaf assignment `slots` (one per leaf, left to
/// right) and annotates every node.
pub fn evaluate(
    node: &Node,
    slots: &[LeafSlot],
    params: &OperatorParams,
) -> Result<Propagation, EngineError> {
    let mut nodes = Vec::new();
    let mut walker = Walker {
        slots,
        next: 0,
        params,
        caps: None,
        path: Vec::new(),
        sink: Some(&mut nodes),
    };
    walker.visit(node)?;
    walker.finish()?;
    Ok(Propagation { nodes })
}

/// Root score only; skips the per-node annotations.
pub fn evaluate_root(
    node: &Node,
    slots: &[LeafSlot],
    params: &OperatorParams,
) -> Result<f64, EngineError> {
    let mut walker = Walker {
        slots,
        next: 0,
        params,
        caps: None,
        path: Vec::new(),
        sink: None,
    };
    let s = walker.visit(node)?;
    walker.finish()?;
    Ok(s.mu)
}

/// Like [`evaluate_root`], but a wildcard at leaf `i` takes `mu = caps[i]`
/// instead of 1. With `caps[i]` at least the best attainable degree of
/// leaf `i`, the result is still an upper bound on every completion, and a
/// tighter one.
pub fn evaluate_root_capped(
    node: &Node,
    slots: &[LeafSlot],
    caps: &[f64],
    params: &OperatorParams,
) -> Result<f64, EngineError> {
    if caps.len() != slots.len() {
        return Err(EngineError::ShapeMismatch(NodePath::root()));
    }
    let mut walker = Walker {
        slots,
        next: 0,
        params,
        caps: Some(caps),
        path: Vec::new(),
        sink: None,
    };
    let s = walker.visit(node)?;
    walker.finish()?;
    Ok(s.mu)
}

struct Summary<'a> {
    interval: Option<Interval>,
    mu: f64,
    /// Primitives certain to belong to the collision set of this node.
    prims: Vec<(&'a str, Interval)>,
}

struct Walker<'s, 'p> {
    slots: &'s [LeafSlot],
    next: usize,
    params: &'p OperatorParams,
    caps: Option<&'s [f64]>,
    path: Vec<usize>,
    sink: Option<&'p mut Vec<NodeScore>>,
}

impl Walker<'_, '_> {
    fn finish(&self) -> Result<(), EngineError> {
        if self.next == self.slots.len() {
            Ok(())
        } else {
            Err(EngineError::ShapeMismatch(NodePath::root()))
        }
    }

    fn record(&mut self, interval: Option<Interval>, mu: f64) -> Option<usize> {
        let sink = self.sink.as_mut()?;
        sink.push(NodeScore {
            path: NodePath(self.path.clone()),
            interval,
            mu,
        });
        Some(sink.len() - 1)
    }

    fn visit<'a>(&mut self, node: &'a Node) -> Result<Summary<'a>, EngineError> {
        match node {
            Node::Primitive(p) => {
                let index = self.next;
                let slot = *self
                    .slots
                    .get(index)
                    .ok_or(EngineError::Unassigned { index })?;
                self.next += 1;
                let summary = match slot {
                    Some((iv, mu)) => Summary {
                        interval: Some(iv),
                        mu,
                        prims: vec![(p.channel.as_str(), iv)],
                    },
                    None => Summary {
                        interval: None,
                        mu: self.caps.map_or(1.0, |c| c[index]),
                        prims: Vec::new(),
                    },
                };
                self.record(summary.interval, summary.mu);
                Ok(summary)
            }
            Node::Composite(c) => {
                if c.op == Operator::Guard && c.children.len() != 2 {
                    return Err(EngineError::GuardArity(NodePath(self.path.clone())));
                }
                let slot = self.record(None, 0.0);
                let mut children = Vec::with_capacity(c.children.len());
                for (i, ch) in c.children.iter().enumerate() {
                    self.path.push(i);
                    let s = self.visit(ch);
                    self.path.pop();
                    children.push(s?);
                }
                let summary = combine(c.op, children, self.params);
                if let (Some(i), Some(sink)) = (slot, self.sink.as_mut()) {
                    sink[i].interval = summary.interval;
                    sink[i].mu = summary.mu;
                }
                Ok(summary)
            }
        }
    }
}

fn combine<'a>(op: Operator, children: Vec<Summary<'a>>, params: &OperatorParams) -> Summary<'a> {
    let complete = children.iter().all(|c| c.interval.is_some());
    let interval = if complete {
        children
            .iter()
            .filter_map(|c| c.interval)
            .reduce(|a, b| a.hull(&b))
    } else {
        None
    };

    let mu = match op {
        Operator::Or => {
            let mut acc = children[0].mu;
            for c in &children[1..] {
                acc = prob_sum(acc, c.mu);
            }
            for_known_pairs(&children, |a, b| {
                acc *= sync_penalty(a, b, params.kappa);
            });
            acc
        }
        _ => {
            let mut m = children[0].mu;
            for c in &children[1..] {
                m *= c.mu;
            }
            m *= if any_collision(&children, params.epsilon) {
                0.0
            } else {
                1.0
            };
            match op {
                Operator::Seq => {
                    for w in children.windows(2) {
                        if let (Some(a), Some(b)) = (w[0].interval, w[1].interval) {
                            m *= seq_gates(a, b, params.delta);
                        }
                    }
                }
                Operator::Sync => for_known_pairs(&children, |a, b| {
                    m *= sync_penalty(a, b, params.kappa);
                }),
                Operator::Guard => {
                    if let (Some(a), Some(b)) = (children[0].interval, children[1].interval) {
                        m *= guard_penalty(a, b, params.sigma);
                    }
                }
                Operator::Or => unreachable!(),
            }
            if complete && exceeds_gap(&children, params.compactness_tolerance) {
                m *= 0.0;
            }
            m
        }
    };

    let prims = match op {
        Operator::Or if complete => {
            let mut best = 0;
            for (i, c) in children.iter().enumerate().skip(1) {
                if c.mu > children[best].mu {
                    best = i;
                }
            }
            children
                .into_iter()
                .nth(best)
                .map(|c| c.prims)
                .unwrap_or_default()
        }
        Operator::Or => Vec::new(),
        _ => children.into_iter().flat_map(|c| c.prims).collect(),
    };

    Summary {
        interval,
        mu,
        prims,
    }
}

fn for_known_pairs(children: &[Summary<'_>], mut f: impl FnMut(Interval, Interval)) {
    for (i, a) in children.iter().enumerate() {
        for b in &children[i + 1..] {
            if let (Some(x), Some(y)) = (a.interval, b.interval) {
                f(x, y);
            }
        }
    }
}

fn any_collision(children: &[Summary<'_>], epsilon: usize) -> bool {
    children.iter().enumerate().any(|(i, a)| {
        children[i + 1..].iter().any(|b| {
            a.prims.iter().any(|(ca, ia)| {
                b.prims
                    .iter()
                    .any(|(cb, ib)| ca == cb && interval_intersection_length(ia, ib) > epsilon)
            })
        })
    })
}

/// True when the children's intervals, merged, leave an uncovered stretch
/// longer than `tolerance` inside their span.
fn exceeds_gap(children: &[Summary<'_>], tolerance: usize) -> bool {
    let mut ivs: Vec<Interval> = children.iter().filter_map(|c| c.interval).collect();
    ivs.sort_by_key(|iv| (iv.t_on(), iv.t_off()));
    let mut reach = ivs[0].t_off();
    for iv in &ivs[1..] {
        if iv.t_on() > reach && iv.t_on() - reach > tolerance {
            return true;
        }
        reach = reach.max(iv.t_off());
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{score_guard, score_or, score_seq, score_sync, InstanceTree};
    use crate::schema::SchemaTree;
    use proptest::prelude::*;

    fn iv(a: usize, b: usize) -> Interval {
        Interval::of(a, b)
    }

    fn params() -> OperatorParams {
        OperatorParams {
            delta: 5,
            kappa: 0.25,
            sigma: 4.0,
            epsilon: 1,
            compactness_tolerance: 5,
        }
    }

    fn three(op: Operator, ch: [&str; 3]) -> Node {
        Node::composite(op, ch.iter().map(|c| Node::leaf(*c, "rise")).collect())
    }

    #[test]
    fn seq_fold_of_three() {
        let node = three(Operator::Seq, ["A", "B", "C"]);
        let slots = [
            Some((iv(0, 10), 0.9)),
            Some((iv(12, 20), 0.9)),
            Some((iv(22, 30), 0.9)),
        ];
        let p = evaluate(&node, &slots, &params()).unwrap();
        assert!((p.root_score() - 0.729).abs() < 1e-12);
        assert_eq!(p.root_interval(), Some(iv(0, 30)));

        // exhaustive pairwise check: every adjacent gate open, no shared channel
        let ivs = [iv(0, 10), iv(12, 20), iv(22, 30)];
        for w in ivs.windows(2) {
            assert_eq!(seq_gates(w[0], w[1], 5), 1.0);
        }
        // the non-adjacent pair would fail coherence but is not gated
        assert_eq!(seq_gates(ivs[0], ivs[2], 5), 0.0);
    }

    #[test]
    fn sync_same_channel_collides() {
        let node = Node::composite(
            Operator::Sync,
            vec![Node::leaf("A", "rise"), Node::leaf("A", "spike")],
        );
        let slots = [Some((iv(0, 10), 1.0)), Some((iv(0, 10), 1.0))];
        assert_eq!(evaluate_root(&node, &slots, &params()).unwrap(), 0.0);
    }

    #[test]
    fn collision_through_nesting() {
        let node = Node::composite(
            Operator::Seq,
            vec![
                Node::composite(
                    Operator::Sync,
                    vec![Node::leaf("A", "rise"), Node::leaf("B", "fall")],
                ),
                Node::leaf("A", "stable"),
            ],
        );
        let ok = [
            Some((iv(0, 10), 1.0)),
            Some((iv(0, 10), 1.0)),
            Some((iv(10, 20), 1.0)),
        ];
        assert_eq!(evaluate_root(&node, &ok, &params()).unwrap(), 1.0);
        let clash = [
            Some((iv(0, 12), 1.0)),
            Some((iv(0, 10), 1.0)),
            Some((iv(10, 20), 1.0)),
        ];
        assert_eq!(evaluate_root(&node, &clash, &params()).unwrap(), 0.0);
    }

    #[test]
    fn compactness_gap_zeroes() {
        let tol1 = OperatorParams {
            compactness_tolerance: 1,
            ..params()
        };
        let node = Node::composite(
            Operator::Sync,
            vec![Node::leaf("A", "rise"), Node::leaf("B", "fall")],
        );
        // disjoint spans [1,2] and [4,6] written half-open
        let slots = [Some((iv(1, 3), 1.0)), Some((iv(4, 7), 1.0))];
        assert!(evaluate_root(&node, &slots, &params()).unwrap() > 0.0);
        let slots = [Some((iv(1, 2), 1.0)), Some((iv(4, 6), 1.0))];
        assert_eq!(evaluate_root(&node, &slots, &tol1).unwrap(), 0.0);
        let slots = [Some((iv(1, 3), 1.0)), Some((iv(4, 6), 1.0))];
        assert!(evaluate_root(&node, &slots, &tol1).unwrap() > 0.0);
    }

    #[test]
    fn or_has_no_compactness_check() {
        let tol1 = OperatorParams {
            compactness_tolerance: 1,
            kappa: 100.0,
            ..params()
        };
        let node = Node::composite(
            Operator::Or,
            vec![Node::leaf("A", "rise"), Node::leaf("B", "fall")],
        );
        let slots = [Some((iv(0, 2), 0.5)), Some((iv(40, 60), 0.5))];
        assert!(evaluate_root(&node, &slots, &tol1).unwrap() > 0.7);
    }

    #[test]
    fn guard_arity_and_slot_count() {
        let node = three(Operator::Guard, ["A", "B", "C"]);
        let slots = [None, None, None];
        assert!(matches!(
            evaluate(&node, &slots, &params()),
            Err(EngineError::GuardArity(_))
        ));
        let node = three(Operator::Seq, ["A", "B", "C"]);
        assert_eq!(
            evaluate(&node, &[None, None], &params()).unwrap_err(),
            EngineError::Unassigned { index: 2 }
        );
        assert!(evaluate(&node, &[None, None, None, None], &params()).is_err());
    }

    #[test]
    fn wildcards_give_one() {
        let node = three(Operator::Sync, ["A", "B", "C"]);
        let p = evaluate(&node, &[None, None, None], &params()).unwrap();
        assert_eq!(p.root_score(), 1.0);
        assert!(!p.is_complete());
        assert_eq!(p.root_interval(), None);
    }

    #[test]
    fn annotations_in_preorder() {
        let node = Node::composite(
            Operator::Seq,
            vec![
                Node::composite(
                    Operator::Sync,
                    vec![Node::leaf("A", "rise"), Node::leaf("B", "fall")],
                ),
                Node::leaf("C", "stable"),
            ],
        );
        let slots = [
            Some((iv(0, 10), 0.5)),
            Some((iv(0, 10), 0.5)),
            Some((iv(10, 20), 0.8)),
        ];
        let p = evaluate(&node, &slots, &params()).unwrap();
        let paths: Vec<String> = p.nodes.iter().map(|n| n.path.to_string()).collect();
        assert_eq!(paths.len(), 5);
        assert_eq!(p.nodes[1].path, NodePath(vec![0]));
        assert_eq!(p.nodes[1].mu, 0.25);
        assert_eq!(p.get(&NodePath(vec![1])).unwrap().mu, 0.8);
        assert_eq!(p.root_score(), 0.25 * 0.8);
    }

    fn arb_slot() -> impl Strategy<Value = (Interval, f64)> {
        (0usize..50, 1usize..30, 0.0..=1.0f64).prop_map(|(a, l, m)| (iv(a, a + l), m))
    }

    fn arb_tree() -> impl Strategy<Value = Node> {
        let leaf = (0..3usize).prop_map(|c| Node::leaf(["A", "B", "C"][c], "rise"));
        leaf.prop_recursive(3, 8, 3, |inner| {
            (0..4usize, prop::collection::vec(inner, 2..4)).prop_map(|(o, mut ch)| {
                let op = Operator::ALL[o];
                if op == Operator::Guard {
                    ch.truncate(2);
                }
                Node::composite(op, ch)
            })
        })
    }

    type BinaryOp = fn(&Instance, &Instance, &OperatorParams) -> f64;

    proptest! {
        #[test]
        fn deterministic_and_bounded(node in arb_tree(), seed in prop::collection::vec(arb_slot(), 8)) {
            let n = node.leaves().len();
            let slots: Vec<LeafSlot> = seed.iter().cycle().take(n).copied().map(Some).collect();
            let a = evaluate(&node, &slots, &params()).unwrap();
            let b = evaluate(&node, &slots, &params()).unwrap();
            prop_assert_eq!(a.root_score().to_bits(), b.root_score().to_bits());
            prop_assert_eq!(evaluate_root(&node, &slots, &params()).unwrap().to_bits(), a.root_score().to_bits());
            for s in &a.nodes {
                prop_assert!((0.0..=1.0).contains(&s.mu));
            }
        }

        #[test]
        fn binding_a_wildcard_never_raises(
            node in arb_tree(),
            seed in prop::collection::vec(arb_slot(), 8),
            mask in prop::collection::vec(any::<bool>(), 8),
        ) {
            let n = node.leaves().len();
            let full: Vec<LeafSlot> = seed.iter().cycle().take(n).copied().map(Some).collect();
            let partial: Vec<LeafSlot> = full
                .iter()
                .zip(mask.iter().cycle())
                .map(|(s, m)| if *m { *s } else { None })
                .collect();
            let upper = evaluate_root(&node, &partial, &params()).unwrap();
            let exact = evaluate_root(&node, &full, &params()).unwrap();
            prop_assert!(exact <= upper, "{} > {}", exact, upper);
            // binding leaves one at a time is monotone too
            let mut cur = partial.clone();
            let mut prev = upper;
            for i in 0..n {
                if cur[i].is_none() {
                    cur[i] = full[i];
                    let s = evaluate_root(&node, &cur, &params()).unwrap();
                    prop_assert!(s <= prev);
                    prev = s;
                }
            }
        }

        #[test]
        fn binary_fold_matches_operators(a in arb_slot(), b in arb_slot(), ca in 0..2usize, cb in 0..2usize) {
            let p = OperatorParams { compactness_tolerance: 10_000, ..params() };
            let ch = ["A", "B"];
            let ia = Instance::leaf(ch[ca], "rise", a.0, a.1);
            let ib = Instance::leaf(ch[cb], "rise", b.0, b.1);
            let ops: [(Operator, BinaryOp); 4] = [
                (Operator::Seq, score_seq),
                (Operator::Sync, score_sync),
                (Operator::Guard, score_guard),
                (Operator::Or, score_or),
            ];
            for (op, f) in ops {
                let tree = InstanceTree::from_leaves(
                    SchemaTree::new("e", Node::composite(op, vec![ia.schema_node(), ib.schema_node()])),
                    &[a, b],
                    p,
                ).unwrap();
                prop_assert_eq!(tree.root_score().to_bits(), f(&ia, &ib, &p).to_bits());
            }
        }
    }
}
