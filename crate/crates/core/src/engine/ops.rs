//! Binary operator formulas.

use super::instance::{primitive_descendants, Instance};
use super::OperatorParams;
use crate::model::{interval_intersection_length, iou, Interval};

/// Channel-semantic collision: 1 when some primitive beneath `a` and some
/// primitive beneath `b` share a channel and overlap by more than
/// `epsilon` samples.
pub fn collision(a: &Instance, b: &Instance, params: &OperatorParams) -> u8 {
    let pa = primitive_descendants(a);
    let pb = primitive_descendants(b);
    let hit = pa.iter().any(|p| {
        pb.iter().any(|q| {
            p.node.channel == q.node.channel
                && interval_intersection_length(&p.interval, &q.interval) > params.epsilon
        })
    });
    u8::from(hit)
}

/// Causality and coherence gates of SEQ: `B` must start and end strictly
/// after `A`, and start less than `delta` samples after `A` ends.
pub fn seq_gates(a: Interval, b: Interval, delta: usize) -> f64 {
    let causal = b.t_on() > a.t_on() && b.t_off() > a.t_off();
    let coherent = (b.t_on() as i64 - a.t_off() as i64 - delta as i64) < 0;
    if causal && coherent {
        1.0
    } else {
        0.0
    }
}

/// `exp(-(1 - IoU) / kappa)`.
pub fn sync_penalty(a: Interval, b: Interval, kappa: f64) -> f64 {
    (-(1.0 - iou(&a, &b)) / kappa).exp()
}

/// `exp(-(spill_on + spill_off) / sigma)` for `inner` leaking out of `outer`.
pub fn guard_penalty(inner: Interval, outer: Interval, sigma: f64) -> f64 {
    let d_on = outer.t_on().saturating_sub(inner.t_on());
    let d_off = inner.t_off().saturating_sub(outer.t_off());
    (-((d_on + d_off) as f64) / sigma).exp()
}

fn exclusivity(a: &Instance, b: &Instance, params: &OperatorParams) -> f64 {
    1.0 - f64::from(collision(a, b, params))
}

/// B follows A.
pub fn score_seq(a: &Instance, b: &Instance, params: &OperatorParams) -> f64 {
    (a.mu() * b.mu())
        * exclusivity(a, b, params)
        * seq_gates(a.interval(), b.interval(), params.delta)
}

/// A and B occupy the same interval.
pub fn score_sync(a: &Instance, b: &Instance, params: &OperatorParams) -> f64 {
    (a.mu() * b.mu())
        * exclusivity(a, b, params)
        * sync_penalty(a.interval(), b.interval(), params.kappa)
}

/// `inner` lies within `outer`.
pub fn score_guard(inner: &Instance, outer: &Instance, params: &OperatorParams) -> f64 {
    (inner.mu() * outer.mu())
        * exclusivity(inner, outer, params)
        * guard_penalty(inner.interval(), outer.interval(), params.sigma)
}

/// Either alternative, encouraged to share one interval. Carries no
/// exclusivity term.
pub fn score_or(a: &Instance, b: &Instance, params: &OperatorParams) -> f64 {
    prob_sum(a.mu(), b.mu()) * sync_penalty(a.interval(), b.interval(), params.kappa)
}

/// `a + b - a*b`, written so that rounding stays monotone and within `[0, 1]`.
pub(crate) fn prob_sum(a: f64, b: f64) -> f64 {
    1.0 - (1.0 - a) * (1.0 - b)
}

/// Which validity gate a temporal conjunction applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjunctionGate {
    Seq,
    Sync,
    Guard,
}

/// Generalized temporal conjunction: `(mu_A * mu_B) * K(A, B) * (1 - Psi)`.
/// Agrees exactly with the specialized operator for each gate.
pub fn score_and_k(
    a: &Instance,
    b: &Instance,
    gate: ConjunctionGate,
    params: &OperatorParams,
) -> f64 {
    let (ia, ib) = (a.interval(), b.interval());
    let k = match gate {
        ConjunctionGate::Seq => seq_gates(ia, ib, params.delta),
        ConjunctionGate::Sync => sync_penalty(ia, ib, params.kappa),
        ConjunctionGate::Guard => guard_penalty(ia, ib, params.sigma),
    };
    (a.mu() * b.mu()) * k * exclusivity(a, b, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{InstanceTree, OperatorParams};
    use crate::schema::{Node, Operator, SchemaTree};
    use proptest::prelude::*;

    fn iv(a: usize, b: usize) -> Interval {
        Interval::of(a, b)
    }

    fn params(delta: usize, kappa: f64, sigma: f64, epsilon: usize) -> OperatorParams {
        OperatorParams {
            delta,
            kappa,
            sigma,
            epsilon,
            compactness_tolerance: 1000,
        }
    }

    fn leaf(ch: &str, a: usize, b: usize, mu: f64) -> Instance {
        Instance::leaf(ch, "rise", iv(a, b), mu)
    }

    #[test]
    fn collision_respects_epsilon_and_channel() {
        let p = params(5, 0.25, 4.0, 2);
        assert_eq!(
            collision(&leaf("A", 0, 10, 1.0), &leaf("A", 9, 20, 1.0), &p),
            0
        );
        assert_eq!(
            collision(&leaf("A", 0, 10, 1.0), &leaf("A", 5, 20, 1.0), &p),
            1
        );
        assert_eq!(
            collision(&leaf("A", 0, 10, 1.0), &leaf("B", 0, 10, 1.0), &p),
            0
        );
    }

    #[test]
    fn seq_examples() {
        let p = params(5, 0.25, 4.0, 1);
        let a = leaf("A", 0, 10, 0.9);
        // independent evaluation: gap 12 - 10 - 5 = -3 < 0, gates open
        let expected = 0.9 * 0.8;
        assert_eq!(score_seq(&a, &leaf("B", 12, 20, 0.8), &p), expected);
        assert_eq!(score_seq(&a, &leaf("B", 2, 9, 0.8), &p), 0.0);
        assert_eq!(score_seq(&a, &leaf("B", 16, 20, 0.8), &p), 0.0);
        // simultaneous onsets close the causal gate
        assert_eq!(score_seq(&a, &leaf("B", 0, 15, 0.8), &p), 0.0);
    }

    #[test]
    fn sync_examples() {
        let p = params(5, 0.5, 4.0, 1);
        assert_eq!(
            score_sync(&leaf("A", 0, 10, 0.8), &leaf("B", 0, 10, 0.9), &p),
            0.8 * 0.9
        );
        let v = score_sync(&leaf("A", 0, 10, 0.8), &leaf("B", 5, 15, 0.9), &p);
        let oracle = 0.72 * (-(1.0 - 1.0 / 3.0) / 0.5f64).exp();
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 0.18979).abs() < 1e-5);
        assert_eq!(
            score_sync(&leaf("A", 0, 10, 0.8), &leaf("A", 0, 10, 0.9), &p),
            0.0
        );
    }

    #[test]
    fn guard_examples() {
        let p = params(5, 0.25, 4.0, 1);
        assert_eq!(
            score_guard(&leaf("A", 3, 7, 0.7), &leaf("B", 0, 10, 0.6), &p),
            0.7 * 0.6
        );
        let v = score_guard(&leaf("A", 0, 12, 1.0), &leaf("B", 0, 10, 1.0), &p);
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
        assert_eq!(
            score_guard(&leaf("A", 3, 7, 1.0), &leaf("A", 0, 10, 1.0), &p),
            0.0
        );
    }

    #[test]
    fn or_examples() {
        let p = params(5, 0.25, 4.0, 1);
        assert_eq!(
            score_or(&leaf("A", 0, 10, 1.0), &leaf("B", 0, 10, 0.3), &p),
            1.0
        );
        assert!((score_or(&leaf("A", 0, 10, 0.6), &leaf("B", 0, 10, 0.5), &p) - 0.8).abs() < 1e-15);
        assert_eq!(
            score_or(&leaf("A", 0, 10, 0.0), &leaf("B", 0, 10, 0.0), &p),
            0.0
        );
        // no exclusivity term: same channel still scores
        assert!(score_or(&leaf("A", 0, 10, 0.5), &leaf("A", 0, 10, 0.5), &p) > 0.0);
    }

    fn arb_leaf(ch: &'static [&'static str]) -> impl Strategy<Value = Instance> {
        (0..ch.len(), 0usize..60, 1usize..40, 0.0..=1.0f64)
            .prop_map(move |(c, on, len, mu)| leaf(ch[c], on, on + len, mu))
    }

    fn arb_params() -> impl Strategy<Value = OperatorParams> {
        (0usize..20, 0.05..2.0f64, 0.5..20.0f64, 0usize..4)
            .prop_map(|(d, k, s, e)| params(d, k, s, e))
    }

    const CH: &[&str] = &["A", "B"];

    type BinaryOp = fn(&Instance, &Instance, &OperatorParams) -> f64;

    proptest! {
        #[test]
        fn and_k_matches_specialized(a in arb_leaf(CH), b in arb_leaf(CH), p in arb_params()) {
            prop_assert_eq!(score_and_k(&a, &b, ConjunctionGate::Seq, &p).to_bits(), score_seq(&a, &b, &p).to_bits());
            prop_assert_eq!(score_and_k(&a, &b, ConjunctionGate::Sync, &p).to_bits(), score_sync(&a, &b, &p).to_bits());
            prop_assert_eq!(score_and_k(&a, &b, ConjunctionGate::Guard, &p).to_bits(), score_guard(&a, &b, &p).to_bits());
        }

        #[test]
        fn scores_in_unit_range(a in arb_leaf(CH), b in arb_leaf(CH), p in arb_params()) {
            for v in [score_seq(&a, &b, &p), score_sync(&a, &b, &p), score_guard(&a, &b, &p), score_or(&a, &b, &p)] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn collision_symmetric(a in arb_leaf(CH), b in arb_leaf(CH), p in arb_params()) {
            prop_assert_eq!(collision(&a, &b, &p), collision(&b, &a, &p));
        }

        #[test]
        fn monotone_in_child_mu(a in arb_leaf(CH), b in arb_leaf(CH), p in arb_params(), bump in 0.0..1.0f64) {
            let Instance::Primitive(mut pa) = a.clone() else { unreachable!() };
            pa.mu = (pa.mu + bump).min(1.0);
            let a2 = Instance::Primitive(pa);
            prop_assert!(score_seq(&a2, &b, &p) >= score_seq(&a, &b, &p));
            prop_assert!(score_sync(&a2, &b, &p) >= score_sync(&a, &b, &p));
            prop_assert!(score_guard(&a2, &b, &p) >= score_guard(&a, &b, &p));
            prop_assert!(score_or(&a2, &b, &p) >= score_or(&a, &b, &p));
        }

        #[test]
        fn binary_propagation_matches_operators(a in arb_leaf(CH), b in arb_leaf(CH), p in arb_params()) {
            let ops: [(Operator, BinaryOp); 4] = [
                (Operator::Seq, score_seq),
                (Operator::Sync, score_sync),
                (Operator::Guard, score_guard),
                (Operator::Or, score_or),
            ];
            for (op, f) in ops {
                let schema = SchemaTree::new("e", Node::composite(op, vec![a.schema_node(), b.schema_node()]));
                let slots = [(a.interval(), a.mu()), (b.interval(), b.mu())];
                let tree = InstanceTree::from_leaves(schema, &slots, p).unwrap();
                // compactness_tolerance is large here, so the fold adds no factor
                prop_assert_eq!(tree.root_score().to_bits(), f(&a, &b, &p).to_bits(), "{:?}", op);
            }
        }
    }
}
