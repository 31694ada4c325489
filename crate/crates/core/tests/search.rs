use elt_core::engine::{evaluate_root, evaluate_root_capped, LeafSlot, OperatorParams};
use elt_core::model::Interval;
use elt_core::schema::{Node, NodePath, Operator, PredicateRef, SchemaTree};
use elt_core::search::{
    instantiate_beam, instantiate_beam_traced, instantiate_exhaustive, leaf_paths, CandidateSet,
    LeafCandidates, SearchError, SearchMethod,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

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

fn cands_for(schema: &SchemaTree, lists: Vec<Vec<(Interval, f64)>>) -> CandidateSet {
    let paths = leaf_paths(&schema.root);
    let leaves = schema
        .leaves()
        .into_iter()
        .zip(paths)
        .zip(lists)
        .map(|((leaf, path), candidates)| LeafCandidates {
            path,
            channel: leaf.channel.clone(),
            predicate: leaf.predicate.clone(),
            breakpoints: Vec::new(),
            grid_scales: Vec::new(),
            candidates,
        })
        .collect();
    CandidateSet {
        window: iv(0, 100),
        leaves,
    }
}

fn seq_fixture() -> (SchemaTree, CandidateSet) {
    let schema = SchemaTree::new(
        "e",
        Node::composite(
            Operator::Seq,
            vec![Node::leaf("A", "spike"), Node::leaf("B", "drop")],
        ),
    );
    let cands = cands_for(
        &schema,
        vec![
            vec![(iv(0, 10), 0.9), (iv(20, 30), 0.8), (iv(5, 15), 0.5)],
            vec![(iv(2, 9), 0.95), (iv(12, 20), 0.7), (iv(32, 40), 0.6)],
        ],
    );
    (schema, cands)
}

#[test]
fn single_leaf_argmax() {
    let schema = SchemaTree::new("e", Node::leaf("A", "rise"));
    let cands = cands_for(&schema, vec![vec![(iv(5, 15), 0.9), (iv(0, 10), 0.3)]]);
    let r = instantiate_exhaustive(&schema, &cands, &params(), 1_000_000).unwrap();
    assert_eq!(r.root_score, 0.9);
    assert_eq!(r.best.root.interval(), iv(5, 15));
    assert_eq!(r.method, SearchMethod::Exhaustive);
    assert_eq!(r.explored, 2);
}

#[test]
fn seq_fixture_picks_best_gate_satisfying_pair() {
    let (schema, cands) = seq_fixture();
    // hand enumeration of all nine pairs under delta = 5:
    //   (0,10)x(12,20) -> 0.9*0.7 = 0.63   (20,30)x(32,40) -> 0.8*0.6 = 0.48
    //   (5,15)x(12,20) -> 0.5*0.7 = 0.35   every other pair fails a gate
    let mut oracle = Vec::new();
    for a in &cands.leaves[0].candidates {
        for b in &cands.leaves[1].candidates {
            let causal = b.0.t_on() > a.0.t_on() && b.0.t_off() > a.0.t_off();
            let coherent = (b.0.t_on() as i64) - (a.0.t_off() as i64) - 5 < 0;
            let s = if causal && coherent { a.1 * b.1 } else { 0.0 };
            oracle.push((s, a.0, b.0));
        }
    }
    let best =
        oracle.iter().cloned().fold(
            (0.0, iv(0, 1), iv(0, 1)),
            |acc, x| if x.0 > acc.0 { x } else { acc },
        );
    assert!((best.0 - 0.63).abs() < 1e-12);

    let r = instantiate_exhaustive(&schema, &cands, &params(), 1_000_000).unwrap();
    assert!((r.root_score - best.0).abs() < 1e-12);
    let slots = r.best.root.leaf_slots();
    assert_eq!((slots[0].0, slots[1].0), (best.1, best.2));
    assert_eq!(r.explored, 9);

    let b = instantiate_beam(&schema, &cands, &params(), 2).unwrap();
    assert_eq!(b.best, r.best);
    assert_eq!(b.method, SearchMethod::Beam);
}

#[test]
fn budget_exceeded() {
    let schema = SchemaTree::new(
        "e",
        Node::composite(
            Operator::Sync,
            vec![
                Node::leaf("A", "rise"),
                Node::leaf("B", "rise"),
                Node::leaf("C", "rise"),
            ],
        ),
    );
    let list: Vec<(Interval, f64)> = (0..200).map(|i| (iv(i, i + 5), 0.5)).collect();
    let cands = cands_for(&schema, vec![list.clone(), list.clone(), list]);
    assert_eq!(
        instantiate_exhaustive(&schema, &cands, &params(), 1_000_000).unwrap_err(),
        SearchError::BudgetExceeded {
            assignments: 8_000_000,
            budget: 1_000_000
        }
    );
}

#[test]
fn empty_candidates_reported_with_path() {
    let (schema, mut cands) = seq_fixture();
    cands.leaves[1].candidates.clear();
    assert_eq!(
        instantiate_beam(&schema, &cands, &params(), 4).unwrap_err(),
        SearchError::EmptyCandidates(NodePath(vec![1]))
    );
}

#[test]
fn ties_prefer_earliest_onsets() {
    let schema = SchemaTree::new(
        "e",
        Node::composite(
            Operator::Sync,
            vec![Node::leaf("A", "rise"), Node::leaf("B", "rise")],
        ),
    );
    let cands = cands_for(
        &schema,
        vec![
            vec![(iv(30, 40), 0.5), (iv(10, 20), 0.5)],
            vec![(iv(30, 40), 0.5), (iv(10, 20), 0.5)],
        ],
    );
    let r = instantiate_exhaustive(&schema, &cands, &params(), 100).unwrap();
    assert_eq!(r.best.root.interval(), iv(10, 20));
    let b = instantiate_beam(&schema, &cands, &params(), 4).unwrap();
    assert_eq!(b.best, r.best);
}

fn random_schema(rng: &mut ChaCha8Rng) -> SchemaTree {
    let channels = ["A", "B", "C"];
    let preds = ["rise", "fall", "stable"];
    let leaf = |rng: &mut ChaCha8Rng| {
        Node::prim(
            channels[rng.random_range(0..3)],
            PredicateRef::new(preds[rng.random_range(0..3)]),
        )
    };
    let op = |rng: &mut ChaCha8Rng| Operator::ALL[rng.random_range(0..4)];
    let root = match rng.random_range(0..4) {
        0 => leaf(rng),
        1 => {
            let o = op(rng);
            Node::composite(o, vec![leaf(rng), leaf(rng)])
        }
        2 => {
            let mut o = op(rng);
            if o == Operator::Guard {
                o = Operator::Seq;
            }
            Node::composite(o, vec![leaf(rng), leaf(rng), leaf(rng)])
        }
        _ => {
            let (outer, inner) = (op(rng), op(rng));
            let pair = Node::composite(inner, vec![leaf(rng), leaf(rng)]);
            if rng.random_bool(0.5) {
                Node::composite(outer, vec![pair, leaf(rng)])
            } else {
                Node::composite(outer, vec![leaf(rng), pair])
            }
        }
    };
    SchemaTree::new("e", root)
}

fn random_instance(seed: u64) -> (SchemaTree, CandidateSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = random_schema(&mut rng);
    let lists = (0..schema.leaves().len())
        .map(|_| {
            let n = rng.random_range(1..=8);
            let mut v: Vec<(Interval, f64)> = Vec::new();
            while v.len() < n {
                let a = rng.random_range(0..50);
                let l = rng.random_range(2..20);
                let c = iv(a, a + l);
                if v.iter().all(|x| x.0 != c) {
                    v.push((c, rng.random_range(0.05..1.0)));
                }
            }
            v.sort_by(|x, y| y.1.total_cmp(&x.1));
            v
        })
        .collect();
    let cands = cands_for(&schema, lists);
    (schema, cands)
}

#[test]
fn beam_tracks_exhaustive_on_random_instances() {
    for seed in 0..40 {
        let (schema, cands) = random_instance(seed);
        let ex = instantiate_exhaustive(&schema, &cands, &params(), 1_000_000).unwrap();
        let b = instantiate_beam(&schema, &cands, &params(), 32).unwrap();
        assert!(b.root_score <= ex.root_score, "seed {seed}");
        assert!(b.root_score >= 0.95 * ex.root_score, "seed {seed}");
        let full = cands.assignment_count() as usize;
        let bf = instantiate_beam(&schema, &cands, &params(), full).unwrap();
        assert_eq!(
            bf.root_score.to_bits(),
            ex.root_score.to_bits(),
            "seed {seed}"
        );
        assert_eq!(bf.best, ex.best, "seed {seed}");
    }
}

#[test]
fn reported_score_matches_repropagation() {
    for seed in 0..20 {
        let (schema, cands) = random_instance(seed);
        let b = instantiate_beam(&schema, &cands, &params(), 8).unwrap();
        let p = b.best.propagate().unwrap();
        assert!((p.root_score() - b.root_score).abs() < 1e-12);
    }
}

#[test]
fn binding_wildcards_never_raises_the_bound() {
    for seed in 0..30 {
        let (schema, cands) = random_instance(seed);
        let n = cands.leaves.len();
        let full: Vec<LeafSlot> = cands.leaves.iter().map(|l| Some(l.candidates[0])).collect();
        for mask in 0..(1u32 << n) {
            let partial: Vec<LeafSlot> = full
                .iter()
                .enumerate()
                .map(|(i, s)| if mask & (1 << i) != 0 { *s } else { None })
                .collect();
            let upper = evaluate_root(&schema.root, &partial, &params()).unwrap();
            let exact = evaluate_root(&schema.root, &full, &params()).unwrap();
            assert!(exact <= upper, "seed {seed} mask {mask}");
        }
    }
}

#[test]
fn search_is_deterministic_and_traceable() {
    let (schema, cands) = random_instance(5);
    let a = instantiate_beam(&schema, &cands, &params(), 4).unwrap();
    let b = instantiate_beam(&schema, &cands, &params(), 4).unwrap();
    assert_eq!(a, b);

    let mut buf = Vec::new();
    let t = instantiate_beam_traced(&schema, &cands, &params(), 4, Some(&mut buf)).unwrap();
    assert_eq!(t, a);
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count() as u64, a.explored);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["method"], "beam");
        assert!(v["score"].is_number());
    }
}

#[test]
fn absorbing_or_wildcards_do_not_blind_the_beam() {
    // under OR a mu = 1 wildcard absorbs every partial score to 1, so only
    // the capped bound can tell the early choices apart
    let schema = SchemaTree::new(
        "e",
        Node::composite(
            Operator::Or,
            vec![
                Node::composite(
                    Operator::Or,
                    vec![Node::leaf("A", "rise"), Node::leaf("B", "rise")],
                ),
                Node::leaf("C", "rise"),
            ],
        ),
    );
    let cands = cands_for(
        &schema,
        vec![
            vec![(iv(0, 10), 0.2), (iv(40, 50), 0.9)],
            vec![(iv(0, 10), 0.2), (iv(40, 50), 0.9)],
            vec![(iv(0, 10), 0.2), (iv(40, 50), 0.9)],
        ],
    );
    let ex = instantiate_exhaustive(&schema, &cands, &params(), 100).unwrap();
    assert_eq!(ex.best.root.interval(), iv(40, 50));
    let b = instantiate_beam(&schema, &cands, &params(), 1).unwrap();
    assert_eq!(b.best, ex.best);
}

#[test]
fn capped_bound_is_tighter_and_still_admissible() {
    for seed in 0..30 {
        let (schema, cands) = random_instance(seed);
        let n = cands.leaves.len();
        let caps: Vec<f64> = cands
            .leaves
            .iter()
            .map(|l| l.candidates.iter().fold(0.0f64, |m, c| m.max(c.1)))
            .collect();
        let best = instantiate_exhaustive(&schema, &cands, &params(), 1_000_000)
            .unwrap()
            .root_score;
        let full: Vec<LeafSlot> = cands.leaves.iter().map(|l| Some(l.candidates[0])).collect();
        for mask in 0..(1u32 << n) {
            let partial: Vec<LeafSlot> = full
                .iter()
                .enumerate()
                .map(|(i, s)| if mask & (1 << i) != 0 { *s } else { None })
                .collect();
            let loose = evaluate_root(&schema.root, &partial, &params()).unwrap();
            let tight = evaluate_root_capped(&schema.root, &partial, &caps, &params()).unwrap();
            assert!(tight <= loose, "seed {seed} mask {mask}");
            if mask == 0 {
                assert!(tight >= best, "seed {seed}");
            }
        }
    }
}
