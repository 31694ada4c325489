use super::SearchError;
use crate::engine::{evaluate_root, InstanceTree, LeafSlot};
use crate::model::Interval;
use crate::predicates::{FeatureContext, SemanticScorer};

/// Local hill-climb over leaf boundaries.
///
/// Each onset and offset in turn is moved to the position within
/// `radius` samples that most raises the root score (smallest shift on
/// ties). Moves must strictly improve the score, keep the leaf inside
/// `window` and at least `min_len` long. Stops after `passes` sweeps or
/// when a sweep changes nothing.
pub fn refine_boundaries(
    ctx: &FeatureContext<'_>,
    scorer: &dyn SemanticScorer,
    tree: &InstanceTree,
    window: Interval,
    radius: usize,
    passes: usize,
    min_len: usize,
) -> Result<InstanceTree, SearchError> {
    let leaves = tree.schema.leaves();
    let mut channels = Vec::with_capacity(leaves.len());
    for leaf in &leaves {
        channels.push(
            ctx.frame()
                .channel_index(&leaf.channel)
                .ok_or_else(|| SearchError::UnknownChannel(leaf.channel.clone()))?,
        );
    }
    let mut slots: Vec<LeafSlot> = tree.root.leaf_slots().into_iter().map(Some).collect();
    let mut score = evaluate_root(&tree.schema.root, &slots, &tree.params)?;
    let min_len = min_len.max(2);

    for _ in 0..passes {
        let mut changed = false;
        for k in 0..slots.len() {
            for onset in [true, false] {
                let (cur, _) = slots[k].expect("complete assignment");
                let mut best: Option<(f64, Interval, f64)> = None;
                for d in -(radius as i64)..=(radius as i64) {
                    let Some(iv) = shifted(cur, onset, d, window, min_len) else {
                        continue;
                    };
                    let mu = scorer.score(ctx, channels[k], iv, &leaves[k].predicate)?;
                    let mut trial = slots.clone();
                    trial[k] = Some((iv, mu));
                    let s = evaluate_root(&tree.schema.root, &trial, &tree.params)?;
                    let beats = match best {
                        None => s > score,
                        Some((b, biv, _)) => {
                            s > b || (s == b && shift(cur, iv).abs() < shift(cur, biv).abs())
                        }
                    };
                    if beats {
                        best = Some((s, iv, mu));
                    }
                }
                if let Some((s, iv, mu)) = best {
                    slots[k] = Some((iv, mu));
                    score = s;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let leaves: Vec<(Interval, f64)> = slots.into_iter().flatten().collect();
    Ok(InstanceTree::from_leaves(
        tree.schema.clone(),
        &leaves,
        tree.params,
    )?)
}

fn shifted(
    iv: Interval,
    onset: bool,
    d: i64,
    window: Interval,
    min_len: usize,
) -> Option<Interval> {
    if d == 0 {
        return None;
    }
    let (mut on, mut off) = (iv.t_on() as i64, iv.t_off() as i64);
    if onset {
        on += d;
    } else {
        off += d;
    }
    if on < window.t_on() as i64 || off > window.t_off() as i64 || off - on < min_len as i64 {
        return None;
    }
    Some(Interval::of(on as usize, off as usize))
}

fn shift(a: Interval, b: Interval) -> i64 {
    (b.t_on() as i64 - a.t_on() as i64) + (b.t_off() as i64 - a.t_off() as i64)
}
