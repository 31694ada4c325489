use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use super::changepoint::{binary_segmentation, SegmentationParams};
use super::{leaf_paths, SearchConfig, SearchError};
use crate::model::{Interval, SeriesFrame};
use crate::predicates::{FeatureContext, RuleBasedScorer, SemanticScorer};
use crate::schema::{NodePath, PredicateRef, SchemaTree};

/// Scored candidate intervals for one primitive leaf.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafCandidates {
    pub path: NodePath,
    pub channel: String,
    pub predicate: PredicateRef,
    /// Change points found on this leaf's channel inside the window.
    pub breakpoints: Vec<usize>,
    /// Grid window sizes, when the grid fallback was needed.
    pub grid_scales: Vec<usize>,
    /// `(interval, mu)` sorted by decreasing `mu`, then by onset.
    pub candidates: Vec<(Interval, f64)>,
}

/// Candidates for every leaf of a schema, in leaf order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSet {
    pub window: Interval,
    pub leaves: Vec<LeafCandidates>,
}

impl CandidateSet {
    /// Product of the per-leaf candidate counts.
    pub fn assignment_count(&self) -> u128 {
        self.leaves
            .iter()
            .map(|l| l.candidates.len() as u128)
            .fold(1u128, u128::saturating_mul)
    }
}

/// Candidates over the whole frame with the default rule-based scorer.
pub fn generate_candidates(
    frame: &SeriesFrame,
    schema: &SchemaTree,
    config: &SearchConfig,
) -> Result<CandidateSet, SearchError> {
    let ctx = FeatureContext::new(frame);
    generate_candidates_in(
        &ctx,
        &RuleBasedScorer::default(),
        schema,
        frame.span(),
        config,
    )
}

/// Candidates restricted to `window`. Features are still normalized by the
/// statistics of the full channel held in `ctx`.
pub fn generate_candidates_in(
    ctx: &FeatureContext<'_>,
    scorer: &dyn SemanticScorer,
    schema: &SchemaTree,
    window: Interval,
    config: &SearchConfig,
) -> Result<CandidateSet, SearchError> {
    config.validate()?;
    let len = ctx.frame().len();
    if window.t_off() > len {
        return Err(crate::predicates::PredicateError::OutOfBounds {
            interval: window,
            len,
        }
        .into());
    }
    let leaves = schema.leaves();
    let mut channels = Vec::with_capacity(leaves.len());
    for leaf in &leaves {
        let c = ctx
            .frame()
            .channel_index(&leaf.channel)
            .ok_or_else(|| SearchError::UnknownChannel(leaf.channel.clone()))?;
        channels.push(c);
    }

    let seg = SegmentationParams {
        beta: config.beta,
        min_size: config.min_segment,
        max_breakpoints: config.max_breakpoints,
        ..SegmentationParams::default()
    };
    let mut breakpoints: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &c in &channels {
        breakpoints.entry(c).or_insert_with(|| {
            let z = &ctx.normalized(c)[window.t_on()..window.t_off()];
            binary_segmentation(z, &seg)
                .into_iter()
                .map(|b| b + window.t_on())
                .collect()
        });
    }

    let paths = leaf_paths(&schema.root);
    let mut out = Vec::with_capacity(leaves.len());
    for ((leaf, &c), path) in leaves.iter().zip(&channels).zip(paths) {
        let bps = breakpoints[&c].clone();
        let (intervals, grid_scales) = candidate_intervals(window, &bps, config);
        let mut scored = intervals
            .par_iter()
            .map(|&iv| scorer.score(ctx, c, iv, &leaf.predicate).map(|mu| (iv, mu)))
            .collect::<Result<Vec<_>, _>>()?;
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| a.0.t_on().cmp(&b.0.t_on()))
                .then_with(|| a.0.t_off().cmp(&b.0.t_off()))
        });
        scored.truncate(config.max_candidates);
        out.push(LeafCandidates {
            path,
            channel: leaf.channel.clone(),
            predicate: leaf.predicate.clone(),
            breakpoints: bps,
            grid_scales,
            candidates: scored,
        });
    }
    Ok(CandidateSet {
        window,
        leaves: out,
    })
}

/// Every interval delimited by two boundaries (window edges or breakpoints)
/// within the length limits, plus a multi-scale grid when breakpoints
/// yield fewer than four.
fn candidate_intervals(
    window: Interval,
    breakpoints: &[usize],
    config: &SearchConfig,
) -> (Vec<Interval>, Vec<usize>) {
    let wlen = window.len();
    let min_len = config.min_segment;
    let max_len = ((config.span_limit * wlen as f64).floor() as usize).max(min_len);
    let mut bounds = vec![window.t_on()];
    bounds.extend(breakpoints.iter().copied());
    bounds.push(window.t_off());

    let mut set = BTreeSet::new();
    for (i, &a) in bounds.iter().enumerate() {
        for &b in &bounds[i + 1..] {
            if (min_len..=max_len).contains(&(b - a)) {
                set.insert((a, b));
            }
        }
    }
    let mut scales = Vec::new();
    if set.len() < 4 {
        for div in [16, 8, 4, 2] {
            let size = wlen / div;
            if size < min_len {
                continue;
            }
            scales.push(size);
            let stride = (size / 2).max(1);
            let mut start = window.t_on();
            while start + size <= window.t_off() {
                set.insert((start, start + size));
                start += stride;
            }
        }
    }
    let ivs = set.into_iter().map(|(a, b)| Interval::of(a, b)).collect();
    (ivs, scales)
}
