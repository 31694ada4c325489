use std::io::Write;

use rayon::prelude::*;

use super::exhaustive::finish;
use super::{
    check_candidates, onset_order, write_trace, CandidateSet, SearchError, SearchMethod,
    SearchResult,
};
use crate::engine::{evaluate_root, evaluate_root_capped, LeafSlot, OperatorParams};
use crate::model::Interval;
use crate::schema::SchemaTree;

struct Partial {
    choice: Vec<usize>,
    ivs: Vec<Option<Interval>>,
    score: f64,
    /// Tighter bound with each wildcard capped at its leaf's best degree.
    capped: f64,
}

/// Assigns leaves left to right, keeping the `width` best partial
/// assignments. Unassigned leaves are scored as `mu = 1` wildcards, which
/// upper-bounds every completion. Ties on that bound (common under OR,
/// where a `mu = 1` wildcard absorbs everything) are broken by the bound
/// with wildcards capped at their leaf's best candidate degree, then by
/// onsets.
pub fn instantiate_beam(
    schema: &SchemaTree,
    cands: &CandidateSet,
    params: &OperatorParams,
    width: usize,
) -> Result<SearchResult, SearchError> {
    instantiate_beam_traced(schema, cands, params, width, None)
}

/// [`instantiate_beam`] that also writes every scored partial assignment to
/// `trace` as one JSON object per line.
pub fn instantiate_beam_traced(
    schema: &SchemaTree,
    cands: &CandidateSet,
    params: &OperatorParams,
    width: usize,
    mut trace: Option<&mut dyn Write>,
) -> Result<SearchResult, SearchError> {
    check_candidates(&schema.root, cands)?;
    params.validate()?;
    if width == 0 {
        return Err(SearchError::BadConfig("beam width must be positive".into()));
    }
    let n = cands.leaves.len();
    let caps: Vec<f64> = cands
        .leaves
        .iter()
        .map(|l| l.candidates.iter().fold(0.0f64, |m, c| m.max(c.1)))
        .collect();
    let mut frontier = vec![Partial {
        choice: Vec::new(),
        ivs: vec![None; n],
        score: 1.0,
        capped: 1.0,
    }];
    let mut explored = 0u64;

    for step in 0..n {
        let options = &cands.leaves[step].candidates;
        let mut next = frontier
            .par_iter()
            .flat_map_iter(|p| (0..options.len()).map(move |j| (p, j)))
            .map(|(p, j)| {
                let mut slots: Vec<LeafSlot> = vec![None; n];
                for (k, &i) in p.choice.iter().enumerate() {
                    slots[k] = Some(cands.leaves[k].candidates[i]);
                }
                slots[step] = Some(options[j]);
                let score = evaluate_root(&schema.root, &slots, params)?;
                let capped = evaluate_root_capped(&schema.root, &slots, &caps, params)?;
                let mut choice = p.choice.clone();
                choice.push(j);
                let mut ivs = p.ivs.clone();
                ivs[step] = Some(options[j].0);
                Ok(Partial {
                    choice,
                    ivs,
                    score,
                    capped,
                })
            })
            .collect::<Result<Vec<_>, SearchError>>()?;
        explored += next.len() as u64;
        if let Some(out) = trace.as_deref_mut() {
            for p in &next {
                write_trace(out, SearchMethod::Beam, step, &p.ivs, p.score)?;
            }
        }
        next.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| b.capped.total_cmp(&a.capped))
                .then_with(|| onset_order(&a.ivs, &b.ivs))
                .then_with(|| a.choice.cmp(&b.choice))
        });
        next.truncate(width);
        frontier = next;
    }

    // the frontier is sorted best first
    let best = frontier.into_iter().next().expect("beam never empties");
    finish(
        schema,
        cands,
        params,
        &best.choice,
        explored,
        SearchMethod::Beam,
    )
}
