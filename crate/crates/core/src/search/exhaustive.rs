use std::cmp::Ordering;
use std::io::Write;

use super::{
    check_candidates, onset_order, write_trace, CandidateSet, SearchError, SearchMethod,
    SearchResult,
};
use crate::engine::{evaluate_root, InstanceTree, LeafSlot, OperatorParams};
use crate::model::Interval;
use crate::schema::SchemaTree;

/// Scores every full assignment and returns the best one. Ties go to the
/// lexicographically earliest onset vector, then offset vector.
pub fn instantiate_exhaustive(
    schema: &SchemaTree,
    cands: &CandidateSet,
    params: &OperatorParams,
    budget: u64,
) -> Result<SearchResult, SearchError> {
    instantiate_exhaustive_traced(schema, cands, params, budget, None)
}

/// [`instantiate_exhaustive`] that also writes every scored assignment to
/// `trace` as one JSON object per line.
pub fn instantiate_exhaustive_traced(
    schema: &SchemaTree,
    cands: &CandidateSet,
    params: &OperatorParams,
    budget: u64,
    mut trace: Option<&mut dyn Write>,
) -> Result<SearchResult, SearchError> {
    check_candidates(&schema.root, cands)?;
    params.validate()?;
    let total = cands.assignment_count();
    if total > u128::from(budget) {
        return Err(SearchError::BudgetExceeded {
            assignments: total,
            budget,
        });
    }

    let radix: Vec<usize> = cands.leaves.iter().map(|l| l.candidates.len()).collect();
    let mut idx = vec![0usize; radix.len()];
    let mut slots: Vec<LeafSlot> = vec![None; radix.len()];
    let mut ivs: Vec<Option<Interval>> = vec![None; radix.len()];
    let mut best: Option<(f64, Vec<Option<Interval>>, Vec<usize>)> = None;
    let mut explored = 0u64;

    loop {
        for (k, &i) in idx.iter().enumerate() {
            let c = cands.leaves[k].candidates[i];
            slots[k] = Some(c);
            ivs[k] = Some(c.0);
        }
        let score = evaluate_root(&schema.root, &slots, params)?;
        explored += 1;
        if let Some(out) = trace.as_deref_mut() {
            write_trace(out, SearchMethod::Exhaustive, 0, &ivs, score)?;
        }
        let better = match &best {
            None => true,
            Some((s, b, _)) => match score.total_cmp(s) {
                Ordering::Greater => true,
                Ordering::Equal => onset_order(&ivs, b) == Ordering::Less,
                Ordering::Less => false,
            },
        };
        if better {
            best = Some((score, ivs.clone(), idx.clone()));
        }

        // odometer increment, last leaf fastest
        let mut k = radix.len();
        loop {
            if k == 0 {
                let (_, _, choice) = best.expect("at least one assignment");
                return finish(
                    schema,
                    cands,
                    params,
                    &choice,
                    explored,
                    SearchMethod::Exhaustive,
                );
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < radix[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

pub(super) fn finish(
    schema: &SchemaTree,
    cands: &CandidateSet,
    params: &OperatorParams,
    choice: &[usize],
    explored: u64,
    method: SearchMethod,
) -> Result<SearchResult, SearchError> {
    let leaves: Vec<(Interval, f64)> = choice
        .iter()
        .zip(&cands.leaves)
        .map(|(&i, l)| l.candidates[i])
        .collect();
    let best = InstanceTree::from_leaves(schema.clone(), &leaves, *params)?;
    Ok(SearchResult {
        root_score: best.root_score(),
        best,
        explored,
        method,
    })
}
