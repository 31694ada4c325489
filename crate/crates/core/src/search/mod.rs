//! Symbolic instantiation: candidate intervals per primitive and the search
//! for the assignment with the highest root confidence.

mod beam;
mod candidates;
pub mod changepoint;
mod exhaustive;
mod refine;

pub use beam::{instantiate_beam, instantiate_beam_traced};
pub use candidates::{generate_candidates, generate_candidates_in, CandidateSet, LeafCandidates};
pub use exhaustive::{instantiate_exhaustive, instantiate_exhaustive_traced};
pub use refine::refine_boundaries;

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, InstanceTree};
use crate::model::Interval;
use crate::predicates::PredicateError;
use crate::schema::{Node, NodePath};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("no candidates for primitive at {0}")]
    EmptyCandidates(NodePath),
    #[error("{assignments} assignments exceed the exhaustive budget of {budget}")]
    BudgetExceeded { assignments: u128, budget: u64 },
    #[error("candidate set does not match the schema")]
    CandidateMismatch,
    #[error("invalid search configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("trace output failed: {0}")]
    Trace(String),
}

/// Search and candidate-generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub beam_width: usize,
    /// Candidates kept per primitive after ranking by coherence.
    pub max_candidates: usize,
    pub exhaustive_budget: u64,
    /// Longest candidate, as a fraction of the search window.
    pub span_limit: f64,
    /// Change-point penalty multiplier.
    pub beta: f64,
    /// Shortest candidate interval and shortest change-point segment.
    pub min_segment: usize,
    /// Most significant breakpoints kept per channel.
    pub max_breakpoints: usize,
    /// Boundary refinement radius as a fraction of the series length.
    pub refine_fraction: f64,
    pub refine_passes: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            beam_width: 32,
            max_candidates: 64,
            exhaustive_budget: 1_000_000,
            span_limit: 0.8,
            beta: 3.0,
            min_segment: 4,
            max_breakpoints: 24,
            refine_fraction: 0.02,
            refine_passes: 3,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |what: &str| Err(SearchError::BadConfig(what.to_string()));
        if self.beam_width == 0 {
            return bad("beam_width must be positive");
        }
        if self.max_candidates == 0 {
            return bad("max_candidates must be positive");
        }
        if !(self.span_limit > 0.0 && self.span_limit <= 1.0) {
            return bad("span_limit must lie in (0, 1]");
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if self.min_segment < 2 {
            return bad("min_segment must be at least 2");
        }
        if !(self.refine_fraction.is_finite() && (0.0..=0.5).contains(&self.refine_fraction)) {
            return bad("refine_fraction must lie in [0, 0.5]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    Exhaustive,
    Beam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: InstanceTree,
    pub root_score: f64,
    /// Assignments (full or partial) scored during the search.
    pub explored: u64,
    pub method: SearchMethod,
}

/// Paths of the primitive leaves, left to right.
pub fn leaf_paths(node: &Node) -> Vec<NodePath> {
    fn walk(node: &Node, path: &mut Vec<usize>, out: &mut Vec<NodePath>) {
        match node {
            Node::Primitive(_) => out.push(NodePath(path.clone())),
            Node::Composite(c) => {
                for (i, ch) in c.children.iter().enumerate() {
                    path.push(i);
                    walk(ch, path, out);
                    path.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(node, &mut Vec::new(), &mut out);
    out
}

/// Orders assignments by the onsets of their bound leaves, then offsets.
/// Unbound leaves sort after bound ones.
pub(crate) fn onset_order(a: &[Option<Interval>], b: &[Option<Interval>]) -> Ordering {
    let key = |iv: &Option<Interval>, on: bool| match iv {
        Some(iv) => (0, if on { iv.t_on() } else { iv.t_off() }),
        None => (1, 0),
    };
    let by = |on: bool| {
        a.iter()
            .map(|x| key(x, on))
            .cmp(b.iter().map(|x| key(x, on)))
    };
    by(true).then_with(|| by(false))
}

/// One scored assignment in a search trace.
#[derive(Debug, Serialize)]
struct TraceLine<'a> {
    method: SearchMethod,
    step: usize,
    leaves: &'a [Option<Interval>],
    score: f64,
}

pub(crate) fn write_trace(
    out: &mut dyn Write,
    method: SearchMethod,
    step: usize,
    leaves: &[Option<Interval>],
    score: f64,
) -> Result<(), SearchError> {
    let line = TraceLine {
        method,
        step,
        leaves,
        score,
    };
    serde_json::to_writer(&mut *out, &line).map_err(|e| SearchError::Trace(e.to_string()))?;
    out.write_all(b"\n")
        .map_err(|e| SearchError::Trace(e.to_string()))
}

pub(crate) fn check_candidates(node: &Node, cands: &CandidateSet) -> Result<(), SearchError> {
    let leaves = node.leaves();
    if leaves.len() != cands.leaves.len()
        || leaves
            .iter()
            .zip(&cands.leaves)
            .any(|(l, c)| l.channel != c.channel || l.predicate != c.predicate)
    {
        return Err(SearchError::CandidateMismatch);
    }
    for lc in &cands.leaves {
        if lc.candidates.is_empty() {
            return Err(SearchError::EmptyCandidates(lc.path.clone()));
        }
    }
    Ok(())
}
