//! Rule-based semantic coherence: how well one channel segment matches a
//! morphological predicate, as a degree in `[0, 1]`.

mod features;
mod registry;

pub use features::{
    compute_features, robust_center_scale, robust_scale, segment_features, FeatureContext,
    SegmentFeatures, SCALE_FLOOR,
};
pub use registry::{
    g_high, g_low, quantize_mu, score_predicate, ParamSpec, PredicateDef, PredicateRegistry,
    ResolvedPredicate, Rule,
};

use thiserror::Error;

use crate::model::Interval;
use crate::schema::PredicateRef;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredicateError {
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("bad parameter `{name}` for predicate `{predicate}`")]
    BadParameter { predicate: String, name: String },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("interval {interval} out of bounds for series of length {len}")]
    OutOfBounds { interval: Interval, len: usize },
    #[error("segment {0} too short for feature extraction")]
    SegmentTooShort(Interval),
}

/// Maps `(frame, channel, interval, predicate)` to a coherence degree.
///
/// The shipped implementation is [`RuleBasedScorer`]; any other scorer
/// (for example one comparing learned embeddings) can be plugged into the
/// search through this trait.
pub trait SemanticScorer: Sync {
    fn score(
        &self,
        ctx: &FeatureContext<'_>,
        channel: usize,
        interval: Interval,
        predicate: &PredicateRef,
    ) -> Result<f64, PredicateError>;
}

/// Scores segments with the logistic-gate rules of a [`PredicateRegistry`].
#[derive(Debug, Clone, Default)]
pub struct RuleBasedScorer {
    pub registry: PredicateRegistry,
}

impl RuleBasedScorer {
    pub fn new(registry: PredicateRegistry) -> Self {
        Self { registry }
    }
}

impl SemanticScorer for RuleBasedScorer {
    fn score(
        &self,
        ctx: &FeatureContext<'_>,
        channel: usize,
        interval: Interval,
        predicate: &PredicateRef,
    ) -> Result<f64, PredicateError> {
        let resolved = self.registry.resolve(predicate)?;
        let feats = ctx.features(channel, interval)?;
        Ok(resolved.score(&feats))
    }
}
