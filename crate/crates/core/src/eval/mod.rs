//! IoU-based F1 evaluation, the random-guess baseline and the synthetic
//! benchmark generator.

mod metrics;
mod synth;

pub use metrics::{
    evaluate, evaluate_suite, EvalReport, MatchPair, ThresholdMetrics, DEFAULT_THRESHOLDS,
};
pub use synth::{
    generate_synthetic, LengthDist, SyntheticSample, SyntheticSpec, LOST_SEAL, PRESSURE,
    VALID_TEST, VOLUME,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::Detection;
use crate::model::{GroundTruthEvent, Interval, ModelError, SeriesFrame};
use crate::schema::EventCatalog;

pub const LABELS_FORMAT: &str = "labels_v1";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("IoU threshold {0} outside (0, 1]")]
    BadThreshold(f64),
    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),
    #[error("expected format `{expected}`, found `{found}`")]
    Format { expected: String, found: String },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One random interval and one random event type per frame, confidence 0.5.
pub fn random_baseline(
    frames: &[SeriesFrame],
    catalog: &EventCatalog,
    seed: u64,
) -> Vec<Vec<Detection>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let types = catalog.event_types();
    frames
        .iter()
        .map(|f| {
            if types.is_empty() {
                return Vec::new();
            }
            let n = f.len();
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n);
            while b == a {
                b = rng.random_range(0..n);
            }
            let (on, off) = if a < b { (a, b) } else { (b, a) };
            let ty = types[rng.random_range(0..types.len())];
            vec![Detection::bare(Interval::of(on, off), ty, 0.5)]
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelsDoc {
    format: String,
    events: Vec<GroundTruthEvent>,
}

pub fn labels_to_json(events: &[GroundTruthEvent]) -> String {
    let doc = LabelsDoc {
        format: LABELS_FORMAT.into(),
        events: events.to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("labels serialize") + "\n"
}

pub fn labels_from_json(text: &str) -> Result<Vec<GroundTruthEvent>, EvalError> {
    let doc: LabelsDoc = serde_json::from_str(text)?;
    if doc.format != LABELS_FORMAT {
        return Err(EvalError::Format {
            expected: LABELS_FORMAT.into(),
            found: doc.format,
        });
    }
    for e in &doc.events {
        if e.event_type.is_empty() {
            return Err(ModelError::EmptyEventType.into());
        }
    }
    Ok(doc.events)
}
