//! Scans a series against an event catalog and emits scored detections.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{InstanceDoc, InstanceTree, OperatorParams};
use crate::model::{iou, Interval, SeriesFrame};
use crate::predicates::{FeatureContext, PredicateRegistry, RuleBasedScorer, SemanticScorer};
use crate::schema::{EventCatalog, SchemaTree};
use crate::search::{
    generate_candidates_in, instantiate_beam_traced, refine_boundaries, SearchConfig, SearchError,
};

pub const DETECTIONS_FORMAT: &str = "detections_v1";

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("event catalog is empty")]
    EmptyCatalog,
    #[error("channel `{0}` required by the schemas is missing from the series")]
    ChannelMismatch(String),
    #[error("invalid detector configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("expected format `{expected}`, found `{found}`")]
    Format { expected: String, found: String },
    #[error("malformed detections document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("trace output failed: {0}")]
    Trace(#[from] std::io::Error),
}

/// A detected event with the instantiated tree that explains it.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub interval: Interval,
    pub event_type: String,
    pub confidence: f64,
    /// Absent for detections that were not produced by the engine, such as
    /// baseline guesses.
    pub explanation: Option<InstanceTree>,
}

impl Detection {
    pub fn from_tree(tree: InstanceTree) -> Self {
        Self {
            interval: tree.root.interval(),
            event_type: tree.schema.event_type.clone(),
            confidence: tree.root_score(),
            explanation: Some(tree),
        }
    }

    /// A detection without an explanation.
    pub fn bare(interval: Interval, event_type: &str, confidence: f64) -> Self {
        Self {
            interval,
            event_type: event_type.to_string(),
            confidence,
            explanation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub min_confidence: f64,
    pub nms_iou: f64,
    /// Groups of mutually exclusive event types; suppression applies
    /// across types within a group.
    pub exclusive_groups: Vec<Vec<String>>,
    /// Window sizes as divisors of the series length.
    pub window_divisors: Vec<usize>,
    /// Hill-climb leaf boundaries after the beam search.
    pub refine: bool,
    /// Operator hyperparameters; defaults scale with the series length.
    pub operator: Option<OperatorParams>,
    pub search: SearchConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            min_confidence: 0.3,
            nms_iou: 0.5,
            exclusive_groups: Vec::new(),
            window_divisors: vec![1, 2, 4],
            refine: true,
            operator: None,
            search: SearchConfig::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |s: &str| Err(DetectError::BadConfig(s.to_string()));
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return bad("min_confidence must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return bad("nms_iou must lie in [0, 1]");
        }
        if self.window_divisors.is_empty() || self.window_divisors.contains(&0) {
            return bad("window_divisors must be nonempty and positive");
        }
        if let Some(p) = &self.operator {
            p.validate()
                .map_err(|e| DetectError::BadConfig(e.to_string()))?;
        }
        self.search.validate()?;
        Ok(())
    }

    fn exclusive(&self, a: &str, b: &str) -> bool {
        a == b
            || self
                .exclusive_groups
                .iter()
                .any(|g| g.iter().any(|x| x == a) && g.iter().any(|x| x == b))
    }
}

/// Half-overlapping windows of length `len / d` for each divisor `d`. The
/// last window of each size is aligned to the end of the series.
pub fn scan_windows(len: usize, divisors: &[usize], min_len: usize) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::new();
    for &d in divisors {
        let size = len / d;
        if size < min_len.max(2) || (d > 1 && size < 4 * min_len) {
            continue;
        }
        let stride = (size / 2).max(1);
        let mut start = 0;
        loop {
            let w = Interval::of(start, start + size);
            if !out.contains(&w) {
                out.push(w);
            }
            if start + size >= len {
                break;
            }
            start = (start + stride).min(len - size);
        }
    }
    out
}

/// Detects events with the default predicate registry.
pub fn detect(
    frame: &SeriesFrame,
    catalog: &EventCatalog,
    config: &DetectorConfig,
) -> Result<Vec<Detection>, DetectError> {
    let scorer = RuleBasedScorer::new(PredicateRegistry::default());
    detect_with(frame, catalog, &scorer, config, None)
}

/// Full detection pipeline.
///
/// Every event type is searched in every scan window. A window's best
/// instantiation is kept if it reaches `min_confidence` and its span does
/// not touch a window edge that lies inside the series (such an event is
/// likely cut off and is left to a larger window). Overlapping detections
/// are then suppressed, highest confidence first.
pub fn detect_with(
    frame: &SeriesFrame,
    catalog: &EventCatalog,
    scorer: &dyn SemanticScorer,
    config: &DetectorConfig,
    trace: Option<&mut dyn Write>,
) -> Result<Vec<Detection>, DetectError> {
    if catalog.is_empty() {
        return Err(DetectError::EmptyCatalog);
    }
    config.validate()?;
    for ch in catalog.declared_channels() {
        if frame.channel_index(ch).is_none() {
            return Err(DetectError::ChannelMismatch(ch.to_string()));
        }
    }
    let len = frame.len();
    let params = config
        .operator
        .unwrap_or_else(|| OperatorParams::for_length(len));
    let ctx = FeatureContext::new(frame);
    let windows = scan_windows(len, &config.window_divisors, config.search.min_segment);
    let radius = (config.search.refine_fraction * len as f64).round() as usize;

    let tasks: Vec<(Interval, &SchemaTree)> = windows
        .iter()
        .flat_map(|w| catalog.iter().map(move |s| (*w, s)))
        .collect();
    let want_trace = trace.is_some();
    let results = tasks
        .par_iter()
        .map(|&(window, schema)| {
            let mut buf = Vec::new();
            let det = search_window(
                &ctx,
                scorer,
                schema,
                window,
                &params,
                config,
                radius,
                want_trace.then_some(&mut buf as &mut dyn Write),
            )?;
            Ok((det, buf))
        })
        .collect::<Result<Vec<_>, DetectError>>()?;

    let mut found = Vec::new();
    let mut trace = trace;
    for (det, buf) in results {
        if let Some(out) = trace.as_deref_mut() {
            out.write_all(&buf)?;
        }
        found.extend(det);
    }
    Ok(suppress(found, config))
}

#[allow(clippy::too_many_arguments)]
fn search_window(
    ctx: &FeatureContext<'_>,
    scorer: &dyn SemanticScorer,
    schema: &SchemaTree,
    window: Interval,
    params: &OperatorParams,
    config: &DetectorConfig,
    radius: usize,
    trace: Option<&mut dyn Write>,
) -> Result<Option<Detection>, DetectError> {
    let cands = generate_candidates_in(ctx, scorer, schema, window, &config.search)?;
    if cands.leaves.iter().any(|l| l.candidates.is_empty()) {
        return Ok(None);
    }
    let result = instantiate_beam_traced(schema, &cands, params, config.search.beam_width, trace)?;
    if result.root_score <= 0.0 {
        return Ok(None);
    }
    let tree = if config.refine && radius > 0 {
        refine_boundaries(
            ctx,
            scorer,
            &result.best,
            window,
            radius,
            config.search.refine_passes,
            config.search.min_segment,
        )?
    } else {
        result.best
    };
    let span = tree.root.interval();
    let len = ctx.frame().len();
    let cut_left = window.t_on() > 0 && span.t_on() == window.t_on();
    let cut_right = window.t_off() < len && span.t_off() == window.t_off();
    if tree.root_score() < config.min_confidence || cut_left || cut_right {
        return Ok(None);
    }
    Ok(Some(Detection::from_tree(tree)))
}

/// Non-maximum suppression. Detections are ranked by confidence (then
/// onset, offset, type); each is dropped if its IoU with an already kept
/// detection of the same type or exclusivity group exceeds `nms_iou`.
pub fn suppress(mut dets: Vec<Detection>, config: &DetectorConfig) -> Vec<Detection> {
    dets.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.interval.t_on().cmp(&b.interval.t_on()))
            .then_with(|| a.interval.t_off().cmp(&b.interval.t_off()))
            .then_with(|| a.event_type.cmp(&b.event_type))
    });
    let mut kept: Vec<Detection> = Vec::new();
    for d in dets {
        let clash = kept.iter().any(|k| {
            config.exclusive(&k.event_type, &d.event_type)
                && iou(&k.interval, &d.interval) > config.nms_iou
        });
        if !clash {
            kept.push(d);
        }
    }
    kept
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionDoc {
    t_on: usize,
    t_off: usize,
    event_type: String,
    confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    explanation: Option<InstanceDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionsDoc {
    format: String,
    detections: Vec<DetectionDoc>,
}

pub fn detections_to_json(dets: &[Detection]) -> String {
    let doc = DetectionsDoc {
        format: DETECTIONS_FORMAT.into(),
        detections: dets
            .iter()
            .map(|d| DetectionDoc {
                t_on: d.interval.t_on(),
                t_off: d.interval.t_off(),
                event_type: d.event_type.clone(),
                confidence: d.confidence,
                explanation: d.explanation.as_ref().map(InstanceTree::to_doc),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("detections serialize") + "\n"
}

pub fn detections_from_json(text: &str) -> Result<Vec<Detection>, DetectError> {
    let doc: DetectionsDoc = serde_json::from_str(text)?;
    if doc.format != DETECTIONS_FORMAT {
        return Err(DetectError::Format {
            expected: DETECTIONS_FORMAT.into(),
            found: doc.format,
        });
    }
    doc.detections
        .into_iter()
        .map(|d| {
            let interval = Interval::new(d.t_on, d.t_off)
                .map_err(|e| DetectError::BadConfig(e.to_string()))?;
            let explanation = d
                .explanation
                .map(InstanceTree::from_doc)
                .transpose()
                .map_err(|e| DetectError::BadConfig(e.to_string()))?;
            Ok(Detection {
                interval,
                event_type: d.event_type,
                confidence: d.confidence,
                explanation,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_cover_the_series() {
        let w = scan_windows(1000, &[1, 2, 4], 4);
        assert_eq!(w[0], Interval::of(0, 1000));
        assert!(w.contains(&Interval::of(250, 750)));
        assert!(w.contains(&Interval::of(750, 1000)));
        assert_eq!(w.len(), 1 + 3 + 7);
        let odd = scan_windows(1001, &[2], 4);
        assert_eq!(odd.last().unwrap().t_off(), 1001);
    }

    #[test]
    fn identical_detections_collapse() {
        let d = Detection::bare(Interval::of(10, 50), "a", 0.8);
        let out = suppress(vec![d.clone(), d.clone()], &DetectorConfig::default());
        assert_eq!(out, vec![d]);
    }

    #[test]
    fn exclusivity_groups_cross_types() {
        let a = Detection::bare(Interval::of(10, 50), "a", 0.8);
        let b = Detection::bare(Interval::of(12, 50), "b", 0.6);
        let mut cfg = DetectorConfig::default();
        assert_eq!(suppress(vec![a.clone(), b.clone()], &cfg).len(), 2);
        cfg.exclusive_groups = vec![vec!["a".into(), "b".into()]];
        assert_eq!(suppress(vec![b, a.clone()], &cfg), vec![a]);
    }

    #[test]
    fn json_format_checked() {
        let d = vec![Detection::bare(Interval::of(1, 5), "a", 0.5)];
        let text = detections_to_json(&d);
        assert_eq!(detections_from_json(&text).unwrap(), d);
        let old = text.replace("detections_v1", "detections_v0");
        assert!(matches!(
            detections_from_json(&old),
            Err(DetectError::Format { .. })
        ));
    }
}
