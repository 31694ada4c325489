use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::detector::Detection;
use crate::model::{iou, GroundTruthEvent};

pub const DEFAULT_THRESHOLDS: [f64; 2] = [0.5, 0.9];

/// Confusion counts and derived scores at one IoU threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ThresholdMetrics {
    fn from_counts(threshold: f64, tp: usize, n_pred: usize, n_truth: usize) -> Self {
        let precision = if n_pred == 0 {
            0.0
        } else {
            tp as f64 / n_pred as f64
        };
        let recall = if n_truth == 0 {
            0.0
        } else {
            tp as f64 / n_truth as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            threshold,
            tp,
            fp: n_pred - tp,
            fn_: n_truth - tp,
            precision,
            recall,
            f1,
        }
    }
}

/// One prediction paired with one ground-truth event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub frame: usize,
    pub prediction: usize,
    pub truth: usize,
    pub event_type: String,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_predictions: usize,
    pub n_truth: usize,
    pub overall: Vec<ThresholdMetrics>,
    pub per_type: BTreeMap<String, Vec<ThresholdMetrics>>,
    pub matches: Vec<MatchPair>,
}

impl EvalReport {
    /// Metrics for one event type at one threshold.
    pub fn metrics(&self, event_type: Option<&str>, threshold: f64) -> Option<&ThresholdMetrics> {
        let list = match event_type {
            None => &self.overall,
            Some(t) => self.per_type.get(t)?,
        };
        list.iter().find(|m| m.threshold == threshold)
    }

    /// Fixed-width text table, one row per (scope, threshold).
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>6} {:>5} {:>5} {:>5} {:>9} {:>7} {:>7}",
            "scope", "iou", "tp", "fp", "fn", "precision", "recall", "f1"
        );
        let rows = std::iter::once(("all", &self.overall))
            .chain(self.per_type.iter().map(|(k, v)| (k.as_str(), v)));
        for (scope, list) in rows {
            for m in list {
                let _ = writeln!(
                    out,
                    "{:<16} {:>6.2} {:>5} {:>5} {:>5} {:>9.3} {:>7.3} {:>7.3}",
                    scope, m.threshold, m.tp, m.fp, m.fn_, m.precision, m.recall, m.f1
                );
            }
        }
        out
    }
}

fn check_thresholds(thresholds: &[f64]) -> Result<(), EvalError> {
    if thresholds.is_empty() {
        return Err(EvalError::BadThreshold(f64::NAN));
    }
    for &t in thresholds {
        if !(t > 0.0 && t <= 1.0) {
            return Err(EvalError::BadThreshold(t));
        }
    }
    Ok(())
}

/// Scores one frame's predictions against its ground truth.
pub fn evaluate(
    predictions: &[Detection],
    truth: &[GroundTruthEvent],
    thresholds: &[f64],
) -> Result<EvalReport, EvalError> {
    evaluate_suite(&[(predictions, truth)], thresholds)
}

/// Scores several frames at once; matching is per frame, counts are pooled.
///
/// Within a frame and event type, predictions are visited by decreasing
/// confidence and each takes the unmatched truth of highest IoU (IoU > 0).
/// A pair counts as a true positive at threshold `t` iff its IoU is at
/// least `t`.
pub fn evaluate_suite(
    frames: &[(&[Detection], &[GroundTruthEvent])],
    thresholds: &[f64],
) -> Result<EvalReport, EvalError> {
    check_thresholds(thresholds)?;
    let mut matches = Vec::new();
    let mut n_pred: BTreeMap<String, usize> = BTreeMap::new();
    let mut n_truth: BTreeMap<String, usize> = BTreeMap::new();

    for (f, (preds, truths)) in frames.iter().enumerate() {
        let types: BTreeSet<&str> = preds
            .iter()
            .map(|p| p.event_type.as_str())
            .chain(truths.iter().map(|t| t.event_type.as_str()))
            .collect();
        for ty in types {
            let mut p_idx: Vec<usize> = (0..preds.len())
                .filter(|&i| preds[i].event_type == ty)
                .collect();
            let t_idx: Vec<usize> = (0..truths.len())
                .filter(|&i| truths[i].event_type == ty)
                .collect();
            *n_pred.entry(ty.to_string()).or_default() += p_idx.len();
            *n_truth.entry(ty.to_string()).or_default() += t_idx.len();
            p_idx.sort_by(|&a, &b| {
                preds[b]
                    .confidence
                    .total_cmp(&preds[a].confidence)
                    .then_with(|| preds[a].interval.t_on().cmp(&preds[b].interval.t_on()))
                    .then(a.cmp(&b))
            });
            let mut taken = vec![false; t_idx.len()];
            for &pi in &p_idx {
                let mut best: Option<(usize, f64)> = None;
                for (k, &ti) in t_idx.iter().enumerate() {
                    if taken[k] {
                        continue;
                    }
                    let v = iou(&preds[pi].interval, &truths[ti].interval);
                    if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                        best = Some((k, v));
                    }
                }
                if let Some((k, v)) = best {
                    taken[k] = true;
                    matches.push(MatchPair {
                        frame: f,
                        prediction: pi,
                        truth: t_idx[k],
                        event_type: ty.to_string(),
                        iou: v,
                    });
                }
            }
        }
    }

    let total_pred: usize = n_pred.values().sum();
    let total_truth: usize = n_truth.values().sum();
    let tp_at = |t: f64, ty: Option<&str>| {
        matches
            .iter()
            .filter(|m| ty.is_none_or(|ty| m.event_type == ty) && m.iou >= t)
            .count()
    };
    let overall = thresholds
        .iter()
        .map(|&t| ThresholdMetrics::from_counts(t, tp_at(t, None), total_pred, total_truth))
        .collect();
    let per_type = n_pred
        .keys()
        .chain(n_truth.keys())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|ty| {
            let np = n_pred.get(ty).copied().unwrap_or(0);
            let nt = n_truth.get(ty).copied().unwrap_or(0);
            let list = thresholds
                .iter()
                .map(|&t| ThresholdMetrics::from_counts(t, tp_at(t, Some(ty)), np, nt))
                .collect();
            (ty.clone(), list)
        })
        .collect();

    Ok(EvalReport {
        n_predictions: total_pred,
        n_truth: total_truth,
        overall,
        per_type,
        matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Interval;
    use proptest::prelude::*;

    fn det(a: usize, b: usize, ty: &str, c: f64) -> Detection {
        Detection::bare(Interval::of(a, b), ty, c)
    }

    fn gt(a: usize, b: usize, ty: &str) -> GroundTruthEvent {
        GroundTruthEvent::new(Interval::of(a, b), ty).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let truth = vec![gt(0, 10, "a"), gt(20, 40, "b")];
        let preds: Vec<Detection> = truth
            .iter()
            .map(|t| Detection::bare(t.interval, &t.event_type, 1.0))
            .collect();
        let r = evaluate(&preds, &truth, &DEFAULT_THRESHOLDS).unwrap();
        for m in r.overall.iter().chain(r.per_type.values().flatten()) {
            assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn two_truths_one_prediction() {
        let truth = vec![gt(0, 100, "a"), gt(500, 600, "a")];
        // IoU 60 / 100 = 0.6
        let preds = vec![det(0, 60, "a", 0.8)];
        let r = evaluate(&preds, &truth, &DEFAULT_THRESHOLDS).unwrap();
        let m5 = r.metrics(None, 0.5).unwrap();
        assert_eq!((m5.tp, m5.fp, m5.fn_), (1, 0, 1));
        assert_eq!(m5.precision, 1.0);
        assert_eq!(m5.recall, 0.5);
        assert!((m5.f1 - 2.0 / 3.0).abs() < 1e-12);
        let m9 = r.metrics(None, 0.9).unwrap();
        assert_eq!((m9.tp, m9.fp, m9.fn_), (0, 1, 2));
        assert_eq!(m9.f1, 0.0);
        assert!((r.matches[0].iou - 0.6).abs() < 1e-12);
    }

    #[test]
    fn no_predictions() {
        let r = evaluate(&[], &[gt(0, 10, "a")], &DEFAULT_THRESHOLDS).unwrap();
        let m = r.metrics(None, 0.5).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn bad_thresholds() {
        for t in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                evaluate(&[], &[], &[t]),
                Err(EvalError::BadThreshold(_))
            ));
        }
        assert!(evaluate(&[], &[], &[1.0]).is_ok());
    }

    #[test]
    fn types_never_cross_match() {
        let r = evaluate(
            &[det(0, 10, "a", 0.9)],
            &[gt(0, 10, "b")],
            &DEFAULT_THRESHOLDS,
        )
        .unwrap();
        assert!(r.matches.is_empty());
        assert_eq!(r.metrics(None, 0.5).unwrap().f1, 0.0);
    }

    #[test]
    fn higher_confidence_claims_first() {
        let truth = vec![gt(0, 100, "a")];
        let preds = vec![det(0, 95, "a", 0.4), det(0, 60, "a", 0.9)];
        let r = evaluate(&preds, &truth, &[0.5]).unwrap();
        assert_eq!(r.matches.len(), 1);
        assert_eq!(r.matches[0].prediction, 1);
    }

    #[test]
    fn table_lists_every_scope() {
        let r = evaluate(&[det(0, 10, "a", 0.9)], &[gt(0, 10, "a")], &[0.5, 0.9]).unwrap();
        let t = r.to_table();
        assert_eq!(t.lines().count(), 1 + 2 + 2);
        assert!(t.contains("all"));
    }

    fn arb_events() -> impl Strategy<Value = Vec<(usize, usize, bool, f64)>> {
        prop::collection::vec((0usize..200, 1usize..60, any::<bool>(), 0.0..1.0f64), 0..8)
    }

    proptest! {
        #[test]
        fn invariants(preds in arb_events(), truths in arb_events()) {
            let ty = |b: bool| if b { "a" } else { "b" };
            let preds: Vec<Detection> = preds.iter().map(|&(a, l, t, c)| det(a, a + l, ty(t), c)).collect();
            let truths: Vec<GroundTruthEvent> = truths.iter().map(|&(a, l, t, _)| gt(a, a + l, ty(t))).collect();
            let r = evaluate(&preds, &truths, &[0.1, 0.5, 0.9, 1.0]).unwrap();
            for m in &r.overall {
                prop_assert_eq!(m.tp + m.fp, preds.len());
                prop_assert_eq!(m.tp + m.fn_, truths.len());
                let f = if m.precision + m.recall == 0.0 { 0.0 } else { 2.0 * m.precision * m.recall / (m.precision + m.recall) };
                prop_assert_eq!(m.f1, f);
            }
            for w in r.overall.windows(2) {
                prop_assert!(w[1].f1 <= w[0].f1);
            }
            for m in &r.matches {
                prop_assert_eq!(&preds[m.prediction].event_type, &truths[m.truth].event_type);
            }
            let own: Vec<Detection> = truths.iter().map(|t| Detection::bare(t.interval, &t.event_type, 1.0)).collect();
            let s = evaluate(&own, &truths, &[0.5, 0.9]).unwrap();
            if !truths.is_empty() {
                for m in &s.overall {
                    prop_assert_eq!(m.f1, 1.0);
                }
            }
        }
    }
}
