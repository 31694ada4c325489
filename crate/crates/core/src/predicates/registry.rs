use std::collections::BTreeMap;
use std::fmt;

use super::{PredicateError, SegmentFeatures};
use crate::schema::{ParamValue, PredicateRef};

/// Scoring rule: parameters (in signature order) and features to a degree.
pub type Rule = fn(&[f64], &SegmentFeatures) -> f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub min: f64,
    pub max: f64,
}

const fn param(name: &'static str, default: f64) -> ParamSpec {
    ParamSpec {
        name,
        default,
        min: 1e-6,
        max: 1e3,
    }
}

const fn fraction(name: &'static str, default: f64) -> ParamSpec {
    ParamSpec {
        name,
        default,
        min: 1e-6,
        max: 1.0,
    }
}

#[derive(Clone)]
pub struct PredicateDef {
    pub name: String,
    pub params: Vec<ParamSpec>,
    pub rule: Rule,
}

impl fmt::Debug for PredicateDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredicateDef")
            .field("name", &self.name)
            .field("params", &self.params)
            .finish()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Soft `x > threshold`, with slope `|threshold| / 4`.
pub fn g_high(x: f64, threshold: f64) -> f64 {
    logistic((x - threshold) / (threshold.abs() / 4.0))
}

/// Soft `x < threshold`.
pub fn g_low(x: f64, threshold: f64) -> f64 {
    1.0 - g_high(x, threshold)
}

/// Snaps a degree onto a 1e-9 grid so that bit-level noise from affine
/// rescaling of a channel cannot reorder otherwise equal candidates.
pub fn quantize_mu(mu: f64) -> f64 {
    ((mu * 1e9).round() / 1e9).clamp(0.0, 1.0)
}

fn stable(p: &[f64], f: &SegmentFeatures) -> f64 {
    g_low(f.norm_slope.abs(), p[0]) * g_low(f.cv, p[1])
}

fn rise(p: &[f64], f: &SegmentFeatures) -> f64 {
    g_high(f.norm_slope, p[0]) * g_high(f.r2_linear, p[1])
}

fn fall(p: &[f64], f: &SegmentFeatures) -> f64 {
    g_low(f.norm_slope, -p[0]) * g_high(f.r2_linear, p[1])
}

fn spike(p: &[f64], f: &SegmentFeatures) -> f64 {
    g_high(f.peak_prominence, p[0]) * g_low(f.net_delta.abs(), p[1])
}

fn drop(p: &[f64], f: &SegmentFeatures) -> f64 {
    g_low(f.net_delta, -p[0]) * g_low(f.norm_slope, -p[1])
}

fn plateau(p: &[f64], f: &SegmentFeatures) -> f64 {
    stable(p, f) * g_low(f.curvature.abs(), p[2])
}

fn square_wave(p: &[f64], f: &SegmentFeatures) -> f64 {
    spike(p, f) * g_high(f.cv, p[2])
}

fn concave_rise(p: &[f64], f: &SegmentFeatures) -> f64 {
    rise(p, f) * g_low(f.curvature, -p[2])
}

/// A modest net gain whose rate of change decreases.
fn recover_slightly(p: &[f64], f: &SegmentFeatures) -> f64 {
    g_high(f.net_delta, p[0]) * g_low(f.net_delta, p[1]) * g_low(f.curvature, -p[2])
}

/// Predicate vocabulary with parameter signatures and defaults.
#[derive(Debug, Clone)]
pub struct PredicateRegistry {
    entries: BTreeMap<String, PredicateDef>,
}

impl Default for PredicateRegistry {
    fn default() -> Self {
        let mut reg = Self {
            entries: BTreeMap::new(),
        };
        let defs: [(&str, Vec<ParamSpec>, Rule); 9] = [
            (
                "stable",
                vec![param("slope", 0.15), param("noise", 0.10)],
                stable,
            ),
            (
                "rise",
                vec![param("slope", 0.3), fraction("linearity", 0.6)],
                rise,
            ),
            (
                "fall",
                vec![param("slope", 0.3), fraction("linearity", 0.6)],
                fall,
            ),
            (
                "spike",
                vec![param("prominence", 1.0), param("return", 0.3)],
                spike,
            ),
            ("drop", vec![param("depth", 0.5), param("slope", 0.3)], drop),
            (
                "plateau",
                vec![
                    param("slope", 0.15),
                    param("noise", 0.10),
                    param("curvature", 0.5),
                ],
                plateau,
            ),
            (
                "square_wave",
                vec![
                    param("prominence", 1.0),
                    param("return", 0.3),
                    param("spread", 0.3),
                ],
                square_wave,
            ),
            (
                "concave_rise",
                vec![
                    param("slope", 0.3),
                    fraction("linearity", 0.6),
                    param("curvature", 0.05),
                ],
                concave_rise,
            ),
            (
                "recover_slightly",
                vec![
                    param("min_gain", 0.1),
                    param("max_gain", 1.0),
                    param("curvature", 0.05),
                ],
                recover_slightly,
            ),
        ];
        for (name, params, rule) in defs {
            reg.register(PredicateDef {
                name: name.to_string(),
                params,
                rule,
            });
        }
        reg
    }
}

impl PredicateRegistry {
    /// Adds or replaces a predicate.
    pub fn register(&mut self, def: PredicateDef) {
        self.entries.insert(def.name.clone(), def);
    }

    pub fn get(&self, name: &str) -> Option<&PredicateDef> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Changes the default of one parameter.
    pub fn set_default(
        &mut self,
        predicate: &str,
        name: &str,
        value: f64,
    ) -> Result<(), PredicateError> {
        let def = self
            .entries
            .get_mut(predicate)
            .ok_or_else(|| PredicateError::UnknownPredicate(predicate.to_string()))?;
        let bad = || PredicateError::BadParameter {
            predicate: predicate.to_string(),
            name: name.to_string(),
        };
        let spec = def
            .params
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(bad)?;
        if !(value.is_finite() && value >= spec.min && value <= spec.max) {
            return Err(bad());
        }
        spec.default = value;
        Ok(())
    }

    /// Checks a reference against the signature and binds its parameters.
    pub fn resolve(&self, pred: &PredicateRef) -> Result<ResolvedPredicate, PredicateError> {
        let def = self
            .entries
            .get(&pred.name)
            .ok_or_else(|| PredicateError::UnknownPredicate(pred.name.clone()))?;
        let bad = |name: &str| PredicateError::BadParameter {
            predicate: pred.name.clone(),
            name: name.to_string(),
        };
        if let Some(unknown) = pred
            .params
            .keys()
            .find(|k| !def.params.iter().any(|p| p.name == k.as_str()))
        {
            return Err(bad(unknown));
        }
        let mut values = Vec::with_capacity(def.params.len());
        for spec in &def.params {
            let v = match pred.params.get(spec.name) {
                None => spec.default,
                Some(ParamValue::Number(v)) => *v,
                Some(ParamValue::Ident(_)) => return Err(bad(spec.name)),
            };
            if !(v.is_finite() && v >= spec.min && v <= spec.max) {
                return Err(bad(spec.name));
            }
            values.push(v);
        }
        Ok(ResolvedPredicate {
            rule: def.rule,
            values,
        })
    }
}

/// A predicate with its parameters bound; cheap to apply repeatedly.
#[derive(Clone)]
pub struct ResolvedPredicate {
    rule: Rule,
    values: Vec<f64>,
}

impl fmt::Debug for ResolvedPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResolvedPredicate")
            .field("values", &self.values)
            .finish()
    }
}

impl ResolvedPredicate {
    pub fn score(&self, feats: &SegmentFeatures) -> f64 {
        quantize_mu((self.rule)(&self.values, feats))
    }
}

/// Degree to which the features match the predicate under the default
/// registry.
pub fn score_predicate(
    pred: &PredicateRef,
    feats: &SegmentFeatures,
) -> Result<f64, PredicateError> {
    thread_local! {
        static DEFAULT: PredicateRegistry = PredicateRegistry::default();
    }
    DEFAULT.with(|reg| Ok(reg.resolve(pred)?.score(feats)))
}
