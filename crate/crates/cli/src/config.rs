//! The `elt.toml` run configuration.

use std::collections::BTreeMap;
use std::path::Path;

use elt_core::detector::DetectorConfig;
use elt_core::eval::{SyntheticSpec, DEFAULT_THRESHOLDS};
use elt_core::predicates::PredicateRegistry;
use elt_core::search::SearchConfig;
use elt_core::OperatorParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming a config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "ELT_CONFIG";

/// Operator overrides. Unset fields take the length-scaled defaults of the
/// series being processed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSection {
    pub delta: Option<usize>,
    pub kappa: Option<f64>,
    pub sigma: Option<f64>,
    pub epsilon: Option<usize>,
    pub compactness_tolerance: Option<usize>,
}

impl OperatorSection {
    pub fn resolve(&self, len: usize) -> OperatorParams {
        let d = OperatorParams::for_length(len);
        OperatorParams {
            delta: self.delta.unwrap_or(d.delta),
            kappa: self.kappa.unwrap_or(d.kappa),
            sigma: self.sigma.unwrap_or(d.sigma),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            compactness_tolerance: self
                .compactness_tolerance
                .unwrap_or(d.compactness_tolerance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub min_confidence: f64,
    pub nms_iou: f64,
    pub exclusive_groups: Vec<Vec<String>>,
    pub window_divisors: Vec<usize>,
    pub refine: bool,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorConfig::default();
        Self {
            min_confidence: d.min_confidence,
            nms_iou: d.nms_iou,
            exclusive_groups: d.exclusive_groups,
            window_divisors: d.window_divisors,
            refine: d.refine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub thresholds: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub operator: OperatorSection,
    /// Predicate default overrides, e.g. `[predicates.rise] slope = 0.4`.
    pub predicates: BTreeMap<String, BTreeMap<String, f64>>,
    pub search: SearchConfig,
    pub detector: DetectorSection,
    pub eval: EvalSection,
    pub synth: SyntheticSpec,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads `path`, else the file named by `ELT_CONFIG`, else defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let env = std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty());
        let path = path.map(Path::to_path_buf).or_else(|| env.map(Into::into));
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = crate::read_text(&path)?;
        let cfg = Self::from_toml(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.registry()?;
        Ok(cfg)
    }

    /// The default predicate registry with this config's overrides applied.
    pub fn registry(&self) -> Result<PredicateRegistry, CliError> {
        let mut reg = PredicateRegistry::default();
        for (pred, params) in &self.predicates {
            for (name, value) in params {
                reg.set_default(pred, name, *value)
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        Ok(reg)
    }

    /// Detector settings for a series of `len` samples.
    pub fn detector(&self, len: usize) -> Result<DetectorConfig, CliError> {
        let d = &self.detector;
        let cfg = DetectorConfig {
            min_confidence: d.min_confidence,
            nms_iou: d.nms_iou,
            exclusive_groups: d.exclusive_groups.clone(),
            window_divisors: d.window_divisors.clone(),
            refine: d.refine,
            operator: Some(self.operator.resolve(len)),
            search: self.search.clone(),
        };
        cfg.validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::from_toml("[search]\nbeam = 3\n").is_err());
        assert!(Config::from_toml("colour = 1\n").is_err());
    }

    #[test]
    fn partial_operator_override() {
        let c = Config::from_toml("[operator]\nkappa = 0.5\n").unwrap();
        let p = c.operator.resolve(1000);
        assert_eq!(p.kappa, 0.5);
        assert_eq!(p.delta, 50);
    }

    #[test]
    fn predicate_overrides_checked() {
        let c = Config::from_toml("[predicates.rise]\nslope = 0.4\n").unwrap();
        assert!(c.registry().is_ok());
        let bad = Config::from_toml("[predicates.rise]\nwobble = 0.4\n").unwrap();
        assert!(bad.registry().is_err());
    }

    #[test]
    fn out_of_range_detector_values() {
        let c = Config::from_toml("[detector]\nnms_iou = 1.5\n").unwrap();
        assert!(c.detector(100).is_err());
    }
}
