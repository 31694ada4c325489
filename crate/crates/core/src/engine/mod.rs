//! Instantiated event trees and fuzzy confidence propagation.
//!
//! Confidences combine with the product T-norm under hard validity gates
//! (precedence, coherence, physical exclusivity) and soft alignment
//! penalties (IoU for SYNC/OR, boundary spill for GUARD).

mod eval;
mod instance;
mod ops;

pub use eval::{evaluate, evaluate_root, evaluate_root_capped, LeafSlot, NodeScore, Propagation};
pub use instance::{
    primitive_descendants, CompositeInstance, Instance, InstanceDoc, InstanceTree, NodeDoc,
    PrimitiveInstance, INSTANCE_FORMAT,
};
pub use ops::{
    collision, guard_penalty, score_and_k, score_guard, score_or, score_seq, score_sync, seq_gates,
    sync_penalty, ConjunctionGate,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::NodePath;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("instance tree does not match its schema at {0}")]
    ShapeMismatch(NodePath),
    #[error("GUARD at {0} needs exactly two children")]
    GuardArity(NodePath),
    #[error("leaf {index} has no assignment")]
    Unassigned { index: usize },
    #[error("invalid operator parameters: {0}")]
    BadParams(String),
    #[error("malformed instance document: {0}")]
    Document(String),
}

/// Operator hyperparameters, all in samples except `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorParams {
    /// SEQ coherence bound on the gap between consecutive children.
    pub delta: usize,
    /// SYNC/OR alignment tolerance.
    pub kappa: f64,
    /// GUARD spill temperature.
    pub sigma: f64,
    /// Overlap (in samples) below which two primitives on one channel do
    /// not collide.
    pub epsilon: usize,
    /// Longest internal gap a conjunctive composite may contain.
    pub compactness_tolerance: usize,
}

impl OperatorParams {
    /// Defaults scaled to a series of `len` samples: `delta = sigma = 5%`
    /// of the length, `kappa = 0.25`, `epsilon = 1`, and a compactness
    /// tolerance equal to `delta`.
    pub fn for_length(len: usize) -> Self {
        let delta = ((0.05 * len as f64).round() as usize).max(1);
        Self {
            delta,
            kappa: 0.25,
            sigma: (0.05 * len as f64).max(1.0),
            epsilon: 1,
            compactness_tolerance: delta,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(EngineError::BadParams(format!("kappa = {}", self.kappa)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(EngineError::BadParams(format!("sigma = {}", self.sigma)));
        }
        Ok(())
    }
}
