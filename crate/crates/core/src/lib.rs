//! Event Logic Tree engine.
//!
//! Event types are written as trees of morphological primitives joined by
//! temporal operators (SEQ, SYNC, GUARD, OR). Detection searches for the
//! interval assignment that maximizes the fuzzy confidence at the root.

pub mod detector;
pub mod engine;
pub mod eval;
pub mod model;
pub mod predicates;
pub mod schema;
pub mod search;

pub use detector::{detect, Detection, DetectorConfig};
pub use engine::{EngineError, Instance, InstanceTree, OperatorParams};
pub use model::{GroundTruthEvent, Interval, ModelError, SeriesFrame};
pub use schema::{EventCatalog, Node, Operator, SchemaError, SchemaTree};
