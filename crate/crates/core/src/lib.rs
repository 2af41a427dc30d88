//! Core of a cluster digital twin: telemetry ingest and conditioning,
//! shader-style visual encoding, GPU-instancing batch planning, and a
//! time-indexed history over a sparse associative store.

pub mod assoc;
pub mod batch;
pub mod config;
pub mod error;
pub mod glob;
pub mod history;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod scene;

pub use assoc::{AssocStore, AssocTriple, Value};
pub use error::TwinError;
pub use model::{EnvTelemetry, GpuTelemetry, NodeKind, NodeState, NodeTelemetry, SnapshotFrame};
