//! Instancing batches, their legality, and draw/triangle statistics.

pub mod legality;
pub mod plan;
pub mod stats;

pub use legality::{validate_batch_legality, LegalityReport, Violation};
pub use plan::{plan_batches, Batch, BatchSummary};
pub use stats::{naive_stats, scene_stats, MeshLibrary, SceneStats, StatsReport};
