//! One tick of the live pipeline: condition, encode, plan, diff.
//!
//! Workers do the per-node encoding (see `SceneBuilder::build`); the
//! pipeline then commits the whole tick at once so consumers only ever see
//! complete scenes or complete deltas.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::batch::{plan_batches, scene_stats, Batch, BatchSummary, MeshLibrary, SceneStats};
use crate::error::TwinError;
use crate::ingest::{condition, Alert, AlertRule};
use crate::model::SnapshotFrame;
use crate::scene::{diff_updates, RenderPropertyUpdate, Scene, SceneBuilder};

/// What changed in the scene this tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneChange {
    /// First tick or a structural change: the whole scene.
    Full { scene: Arc<Scene>, batches: Vec<BatchSummary> },
    Delta { updates: Vec<RenderPropertyUpdate> },
}

#[derive(Debug, Clone)]
pub struct Tick {
    pub seq: u64,
    pub timestamp: i64,
    /// Conditioned frame (alerts merged into nodes).
    pub frame: Arc<SnapshotFrame>,
    pub alerts: Vec<Alert>,
    pub changed: BTreeSet<String>,
    pub change: SceneChange,
    pub stats: SceneStats,
}

pub struct FramePipeline {
    builder: SceneBuilder,
    rules: Vec<AlertRule>,
    meshes: MeshLibrary,
    previous_raw: Option<SnapshotFrame>,
    scene: Arc<Scene>,
    batches: Vec<Batch>,
    seq: u64,
}

impl FramePipeline {
    pub fn new(builder: SceneBuilder, rules: Vec<AlertRule>, meshes: MeshLibrary) -> Self {
        Self {
            builder,
            rules,
            meshes,
            previous_raw: None,
            scene: Arc::new(Scene::default()),
            batches: Vec::new(),
            seq: 0,
        }
    }

    pub fn scene(&self) -> &Arc<Scene> {
        &self.scene
    }

    pub fn batches(&self) -> &[Batch] {
        &self.batches
    }

    pub fn builder(&self) -> &SceneBuilder {
        &self.builder
    }

    pub fn meshes(&self) -> &MeshLibrary {
        &self.meshes
    }

    /// Number of ticks committed so far.
    pub fn seq(&self) -> u64 {
        self.seq
    }

    /// Runs one tick. On error nothing is committed.
    pub fn step(&mut self, frame: SnapshotFrame) -> Result<Tick, TwinError> {
        let conditioned = condition(&frame, &self.rules, self.previous_raw.as_ref());
        let scene = self.builder.build(&conditioned.frame)?;
        let batches = plan_batches(&scene.item_list())?;
        let stats = scene_stats(&batches, &self.meshes)?;
        let first = self.seq == 0;
        let change = match diff_updates(&self.scene, &scene) {
            Ok(updates) if !first => SceneChange::Delta { updates },
            _ => SceneChange::Full {
                scene: Arc::new(scene.clone()),
                batches: batches.iter().map(BatchSummary::from).collect(),
            },
        };
        self.scene = match &change {
            SceneChange::Full { scene, .. } => scene.clone(),
            SceneChange::Delta { .. } => Arc::new(scene),
        };
        self.batches = batches;
        self.previous_raw = Some(frame);
        self.seq += 1;
        Ok(Tick {
            seq: self.seq,
            timestamp: conditioned.frame.timestamp,
            frame: Arc::new(conditioned.frame),
            alerts: conditioned.alerts,
            changed: conditioned.changed,
            change,
            stats,
        })
    }
}
