//! Shared service state and the single committer that publishes ticks.

use std::sync::{Arc, Mutex, RwLock};

use tokio::sync::broadcast;
use tracing::warn;
use twin_core::batch::{naive_stats, BatchSummary, MeshLibrary, StatsReport};
use twin_core::history::HistoryStore;
use twin_core::ingest::{condition, Alert, AlertRule};
use twin_core::pipeline::{FramePipeline, SceneChange};
use twin_core::scene::{Scene, SceneBuilder};
use twin_core::{SnapshotFrame, TwinError};

use crate::packet::FramePacket;
use crate::source::FrameSource;

/// A packet serialized once for every subscriber.
#[derive(Debug)]
pub struct Published {
    pub seq: u64,
    pub json: String,
}

/// State of the last committed tick.
#[derive(Debug, Clone, Default)]
pub struct LiveState {
    pub seq: u64,
    pub timestamp: i64,
    pub frame: Arc<SnapshotFrame>,
    pub scene: Arc<Scene>,
    pub batches: Arc<Vec<BatchSummary>>,
    pub alerts: Arc<Vec<Alert>>,
    pub report: Option<StatsReport>,
}

pub struct AppState {
    pub live: RwLock<LiveState>,
    pub history: RwLock<HistoryStore>,
    pub builder: Arc<SceneBuilder>,
    pub rules: Arc<Vec<AlertRule>>,
    pub meshes: MeshLibrary,
    pub tx: broadcast::Sender<Arc<Published>>,
    full_cache: Mutex<Option<Arc<Published>>>,
}

impl AppState {
    pub fn new(history: HistoryStore, builder: SceneBuilder, rules: Vec<AlertRule>, meshes: MeshLibrary, buffer: usize) -> Self {
        let (tx, _) = broadcast::channel(buffer);
        Self {
            live: RwLock::new(LiveState::default()),
            history: RwLock::new(history),
            builder: Arc::new(builder),
            rules: Arc::new(rules),
            meshes,
            tx,
            full_cache: Mutex::new(None),
        }
    }

    pub fn live(&self) -> LiveState {
        self.live.read().expect("live lock").clone()
    }

    /// Full-scene packet for the current tick, or `None` before the first
    /// commit.
    pub fn full_packet(&self) -> Option<Arc<Published>> {
        let live = self.live();
        if live.seq == 0 {
            return None;
        }
        let mut cache = self.full_cache.lock().expect("cache lock");
        if let Some(p) = cache.as_ref().filter(|p| p.seq == live.seq) {
            return Some(p.clone());
        }
        let packet = FramePacket {
            seq: live.seq,
            timestamp: live.timestamp,
            change: SceneChange::Full {
                scene: live.scene.clone(),
                batches: (*live.batches).clone(),
            },
            alerts: (*live.alerts).clone(),
            stats: live.report.map(|r| r.instanced).unwrap_or_default(),
        };
        let published = Arc::new(Published {
            seq: live.seq,
            json: packet.to_json(),
        });
        *cache = Some(published.clone());
        Some(published)
    }
}

/// Runs the source and pipeline. Owned by one task; the only writer of
/// `AppState::live`.
pub struct Committer {
    pub source: FrameSource,
    pub pipeline: FramePipeline,
}

impl Committer {
    /// Polls the source and commits the newest frame. Older frames from the
    /// same poll go to history only. Blocking; run off the async runtime.
    pub fn tick(&mut self, state: &AppState) -> Result<bool, TwinError> {
        let mut frames = self.source.poll();
        let latest = state.history.read().expect("history lock").latest().map(|f| f.timestamp);
        frames.retain(|f| {
            let ok = latest.is_none_or(|t| f.frame.timestamp > t);
            if !ok {
                warn!(timestamp = f.frame.timestamp, "dropping frame that is not newer than history");
            }
            ok
        });
        let Some(last) = frames.pop() else { return Ok(false) };
        {
            let mut history = state.history.write().expect("history lock");
            for f in frames.iter().chain([&last]) {
                history.append(condition(&f.frame, &state.rules, None).frame)?;
            }
        }
        let clamps = frames.iter().chain([&last]).map(|f| f.clamp_count).sum();
        let row_errors = frames.iter().chain([&last]).map(|f| f.row_errors).sum();
        let tick = self.pipeline.step(last.frame)?;
        let stats = tick.stats.with_ingest_counters(clamps, row_errors);
        let report = StatsReport {
            naive: naive_stats(&self.pipeline.scene().item_list(), &state.meshes)?,
            instanced: stats,
        };

        let mut packet = FramePacket::from_tick(&tick);
        packet.stats = stats;
        let published = Arc::new(Published {
            seq: tick.seq,
            json: packet.to_json(),
        });
        let batches = match &tick.change {
            SceneChange::Full { batches, .. } => Arc::new(batches.clone()),
            SceneChange::Delta { .. } => state.live.read().expect("live lock").batches.clone(),
        };
        // Publish under the write lock so a subscriber that snapshots the
        // live state either sees this tick or receives its packet.
        let mut live = state.live.write().expect("live lock");
        *live = LiveState {
            seq: tick.seq,
            timestamp: tick.timestamp,
            frame: tick.frame.clone(),
            scene: self.pipeline.scene().clone(),
            batches,
            alerts: Arc::new(tick.alerts),
            report: Some(report),
        };
        let _ = state.tx.send(published);
        Ok(true)
    }
}
