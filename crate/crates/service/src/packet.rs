//! Wire packets for `/live` and replay streams.

use serde::{Deserialize, Serialize};
use twin_core::batch::SceneStats;
use twin_core::ingest::Alert;
use twin_core::pipeline::{SceneChange, Tick};

/// One committed tick as seen by a subscriber. A `full` packet carries the
/// whole scene and its batches; a `delta` packet carries property updates
/// against the subscriber's current scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePacket {
    pub seq: u64,
    pub timestamp: i64,
    #[serde(flatten)]
    pub change: SceneChange,
    pub alerts: Vec<Alert>,
    pub stats: SceneStats,
}

impl FramePacket {
    pub fn from_tick(tick: &Tick) -> Self {
        Self {
            seq: tick.seq,
            timestamp: tick.timestamp,
            change: tick.change.clone(),
            alerts: tick.alerts.clone(),
            stats: tick.stats,
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self.change, SceneChange::Full { .. })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("packets serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use twin_core::batch::MeshLibrary;
    use twin_core::ingest::{default_rules, Simulator, SimulatorConfig};
    use twin_core::pipeline::FramePipeline;
    use twin_core::scene::SceneBuilder;

    #[test]
    fn json_round_trip() {
        let mut sim = Simulator::new(SimulatorConfig { node_count: 3, ..Default::default() });
        let mut p = FramePipeline::new(SceneBuilder::with_defaults(), default_rules(), MeshLibrary::defaults());
        for _ in 0..3 {
            let packet = FramePacket::from_tick(&p.step(sim.next_frame()).unwrap());
            let back: FramePacket = serde_json::from_str(&packet.to_json()).unwrap();
            assert_eq!(back, packet);
        }
        let v: serde_json::Value = serde_json::from_str(&FramePacket::from_tick(&p.step(sim.next_frame()).unwrap()).to_json()).unwrap();
        assert_eq!(v["kind"], "delta");
        assert!(v["updates"].is_array());
    }
}
