//! Telemetry domain types shared by every stage of the pipeline.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    CpuOnly,
    GpuAccelerated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeState {
    Active,
    Idle,
    Off,
}

impl NodeState {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeState::Active => "active",
            NodeState::Idle => "idle",
            NodeState::Off => "off",
        }
    }
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "active" | "alloc" | "allocated" | "mixed" => Ok(NodeState::Active),
            "idle" => Ok(NodeState::Idle),
            "off" | "down" | "drain" | "drained" => Ok(NodeState::Off),
            other => Err(format!("unknown node state `{other}`")),
        }
    }
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::CpuOnly => "cpu_only",
            NodeKind::GpuAccelerated => "gpu_accelerated",
        }
    }
}

/// One GPU's readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpuTelemetry {
    pub gpu_index: u32,
    /// Fraction in `[0, 1]`.
    pub utilization: f64,
    pub mem_used_bytes: u64,
    pub mem_capacity_bytes: u64,
    pub power_draw_w: f64,
    pub temp_c: f64,
}

impl GpuTelemetry {
    /// Memory use as a fraction of capacity; zero when capacity is unknown.
    pub fn mem_fraction(&self) -> f64 {
        if self.mem_capacity_bytes == 0 {
            0.0
        } else {
            self.mem_used_bytes as f64 / self.mem_capacity_bytes as f64
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.utilization) {
            out.push(format!("gpu{} utilization {} outside [0,1]", self.gpu_index, self.utilization));
        }
        if self.mem_used_bytes > self.mem_capacity_bytes {
            out.push(format!("gpu{} memory used exceeds capacity", self.gpu_index));
        }
        if !(self.power_draw_w >= 0.0 && self.power_draw_w.is_finite()) {
            out.push(format!("gpu{} power {} is negative", self.gpu_index, self.power_draw_w));
        }
        if !self.temp_c.is_finite() {
            out.push(format!("gpu{} temperature is not finite", self.gpu_index));
        }
        out
    }
}

/// One node's metric snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTelemetry {
    pub node_name: String,
    pub kind: NodeKind,
    pub state: NodeState,
    pub cpu_load: f64,
    pub node_temp_c: f64,
    /// Alert ids, sorted and unique.
    #[serde(default)]
    pub alerts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job_id: Option<String>,
    #[serde(default)]
    pub gpus: Vec<GpuTelemetry>,
}

impl NodeTelemetry {
    /// Lists every broken type invariant; empty means the node is valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.cpu_load) {
            out.push(format!("{}: cpu_load {} outside [0,1]", self.node_name, self.cpu_load));
        }
        if !self.node_temp_c.is_finite() {
            out.push(format!("{}: node temperature is not finite", self.node_name));
        }
        match self.kind {
            NodeKind::CpuOnly if !self.gpus.is_empty() => {
                out.push(format!("{}: cpu_only node carries gpus", self.node_name))
            }
            NodeKind::GpuAccelerated if self.gpus.is_empty() => {
                out.push(format!("{}: gpu_accelerated node has no gpus", self.node_name))
            }
            _ => {}
        }
        if self.state == NodeState::Off {
            if self.cpu_load != 0.0 {
                out.push(format!("{}: off node has nonzero cpu_load", self.node_name));
            }
            if self.gpus.iter().any(|g| g.utilization != 0.0 || g.mem_used_bytes != 0 || g.power_draw_w != 0.0) {
                out.push(format!("{}: off node carries live gpu readings", self.node_name));
            }
        }
        for g in &self.gpus {
            out.extend(g.violations().into_iter().map(|v| format!("{}: {v}", self.node_name)));
        }
        out
    }
}

/// Facility sensor reading. Stored with frames but not drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvTelemetry {
    pub sensor_id: String,
    pub humidity_pct: f64,
    pub airflow: f64,
    pub temp_c: f64,
    pub timestamp: i64,
}

/// Immutable, timestamped map of node name to telemetry.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SnapshotFrame {
    /// Epoch milliseconds.
    pub timestamp: i64,
    pub nodes: BTreeMap<String, NodeTelemetry>,
    #[serde(default)]
    pub env: Vec<EnvTelemetry>,
}

impl SnapshotFrame {
    pub fn new(timestamp: i64) -> Self {
        Self {
            timestamp,
            ..Default::default()
        }
    }

    /// Inserts a node keyed by its name, replacing any previous entry.
    pub fn insert(&mut self, node: NodeTelemetry) {
        self.nodes.insert(node.node_name.clone(), node);
    }

    pub fn gpu_count(&self) -> usize {
        self.nodes.values().map(|n| n.gpus.len()).sum()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out: Vec<String> = self.nodes.values().flat_map(|n| n.violations()).collect();
        for e in &self.env {
            if !(0.0..=100.0).contains(&e.humidity_pct) {
                out.push(format!("{}: humidity {} outside [0,100]", e.sensor_id, e.humidity_pct));
            }
        }
        out
    }
}
