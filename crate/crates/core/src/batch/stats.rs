//! Batch and triangle accounting, naive versus instanced.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::plan::Batch;
use crate::error::{ConfigError, SceneError};
use crate::scene::RenderItem;

/// Triangle count per mesh id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, u64>", into = "BTreeMap<String, u64>")]
pub struct MeshLibrary {
    triangles: BTreeMap<String, u64>,
}

impl MeshLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, mesh_id: impl Into<String>, triangles: u64) -> Result<(), ConfigError> {
        let mesh_id = mesh_id.into();
        if triangles == 0 {
            return Err(ConfigError::Scene(format!("mesh `{mesh_id}` must have a positive triangle count")));
        }
        self.triangles.insert(mesh_id, triangles);
        Ok(())
    }

    pub fn triangles(&self, mesh_id: &str) -> Result<u64, SceneError> {
        self.triangles
            .get(mesh_id)
            .copied()
            .ok_or_else(|| SceneError::UnknownMesh(mesh_id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.triangles.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Triangle counts for the default element meshes.
    pub fn defaults() -> Self {
        use crate::scene::build::meshes;
        let mut lib = Self::new();
        for (id, tris) in [
            (meshes::CHASSIS_GPU, 412),
            (meshes::CHASSIS_CPU, 236),
            (meshes::BAR, 12),
            (meshes::OUTLINE_NODE, 48),
            (meshes::OUTLINE_GPU, 24),
        ] {
            lib.insert(id, tris).expect("positive");
        }
        lib
    }
}

impl TryFrom<BTreeMap<String, u64>> for MeshLibrary {
    type Error = ConfigError;

    fn try_from(map: BTreeMap<String, u64>) -> Result<Self, Self::Error> {
        let mut lib = Self::new();
        for (k, v) in map {
            lib.insert(k, v)?;
        }
        Ok(lib)
    }
}

impl From<MeshLibrary> for BTreeMap<String, u64> {
    fn from(lib: MeshLibrary) -> Self {
        lib.triangles
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SceneStats {
    /// Draws submitted: one per batch.
    pub batch_count: u64,
    /// Batches holding more than one instance.
    pub instanced_batch_count: u64,
    /// Render item count.
    pub potential_draw_calls: u64,
    pub triangle_count: u64,
    /// Values clamped while parsing the source frame.
    pub clamp_count: u64,
    /// Source rows skipped as malformed.
    pub row_error_count: u64,
}

impl SceneStats {
    pub fn with_ingest_counters(mut self, clamp_count: u64, row_error_count: u64) -> Self {
        self.clamp_count = clamp_count;
        self.row_error_count = row_error_count;
        self
    }
}

/// Pre-instancing baseline: every item is its own draw.
pub fn naive_stats(items: &[RenderItem], lib: &MeshLibrary) -> Result<SceneStats, SceneError> {
    let mut triangle_count = 0;
    for item in items {
        triangle_count += lib.triangles(&item.mesh_id)?;
    }
    let n = items.len() as u64;
    Ok(SceneStats {
        batch_count: n,
        instanced_batch_count: 0,
        potential_draw_calls: n,
        triangle_count,
        ..Default::default()
    })
}

pub fn scene_stats(batches: &[Batch], lib: &MeshLibrary) -> Result<SceneStats, SceneError> {
    let mut stats = SceneStats {
        batch_count: batches.len() as u64,
        ..Default::default()
    };
    for b in batches {
        let n = b.instances.len() as u64;
        stats.triangle_count += lib.triangles(&b.mesh_id)? * n;
        stats.potential_draw_calls += n;
        if n > 1 {
            stats.instanced_batch_count += 1;
        }
    }
    Ok(stats)
}

/// Naive-versus-instanced comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub naive: SceneStats,
    pub instanced: SceneStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReportRow<'a> {
    metric: &'a str,
    naive: u64,
    instanced: u64,
    multiplier: Option<f64>,
}

fn multiplier(naive: u64, instanced: u64) -> Option<f64> {
    (naive != 0).then(|| instanced as f64 / naive as f64)
}

fn format_multiplier(m: Option<f64>) -> String {
    match m {
        // two significant digits once the ratio drops below 0.01
        Some(m) if m > 0.0 && m < 0.01 => {
            let places = (-m.log10().floor()) as usize + 1;
            format!("x{m:.places$}")
        }
        Some(m) => format!("x{m:.2}"),
        None => "n/a".into(),
    }
}

impl StatsReport {
    fn rows(&self) -> [ReportRow<'static>; 3] {
        let row = |metric, naive, instanced| ReportRow {
            metric,
            naive,
            instanced,
            multiplier: multiplier(naive, instanced),
        };
        [
            row("Batches", self.naive.batch_count, self.instanced.batch_count),
            row("Triangles", self.naive.triangle_count, self.instanced.triangle_count),
            row(
                "Potential draw calls",
                self.naive.potential_draw_calls,
                self.instanced.potential_draw_calls,
            ),
        ]
    }

    /// Plain-text table: one row per metric, naive and instanced columns
    /// and their ratio.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Batch and Triangle Counts per Frame");
        let _ = writeln!(out, "{:<22}{:>12}{:>12}{:>12}", "", "naive", "instanced", "Multiplier");
        for r in self.rows() {
            let _ = writeln!(
                out,
                "{:<22}{:>12}{:>12}{:>12}",
                r.metric,
                r.naive,
                r.instanced,
                format_multiplier(r.multiplier)
            );
        }
        let _ = writeln!(
            out,
            "instanced batches with more than one member: {}",
            self.instanced.instanced_batch_count
        );
        let _ = writeln!(
            out,
            "ingest: {} clamped values, {} row errors",
            self.instanced.clamp_count, self.instanced.row_error_count
        );
        out
    }

    /// One JSON object per metric row, then a summary object.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in self.rows() {
            out.push_str(&serde_json::to_string(&r).expect("serializable"));
            out.push('\n');
        }
        let summary = serde_json::json!({
            "metric": "summary",
            "naive": self.naive,
            "instanced": self.instanced,
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}
