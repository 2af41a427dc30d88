//! Declarative scene configuration (TOML).
//!
//! ```toml
//! [palette]              # gradient stops, state colors, red region
//! [tolerances]           # outline temperatures
//! [layout]               # grid sizes, [[layout.rack]] entries
//! [templates.<id>]       # shader = "...", per-material params
//! [elements.<element>]   # mesh and template per element kind
//! [meshes]               # mesh id = triangle count
//! [cluster]              # simulator settings for offline stats, plus `tick`
//! ```
//!
//! Every section is optional and falls back to the built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::batch::{naive_stats, plan_batches, scene_stats, MeshLibrary, StatsReport};
use crate::error::{ConfigError, TwinError};
use crate::ingest::{condition, default_rules, SimulatorConfig};
use crate::model::SnapshotFrame;
use crate::scene::{ElementBindings, LayoutConfig, Palette, SceneBuilder, ShaderParams, TemplateRegistry, Tolerances};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    #[serde(flatten)]
    pub simulator: SimulatorConfig,
    /// Tick rendered by offline tools.
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub palette: Palette,
    pub tolerances: Tolerances,
    pub layout: LayoutConfig,
    /// Replaces the default template set when present.
    pub templates: Option<BTreeMap<String, ShaderParams>>,
    pub elements: ElementBindings,
    pub meshes: Option<MeshLibrary>,
    pub cluster: Option<ClusterConfig>,
}

impl SceneConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Scene(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, TwinError> {
        let text = std::fs::read_to_string(path).map_err(|e| TwinError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Scene(m) => ConfigError::Scene(format!("{}: {m}", path.display())).into(),
            other => other.into(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn template_registry(&self) -> Result<TemplateRegistry, ConfigError> {
        match &self.templates {
            Some(t) => TemplateRegistry::from_params(t.clone()),
            None => Ok(TemplateRegistry::defaults()),
        }
    }

    pub fn mesh_library(&self) -> MeshLibrary {
        self.meshes.clone().unwrap_or_else(MeshLibrary::defaults)
    }

    pub fn builder(&self) -> Result<SceneBuilder, TwinError> {
        Ok(SceneBuilder::new(
            self.layout.clone(),
            self.template_registry()?,
            self.elements.clone(),
            self.palette.clone(),
            self.tolerances,
        )?)
    }

    /// Simulator config from `[cluster]`, or the default population.
    pub fn simulator(&self) -> SimulatorConfig {
        self.cluster.as_ref().map(|c| c.simulator.clone()).unwrap_or_default()
    }

    /// Frame at the configured cluster tick.
    pub fn sample_frame(&self) -> Result<SnapshotFrame, ConfigError> {
        let sim = self.simulator();
        sim.validate().map_err(ConfigError::Scene)?;
        let tick = self.cluster.as_ref().map_or(0, |c| c.tick);
        Ok(crate::ingest::simulate_tick(&sim, tick))
    }

    /// Naive-versus-instanced statistics for the configured cluster.
    pub fn stats_report(&self) -> Result<StatsReport, TwinError> {
        let frame = self.sample_frame()?;
        let conditioned = condition(&frame, &default_rules(), None);
        let scene = self.builder()?.build(&conditioned.frame)?;
        let items = scene.item_list();
        let lib = self.mesh_library();
        let naive = naive_stats(&items, &lib)?;
        let instanced = scene_stats(&plan_batches(&items)?, &lib)?;
        Ok(StatsReport { naive, instanced })
    }
}
