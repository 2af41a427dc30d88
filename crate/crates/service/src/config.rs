use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twin_core::history::Retention;
use twin_core::ingest::SimulatorConfig;

use crate::error::ServiceError;

/// Environment variable that overrides `bind`.
pub const BIND_ENV: &str = "TXTWIN_BIND";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    Simulator(SimulatorConfig),
    /// Snapshot files dropped into `dir`, processed in name order.
    Watch {
        dir: PathBuf,
        /// Snapshot schema file; without it the header is inferred.
        #[serde(default)]
        schema: Option<PathBuf>,
        /// Treat `.csv` files as comma-delimited.
        #[serde(default = "yes")]
        infer_delimiter: bool,
    },
}

fn yes() -> bool {
    true
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig::Simulator(SimulatorConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    /// Broadcast rate. Source frames arriving faster are coalesced.
    pub tick_hz: f64,
    /// Scene config file; built-in defaults when absent.
    pub scene: Option<PathBuf>,
    /// Alert rules file; built-in defaults when absent.
    pub rules: Option<PathBuf>,
    /// Persist history here; in memory when absent.
    pub history_dir: Option<PathBuf>,
    pub retention: Retention,
    /// Per-subscriber packet buffer before a resync is forced.
    pub subscriber_buffer: usize,
    pub source: SourceConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:7878".into(),
            tick_hz: 1.0,
            scene: None,
            rules: None,
            history_dir: None,
            retention: Retention::default(),
            subscriber_buffer: 64,
            source: SourceConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    /// Loads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.scene.as_mut().map(fix);
        cfg.rules.as_mut().map(fix);
        cfg.history_dir.as_mut().map(fix);
        if let SourceConfig::Watch { dir, schema, .. } = &mut cfg.source {
            fix(dir);
            schema.as_mut().map(fix);
        }
        Ok(cfg)
    }

    /// Applies the bind-address environment override.
    pub fn with_env(mut self) -> Self {
        if let Ok(bind) = std::env::var(BIND_ENV) {
            if !bind.trim().is_empty() {
                self.bind = bind.trim().to_string();
            }
        }
        self
    }

    pub fn validate(&self) -> Result<SocketAddr, ServiceError> {
        if !(self.tick_hz > 0.0 && self.tick_hz.is_finite()) {
            return Err(ServiceError::Config("tick_hz must be positive".into()));
        }
        if self.subscriber_buffer == 0 {
            return Err(ServiceError::Config("subscriber_buffer must be positive".into()));
        }
        if let SourceConfig::Simulator(sim) = &self.source {
            sim.validate().map_err(ServiceError::Config)?;
        }
        self.bind
            .parse()
            .map_err(|_| ServiceError::Config(format!("invalid bind address `{}`", self.bind)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_watch_source() {
        let cfg = ServiceConfig::from_toml(
            r#"
bind = "0.0.0.0:9000"
tick_hz = 4.0
[source]
kind = "watch"
dir = "incoming"
"#,
        )
        .unwrap();
        assert_eq!(cfg.tick_hz, 4.0);
        assert!(matches!(cfg.source, SourceConfig::Watch { infer_delimiter: true, .. }));
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn simulator_fields_inline() {
        let cfg = ServiceConfig::from_toml("[source]\nkind = \"simulator\"\nnode_count = 3\nseed = 5\n").unwrap();
        match cfg.source {
            SourceConfig::Simulator(s) => assert_eq!((s.node_count, s.seed), (3, 5)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ServiceConfig::from_toml("bogus = 1").is_err());
        let cfg = ServiceConfig { bind: "nowhere".into(), ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ServiceConfig { tick_hz: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("svc.toml");
        std::fs::write(&path, "scene = \"scene.toml\"\n[source]\nkind = \"watch\"\ndir = \"in\"\n").unwrap();
        let cfg = ServiceConfig::load(&path).unwrap();
        assert_eq!(cfg.scene.unwrap(), dir.path().join("scene.toml"));
        match cfg.source {
            SourceConfig::Watch { dir: d, .. } => assert_eq!(d, dir.path().join("in")),
            other => panic!("{other:?}"),
        }
    }
}
