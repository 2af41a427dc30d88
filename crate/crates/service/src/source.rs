//! Frame sources: the simulator or a directory of snapshot files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::UNIX_EPOCH;

use tracing::warn;
use twin_core::error::SchemaError;
use twin_core::ingest::{parse_snapshot, ParseOutcome, Simulator, SnapshotSchema};
use twin_core::SnapshotFrame;

use crate::config::SourceConfig;
use crate::error::ServiceError;

#[derive(Debug, Clone)]
pub struct SourceFrame {
    pub frame: SnapshotFrame,
    pub clamp_count: u64,
    pub row_errors: u64,
}

pub enum FrameSource {
    Simulator { sim: Simulator, started: bool },
    Watch(WatchDir),
}

pub struct WatchDir {
    dir: PathBuf,
    schema: Option<SnapshotSchema>,
    infer_delimiter: bool,
    seen: BTreeSet<PathBuf>,
}

const SNAPSHOT_EXTS: [&str; 3] = ["tsv", "csv", "txt"];

impl FrameSource {
    pub fn open(config: &SourceConfig) -> Result<Self, ServiceError> {
        match config {
            SourceConfig::Simulator(cfg) => {
                cfg.validate().map_err(ServiceError::Config)?;
                Ok(FrameSource::Simulator {
                    sim: Simulator::new(cfg.clone()),
                    started: false,
                })
            }
            SourceConfig::Watch {
                dir,
                schema,
                infer_delimiter,
            } => {
                if !dir.is_dir() {
                    return Err(ServiceError::Source(format!("watch directory {} does not exist", dir.display())));
                }
                let schema = match schema {
                    Some(p) => {
                        let text = std::fs::read_to_string(p).map_err(|e| ServiceError::io(p, e))?;
                        Some(SnapshotSchema::parse(&text).map_err(twin_core::TwinError::from)?)
                    }
                    None => None,
                };
                Ok(FrameSource::Watch(WatchDir {
                    dir: dir.clone(),
                    schema,
                    infer_delimiter: *infer_delimiter,
                    seen: BTreeSet::new(),
                }))
            }
        }
    }

    /// Skips simulator ticks at or before `timestamp` so a restarted service
    /// continues after its persisted history. Watch sources are unaffected.
    pub fn resume_after(&mut self, timestamp: i64) {
        if let FrameSource::Simulator { sim, started } = self {
            let cfg = sim.config();
            let mut next = (((timestamp - cfg.start_ms) as f64 * cfg.tick_hz / 1000.0).floor().max(0.0) as u64).saturating_sub(1);
            while sim.config().timestamp_at(next) <= timestamp {
                next += 1;
            }
            if next > 0 {
                sim.frame_at(next - 1);
                *started = true;
            }
        }
    }

    /// Frames that became available since the last poll, oldest first.
    pub fn poll(&mut self) -> Vec<SourceFrame> {
        match self {
            FrameSource::Simulator { sim, started } => {
                let frame = if *started {
                    sim.next_frame()
                } else {
                    *started = true;
                    sim.current_frame()
                };
                vec![SourceFrame {
                    frame,
                    clamp_count: 0,
                    row_errors: 0,
                }]
            }
            FrameSource::Watch(w) => w.poll(),
        }
    }
}

/// Parses one snapshot file. Without `schema` the header is inferred; the
/// timestamp defaults to the file's modification time.
pub fn read_snapshot(path: &Path, schema: Option<&SnapshotSchema>, infer_delimiter: bool) -> Result<ParseOutcome, ServiceError> {
    let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
    let delimiter = if infer_delimiter {
        SnapshotSchema::delimiter_for_path(path)
    } else {
        '\t'
    };
    let bad = |e: SchemaError| ServiceError::Source(format!("{}: {e}", path.display()));
    let schema = match schema {
        Some(s) => s.clone(),
        None => SnapshotSchema::infer_from_document(&text, delimiter).map_err(bad)?,
    };
    parse_snapshot(&text, &schema, mtime_ms(path)).map_err(bad)
}

fn mtime_ms(path: &Path) -> i64 {
    std::fs::metadata(path)
        .and_then(|m| m.modified())
        .ok()
        .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
        .map_or(0, |d| d.as_millis() as i64)
}

impl WatchDir {
    fn poll(&mut self) -> Vec<SourceFrame> {
        let entries = match std::fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) => {
                warn!(dir = %self.dir.display(), error = %e, "cannot list watch directory");
                return Vec::new();
            }
        };
        let mut fresh: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| SNAPSHOT_EXTS.contains(&e.to_ascii_lowercase().as_str()))
            })
            .filter(|p| !self.seen.contains(p))
            .collect();
        fresh.sort();
        let mut out = Vec::new();
        for path in fresh {
            self.seen.insert(path.clone());
            match self.read(&path) {
                Ok(f) => out.push(f),
                Err(e) => warn!("{e}"),
            }
        }
        out
    }

    fn read(&self, path: &Path) -> Result<SourceFrame, ServiceError> {
        let outcome = read_snapshot(path, self.schema.as_ref(), self.infer_delimiter)?;
        for e in &outcome.row_errors {
            warn!(file = %path.display(), line = e.line, "{}", e.message);
        }
        Ok(SourceFrame {
            clamp_count: outcome.clamp_count as u64,
            row_errors: outcome.row_errors.len() as u64,
            frame: outcome.frame,
        })
    }
}
