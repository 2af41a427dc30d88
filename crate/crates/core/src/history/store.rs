//! Time-indexed frame history with optional on-disk persistence.
//!
//! Disk layout under `root`:
//!
//! ```text
//! index                          one timestamp per line, ascending
//! frames/<timestamp>/triples.tsv frame encoded as associative triples
//! ```

use std::collections::BTreeMap;
use std::ops::Bound;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::triples::{frame_to_store, store_to_frame};
use crate::assoc::{write_atomic, AssocStore};
use crate::error::{FormatError, HistoryError, TwinError};
use crate::model::SnapshotFrame;

const INDEX: &str = "index";
const FRAMES: &str = "frames";
const TRIPLES: &str = "triples.tsv";

/// Frames are evicted once either limit is exceeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Retention {
    pub max_frames: usize,
    /// Oldest frame kept is at most this far behind the newest.
    pub max_age_ms: i64,
}

impl Default for Retention {
    fn default() -> Self {
        Self {
            max_frames: 10_000,
            max_age_ms: 24 * 3600 * 1000,
        }
    }
}

impl Retention {
    pub fn frames(max_frames: usize) -> Self {
        Self {
            max_frames,
            max_age_ms: i64::MAX,
        }
    }
}

#[derive(Debug, Default)]
pub struct HistoryStore {
    frames: BTreeMap<i64, Arc<SnapshotFrame>>,
    retention: Retention,
    root: Option<PathBuf>,
}

impl HistoryStore {
    pub fn new(retention: Retention) -> Self {
        Self {
            frames: BTreeMap::new(),
            retention,
            root: None,
        }
    }

    /// Opens (or creates) a persistent store at `root`, loading every
    /// indexed frame.
    pub fn open(root: impl Into<PathBuf>, retention: Retention) -> Result<Self, TwinError> {
        let root = root.into();
        std::fs::create_dir_all(root.join(FRAMES)).map_err(|e| TwinError::io(&root, e))?;
        let mut store = Self {
            frames: BTreeMap::new(),
            retention,
            root: None,
        };
        let index_path = root.join(INDEX);
        if index_path.exists() {
            let text = std::fs::read_to_string(&index_path).map_err(|e| TwinError::io(&index_path, e))?;
            for (i, line) in text.lines().enumerate() {
                let ts: i64 = line.trim().parse().map_err(|_| FormatError {
                    path: index_path.display().to_string(),
                    line: i + 1,
                    message: format!("bad timestamp `{line}`"),
                })?;
                let path = frame_path(&root, ts);
                let triples = AssocStore::load(&path)?;
                let frame = store_to_frame(&triples, &path.display().to_string())?;
                store.append(frame)?;
            }
        }
        store.root = Some(root);
        store.persist_index()?;
        store.remove_unindexed()?;
        Ok(store)
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn retention(&self) -> Retention {
        self.retention
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = i64> + '_ {
        self.frames.keys().copied()
    }

    pub fn latest(&self) -> Option<&Arc<SnapshotFrame>> {
        self.frames.values().next_back()
    }

    pub fn first_timestamp(&self) -> Option<i64> {
        self.frames.keys().next().copied()
    }

    /// Appends a frame with a timestamp after every stored one, then
    /// applies retention. Returns the evicted timestamps.
    pub fn append(&mut self, frame: SnapshotFrame) -> Result<Vec<i64>, TwinError> {
        if let Some((&latest, _)) = self.frames.last_key_value() {
            if frame.timestamp <= latest {
                return Err(HistoryError::NonMonotonic {
                    latest,
                    new: frame.timestamp,
                }
                .into());
            }
        }
        let ts = frame.timestamp;
        if let Some(root) = &self.root {
            let path = frame_path(root, ts);
            std::fs::create_dir_all(path.parent().expect("has parent")).map_err(|e| TwinError::io(&path, e))?;
            frame_to_store(&frame).save(&path)?;
        }
        self.frames.insert(ts, Arc::new(frame));
        let evicted = self.evict(ts);
        if let Some(root) = &self.root {
            self.persist_index()?;
            for t in &evicted {
                let dir = frame_path(root, *t).parent().expect("has parent").to_path_buf();
                std::fs::remove_dir_all(&dir).map_err(|e| TwinError::io(&dir, e))?;
            }
        }
        Ok(evicted)
    }

    fn evict(&mut self, newest: i64) -> Vec<i64> {
        let mut out = Vec::new();
        while let Some((&oldest, _)) = self.frames.first_key_value() {
            let too_many = self.frames.len() > self.retention.max_frames;
            let too_old = newest.saturating_sub(oldest) > self.retention.max_age_ms;
            if !(too_many || too_old) {
                break;
            }
            self.frames.pop_first();
            out.push(oldest);
        }
        out
    }

    /// Drops frame directories left behind by a tighter retention or an
    /// interrupted append.
    fn remove_unindexed(&self) -> Result<(), TwinError> {
        let Some(root) = &self.root else { return Ok(()) };
        let dir = root.join(FRAMES);
        for entry in std::fs::read_dir(&dir).map_err(|e| TwinError::io(&dir, e))? {
            let path = entry.map_err(|e| TwinError::io(&dir, e))?.path();
            let keep = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.parse::<i64>().ok())
                .is_some_and(|t| self.frames.contains_key(&t));
            if !keep {
                std::fs::remove_dir_all(&path).map_err(|e| TwinError::io(&path, e))?;
            }
        }
        Ok(())
    }

    fn persist_index(&self) -> Result<(), TwinError> {
        let Some(root) = &self.root else { return Ok(()) };
        let text: String = self.frames.keys().map(|t| format!("{t}\n")).collect();
        write_atomic(&root.join(INDEX), text.as_bytes())
    }

    /// Frame with the greatest timestamp `<= t`.
    pub fn at(&self, t: i64) -> Result<Arc<SnapshotFrame>, HistoryError> {
        let first = self.first_timestamp().ok_or(HistoryError::Empty)?;
        self.frames
            .range(..=t)
            .next_back()
            .map(|(_, f)| f.clone())
            .ok_or(HistoryError::OutOfRange { t, first })
    }

    /// Frames with `from <= timestamp <= to`, ascending.
    pub fn range(&self, from: i64, to: i64) -> Result<Vec<Arc<SnapshotFrame>>, HistoryError> {
        if from > to {
            return Err(HistoryError::BadRange { from, to });
        }
        Ok(self
            .frames
            .range((Bound::Included(from), Bound::Included(to)))
            .map(|(_, f)| f.clone())
            .collect())
    }
}

fn frame_path(root: &Path, ts: i64) -> PathBuf {
    root.join(FRAMES).join(ts.to_string()).join(TRIPLES)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{simulate_tick, Simulator, SimulatorConfig};
    use rand::{Rng, SeedableRng};

    fn frame(ts: i64) -> SnapshotFrame {
        SnapshotFrame::new(ts)
    }

    #[test]
    fn read_back_and_monotonic() {
        let mut h = HistoryStore::new(Retention::default());
        for t in 1..=3 {
            h.append(frame(t)).unwrap();
        }
        assert_eq!(h.at(2).unwrap().timestamp, 2);
        let mut h = HistoryStore::new(Retention::default());
        h.append(frame(3)).unwrap();
        assert!(matches!(
            h.append(frame(2)).unwrap_err(),
            TwinError::History(HistoryError::NonMonotonic { latest: 3, new: 2 })
        ));
        assert!(h.append(frame(3)).is_err());
    }

    #[test]
    fn floor_semantics() {
        let mut h = HistoryStore::new(Retention::default());
        assert_eq!(h.at(5).unwrap_err(), HistoryError::Empty);
        h.append(frame(10)).unwrap();
        h.append(frame(20)).unwrap();
        assert_eq!(h.at(15).unwrap().timestamp, 10);
        assert_eq!(h.at(20).unwrap().timestamp, 20);
        assert_eq!(h.at(99).unwrap().timestamp, 20);
        assert_eq!(h.at(9).unwrap_err(), HistoryError::OutOfRange { t: 9, first: 10 });
    }

    #[test]
    fn floor_matches_linear_scan() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut h = HistoryStore::new(Retention::default());
        let mut ts = Vec::new();
        let mut t = 0;
        for _ in 0..200 {
            t += rng.gen_range(1..50);
            ts.push(t);
            h.append(frame(t)).unwrap();
        }
        for _ in 0..1000 {
            let q = rng.gen_range(-10..t + 10);
            let oracle = ts.iter().rev().find(|&&x| x <= q).copied();
            assert_eq!(h.at(q).ok().map(|f| f.timestamp), oracle);
        }
    }

    #[test]
    fn retention_by_count_and_age() {
        let mut h = HistoryStore::new(Retention::frames(100));
        for t in 1..=150 {
            h.append(frame(t)).unwrap();
        }
        assert_eq!(h.len(), 100);
        assert_eq!(h.timestamps().collect::<Vec<_>>(), (51..=150).collect::<Vec<_>>());

        let mut h = HistoryStore::new(Retention { max_frames: 1000, max_age_ms: 10 });
        for t in (0..100).step_by(5) {
            h.append(frame(t)).unwrap();
        }
        assert_eq!(h.first_timestamp(), Some(85));
    }

    #[test]
    fn range_query() {
        let mut h = HistoryStore::new(Retention::default());
        for t in [10, 20, 30, 40] {
            h.append(frame(t)).unwrap();
        }
        let r: Vec<i64> = h.range(15, 30).unwrap().iter().map(|f| f.timestamp).collect();
        assert_eq!(r, [20, 30]);
        assert_eq!(h.range(30, 15).unwrap_err(), HistoryError::BadRange { from: 30, to: 15 });
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SimulatorConfig { node_count: 8, cpu_node_count: 2, ..Default::default() };
        let mut sim = Simulator::new(cfg.clone());
        {
            let mut h = HistoryStore::open(dir.path(), Retention::frames(5)).unwrap();
            for _ in 0..6 {
                h.append(sim.next_frame()).unwrap();
            }
        }
        let h = HistoryStore::open(dir.path(), Retention::frames(4)).unwrap();
        assert_eq!(h.len(), 4);
        let frames: Vec<_> = std::fs::read_dir(dir.path().join(FRAMES)).unwrap().collect();
        assert_eq!(frames.len(), 4);
        let last_tick = simulate_tick(&cfg, 6);
        assert_eq!(**h.latest().unwrap(), last_tick);
        assert_eq!(h.at(cfg.timestamp_at(4)).unwrap().timestamp, cfg.timestamp_at(4));
        assert!(h.at(cfg.timestamp_at(2)).is_err());
    }
}
