//! Frame <-> associative-store encoding.
//!
//! Row = node name, col = metric path (`cpu_load`, `gpu0.temp_c`, ...).
//! Rows starting with `@` are reserved: `@frame` holds the timestamp and
//! `@env/<sensor>` holds facility readings.

use std::collections::BTreeMap;

use crate::assoc::{AssocStore, Value};
use crate::error::FormatError;
use crate::model::{EnvTelemetry, GpuTelemetry, NodeKind, NodeState, NodeTelemetry, SnapshotFrame};

const FRAME_ROW: &str = "@frame";
const ENV_PREFIX: &str = "@env/";

pub fn frame_to_store(frame: &SnapshotFrame) -> AssocStore {
    let mut s = AssocStore::new();
    let mut put = |row: &str, col: &str, v: Value| {
        s.insert(row, col, v).expect("keys are non-empty");
    };
    put(FRAME_ROW, "timestamp", Value::Num(frame.timestamp as f64));
    for (name, n) in &frame.nodes {
        put(name, "kind", n.kind.as_str().into());
        put(name, "state", n.state.as_str().into());
        put(name, "cpu_load", n.cpu_load.into());
        put(name, "node_temp_c", n.node_temp_c.into());
        if !n.alerts.is_empty() {
            put(name, "alerts", n.alerts.join(",").into());
        }
        if let Some(u) = &n.user {
            put(name, "user", Value::Str(u.clone()));
        }
        if let Some(j) = &n.job_id {
            put(name, "job_id", Value::Str(j.clone()));
        }
        for g in &n.gpus {
            let i = g.gpu_index;
            put(name, &format!("gpu{i}.util"), g.utilization.into());
            put(name, &format!("gpu{i}.mem_used"), (g.mem_used_bytes as f64).into());
            put(name, &format!("gpu{i}.mem_cap"), (g.mem_capacity_bytes as f64).into());
            put(name, &format!("gpu{i}.power_w"), g.power_draw_w.into());
            put(name, &format!("gpu{i}.temp_c"), g.temp_c.into());
        }
    }
    for e in &frame.env {
        let row = format!("{ENV_PREFIX}{}", e.sensor_id);
        put(&row, "humidity_pct", e.humidity_pct.into());
        put(&row, "airflow", e.airflow.into());
        put(&row, "temp_c", e.temp_c.into());
        put(&row, "timestamp", Value::Num(e.timestamp as f64));
    }
    s
}

struct Decoder<'a> {
    origin: &'a str,
}

impl Decoder<'_> {
    fn err(&self, row: &str, message: impl Into<String>) -> FormatError {
        FormatError {
            path: self.origin.to_string(),
            line: 0,
            message: format!("row `{row}`: {}", message.into()),
        }
    }

    fn num(&self, row: &str, cols: &BTreeMap<&str, &Value>, col: &str) -> Result<f64, FormatError> {
        cols.get(col)
            .and_then(|v| match v {
                Value::Num(n) => Some(*n),
                Value::Str(_) => None,
            })
            .ok_or_else(|| self.err(row, format!("missing or non-numeric `{col}`")))
    }

    fn int(&self, row: &str, cols: &BTreeMap<&str, &Value>, col: &str) -> Result<u64, FormatError> {
        let n = self.num(row, cols, col)?;
        if n < 0.0 || n.fract() != 0.0 {
            return Err(self.err(row, format!("`{col}` is not a non-negative integer")));
        }
        Ok(n as u64)
    }

    fn text(&self, row: &str, cols: &BTreeMap<&str, &Value>, col: &str) -> Result<String, FormatError> {
        cols.get(col)
            .map(|v| v.to_string())
            .ok_or_else(|| self.err(row, format!("missing `{col}`")))
    }
}

pub fn store_to_frame(store: &AssocStore, origin: &str) -> Result<SnapshotFrame, FormatError> {
    let d = Decoder { origin };
    let mut rows: BTreeMap<&str, BTreeMap<&str, &Value>> = BTreeMap::new();
    for (r, c, v) in store.iter() {
        rows.entry(r).or_default().insert(c, v);
    }
    let frame_cols = rows
        .remove(FRAME_ROW)
        .ok_or_else(|| d.err(FRAME_ROW, "missing frame row"))?;
    let mut frame = SnapshotFrame::new(d.num(FRAME_ROW, &frame_cols, "timestamp")? as i64);
    for (row, cols) in &rows {
        if let Some(sensor) = row.strip_prefix(ENV_PREFIX) {
            frame.env.push(EnvTelemetry {
                sensor_id: sensor.to_string(),
                humidity_pct: d.num(row, cols, "humidity_pct")?,
                airflow: d.num(row, cols, "airflow")?,
                temp_c: d.num(row, cols, "temp_c")?,
                timestamp: d.num(row, cols, "timestamp")? as i64,
            });
            continue;
        }
        if row.starts_with('@') {
            return Err(d.err(row, "unknown reserved row"));
        }
        frame.insert(decode_node(&d, row, cols)?);
    }
    Ok(frame)
}

fn decode_node(d: &Decoder, row: &str, cols: &BTreeMap<&str, &Value>) -> Result<NodeTelemetry, FormatError> {
    let kind = match d.text(row, cols, "kind")?.as_str() {
        "cpu_only" => NodeKind::CpuOnly,
        "gpu_accelerated" => NodeKind::GpuAccelerated,
        other => return Err(d.err(row, format!("unknown kind `{other}`"))),
    };
    let state: NodeState = d.text(row, cols, "state")?.parse().map_err(|e: String| d.err(row, e))?;
    let mut gpu_indices: Vec<u32> = Vec::new();
    for col in cols.keys() {
        let Some(rest) = col.strip_prefix("gpu") else { continue };
        let Some((idx, _)) = rest.split_once('.') else { continue };
        let idx: u32 = idx.parse().map_err(|_| d.err(row, format!("bad gpu column `{col}`")))?;
        if gpu_indices.last() != Some(&idx) && !gpu_indices.contains(&idx) {
            gpu_indices.push(idx);
        }
    }
    gpu_indices.sort_unstable();
    let gpus = gpu_indices
        .into_iter()
        .map(|i| {
            let c = |m: &str| format!("gpu{i}.{m}");
            Ok(GpuTelemetry {
                gpu_index: i,
                utilization: d.num(row, cols, &c("util"))?,
                mem_used_bytes: d.int(row, cols, &c("mem_used"))?,
                mem_capacity_bytes: d.int(row, cols, &c("mem_cap"))?,
                power_draw_w: d.num(row, cols, &c("power_w"))?,
                temp_c: d.num(row, cols, &c("temp_c"))?,
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    Ok(NodeTelemetry {
        node_name: row.to_string(),
        kind,
        state,
        cpu_load: d.num(row, cols, "cpu_load")?,
        node_temp_c: d.num(row, cols, "node_temp_c")?,
        alerts: cols
            .get("alerts")
            .map(|v| v.to_string().split(',').map(str::to_string).collect())
            .unwrap_or_default(),
        user: cols.get("user").map(|v| v.to_string()),
        job_id: cols.get("job_id").map(|v| v.to_string()),
        gpus,
    })
}
