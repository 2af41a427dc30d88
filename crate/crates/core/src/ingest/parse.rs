//! Delimited snapshot reader and writer.
//!
//! A document is an optional `#timestamp_ms=<n>` directive (other `#` lines
//! before the header are comments), one header row, then one row per node.
//! Malformed rows are skipped and reported; parsing never aborts after the
//! header has been bound.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::schema::{Field, GpuMetric, SnapshotSchema, Unit};
use crate::assoc::format_num;
use crate::error::SchemaError;
use crate::model::{EnvTelemetry, GpuTelemetry, NodeKind, NodeState, NodeTelemetry, SnapshotFrame};

const TIMESTAMP_DIRECTIVE: &str = "#timestamp_ms=";

/// A data row that could not be turned into telemetry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    /// 1-based line number in the document.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub frame: SnapshotFrame,
    pub row_errors: Vec<RowError>,
    /// Number of values pulled back into their declared range.
    pub clamp_count: usize,
    pub data_rows: usize,
}

/// Parses one snapshot document. The timestamp comes from the document's
/// directive when present, otherwise `default_timestamp` is used.
pub fn parse_snapshot(
    text: &str,
    schema: &SnapshotSchema,
    default_timestamp: i64,
) -> Result<ParseOutcome, SchemaError> {
    let mut lines = text.split('\n').enumerate().peekable();
    let mut timestamp = default_timestamp;
    let header = loop {
        let Some((idx, line)) = lines.next() else {
            return Err(SchemaError::EmptyDocument);
        };
        let line = line.trim_end_matches('\r');
        if let Some(ts) = line.strip_prefix(TIMESTAMP_DIRECTIVE) {
            timestamp = ts.trim().parse().map_err(|_| SchemaError::Syntax {
                line: idx + 1,
                message: format!("bad timestamp directive `{line}`"),
            })?;
        } else if !line.starts_with('#') && !line.trim().is_empty() {
            break line;
        }
    };
    let positions = schema.bind(header)?;
    let width = header.split(schema.delimiter()).count();

    let mut outcome = ParseOutcome {
        frame: SnapshotFrame::new(timestamp),
        row_errors: Vec::new(),
        clamp_count: 0,
        data_rows: 0,
    };
    for (idx, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        outcome.data_rows += 1;
        let cells: Vec<&str> = line.split(schema.delimiter()).collect();
        let result = if cells.len() != width {
            Err(format!("expected {width} cells, found {}", cells.len()))
        } else {
            parse_row(schema, &positions, &cells)
        };
        match result {
            Ok((node, clamps)) if !outcome.frame.nodes.contains_key(&node.node_name) => {
                outcome.clamp_count += clamps;
                outcome.frame.insert(node);
            }
            Ok((node, _)) => outcome.row_errors.push(RowError {
                line: idx + 1,
                message: format!("duplicate node `{}`", node.node_name),
            }),
            Err(message) => outcome.row_errors.push(RowError {
                line: idx + 1,
                message,
            }),
        }
    }
    Ok(outcome)
}

#[derive(Default)]
struct GpuCells {
    values: [Option<f64>; 5],
}

fn parse_row(
    schema: &SnapshotSchema,
    positions: &[usize],
    cells: &[&str],
) -> Result<(NodeTelemetry, usize), String> {
    let mut clamps = 0usize;
    let mut name = None;
    let mut state = None;
    let mut cpu_load = None;
    let mut node_temp = None;
    let mut user = None;
    let mut job_id = None;
    let mut alerts = BTreeSet::new();
    let mut gpus: std::collections::BTreeMap<u32, GpuCells> = Default::default();

    for (col, &pos) in schema.columns().iter().zip(positions) {
        let cell = cells[pos].trim();
        let number = || -> Result<f64, String> {
            let v: f64 = cell
                .parse()
                .map_err(|_| format!("column `{}`: `{cell}` is not a number", col.name))?;
            if !v.is_finite() {
                return Err(format!("column `{}`: `{cell}` is not finite", col.name));
            }
            Ok(v * col.unit.scale())
        };
        match col.field {
            Field::Node => {
                if cell.is_empty() {
                    return Err("empty node name".into());
                }
                name = Some(cell.to_string());
            }
            Field::State => state = Some(cell.parse::<NodeState>()?),
            Field::CpuLoad => cpu_load = Some(number()?),
            Field::NodeTempC => node_temp = Some(number()?),
            Field::User => user = (!cell.is_empty()).then(|| cell.to_string()),
            Field::JobId => job_id = (!cell.is_empty()).then(|| cell.to_string()),
            Field::Alerts => alerts.extend(
                cell.split(';').map(str::trim).filter(|a| !a.is_empty()).map(String::from),
            ),
            Field::Gpu { index, metric } => {
                let slot = metric as usize;
                let entry = gpus.entry(index).or_default();
                if !cell.is_empty() {
                    entry.values[slot] = Some(number()?);
                }
            }
        }
    }

    let state = state.ok_or("missing state")?;
    let mut cpu_load = clamp(cpu_load.ok_or("missing cpu_load")?, 0.0, 1.0, &mut clamps);
    if state == NodeState::Off && cpu_load != 0.0 {
        cpu_load = 0.0;
        clamps += 1;
    }

    let mut gpu_list = Vec::new();
    for (index, cells) in gpus {
        let present = cells.values.iter().filter(|v| v.is_some()).count();
        if present == 0 {
            continue;
        }
        if present != GpuMetric::ALL.len() {
            return Err(format!("gpu{index}: partially empty column group"));
        }
        let v = |m: GpuMetric| cells.values[m as usize].expect("checked above");
        let mem_cap = to_bytes(v(GpuMetric::MemCap), &mut clamps);
        let mut mem_used = to_bytes(v(GpuMetric::MemUsed), &mut clamps);
        if mem_used > mem_cap {
            mem_used = mem_cap;
            clamps += 1;
        }
        let mut gpu = GpuTelemetry {
            gpu_index: index,
            utilization: clamp(v(GpuMetric::Util), 0.0, 1.0, &mut clamps),
            mem_used_bytes: mem_used,
            mem_capacity_bytes: mem_cap,
            power_draw_w: clamp(v(GpuMetric::PowerW), 0.0, f64::INFINITY, &mut clamps),
            temp_c: v(GpuMetric::TempC),
        };
        if state == NodeState::Off {
            clamps += silence_gpu(&mut gpu);
        }
        gpu_list.push(gpu);
    }

    let kind = if gpu_list.is_empty() {
        NodeKind::CpuOnly
    } else {
        NodeKind::GpuAccelerated
    };
    Ok((
        NodeTelemetry {
            node_name: name.ok_or("missing node name")?,
            kind,
            state,
            cpu_load,
            node_temp_c: node_temp.ok_or("missing node_temp_c")?,
            alerts: alerts.into_iter().collect(),
            user,
            job_id,
            gpus: gpu_list,
        },
        clamps,
    ))
}

/// Zeroes live readings of a GPU on a powered-off node; returns how many
/// values changed.
pub(crate) fn silence_gpu(gpu: &mut GpuTelemetry) -> usize {
    let changed = (gpu.utilization != 0.0) as usize
        + (gpu.mem_used_bytes != 0) as usize
        + (gpu.power_draw_w != 0.0) as usize;
    gpu.utilization = 0.0;
    gpu.mem_used_bytes = 0;
    gpu.power_draw_w = 0.0;
    changed
}

fn clamp(v: f64, lo: f64, hi: f64, clamps: &mut usize) -> f64 {
    if v < lo {
        *clamps += 1;
        lo
    } else if v > hi {
        *clamps += 1;
        hi
    } else {
        v
    }
}

fn to_bytes(v: f64, clamps: &mut usize) -> u64 {
    if v < 0.0 {
        *clamps += 1;
        0
    } else {
        v.round() as u64
    }
}

/// Renders a frame with `schema`. Values are written in each column's unit;
/// with canonical units, `parse_snapshot` restores the frame exactly.
pub fn serialize_snapshot(frame: &SnapshotFrame, schema: &SnapshotSchema) -> String {
    let delim = schema.delimiter().to_string();
    let mut out = format!("{TIMESTAMP_DIRECTIVE}{}\n{}\n", frame.timestamp, schema.header());
    for node in frame.nodes.values() {
        let cells: Vec<String> = schema
            .columns()
            .iter()
            .map(|col| {
                let num = |v: f64| format_num(v / col.unit.scale());
                match col.field {
                    Field::Node => node.node_name.clone(),
                    Field::State => node.state.to_string(),
                    Field::CpuLoad => num(node.cpu_load),
                    Field::NodeTempC => num(node.node_temp_c),
                    Field::User => node.user.clone().unwrap_or_default(),
                    Field::JobId => node.job_id.clone().unwrap_or_default(),
                    Field::Alerts => node.alerts.join(";"),
                    Field::Gpu { index, metric } => {
                        match node.gpus.iter().find(|g| g.gpu_index == index) {
                            None => String::new(),
                            Some(g) => match metric {
                                GpuMetric::Util => num(g.utilization),
                                GpuMetric::MemUsed if col.unit == Unit::Bytes => g.mem_used_bytes.to_string(),
                                GpuMetric::MemCap if col.unit == Unit::Bytes => g.mem_capacity_bytes.to_string(),
                                GpuMetric::MemUsed => num(g.mem_used_bytes as f64),
                                GpuMetric::MemCap => num(g.mem_capacity_bytes as f64),
                                GpuMetric::PowerW => num(g.power_draw_w),
                                GpuMetric::TempC => num(g.temp_c),
                            },
                        }
                    }
                }
            })
            .collect();
        out.push_str(&cells.join(&delim));
        out.push('\n');
    }
    out
}

const ENV_COLUMNS: [&str; 5] = ["sensor_id", "humidity_pct", "airflow", "temp_c", "timestamp"];

#[derive(Debug, Clone, PartialEq)]
pub struct EnvOutcome {
    pub records: Vec<EnvTelemetry>,
    pub row_errors: Vec<RowError>,
    pub clamp_count: usize,
}

/// Parses facility sensor records (`sensor_id, humidity_pct, airflow,
/// temp_c, timestamp`, any column order).
pub fn parse_env(text: &str, delimiter: char) -> Result<EnvOutcome, SchemaError> {
    let mut lines = text
        .split('\n')
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or(SchemaError::EmptyDocument)?;
    let names: Vec<&str> = header.trim_end_matches('\r').split(delimiter).map(str::trim).collect();
    let mut pos = [0usize; 5];
    for (slot, want) in ENV_COLUMNS.iter().enumerate() {
        pos[slot] = names
            .iter()
            .position(|n| n == want)
            .ok_or_else(|| SchemaError::MissingColumn(want.to_string()))?;
    }
    let mut out = EnvOutcome {
        records: Vec::new(),
        row_errors: Vec::new(),
        clamp_count: 0,
    };
    for (idx, raw) in lines {
        let cells: Vec<&str> = raw.trim_end_matches('\r').split(delimiter).map(str::trim).collect();
        let row = || -> Result<(EnvTelemetry, usize), String> {
            if cells.len() != names.len() {
                return Err(format!("expected {} cells, found {}", names.len(), cells.len()));
            }
            let num = |slot: usize| -> Result<f64, String> {
                let c = cells[pos[slot]];
                c.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("column `{}`: `{c}` is not a number", ENV_COLUMNS[slot]))
            };
            let mut clamps = 0;
            let humidity = clamp(num(1)?, 0.0, 100.0, &mut clamps);
            let timestamp = cells[pos[4]]
                .parse::<i64>()
                .map_err(|_| format!("column `timestamp`: `{}` is not an integer", cells[pos[4]]))?;
            Ok((
                EnvTelemetry {
                    sensor_id: cells[pos[0]].to_string(),
                    humidity_pct: humidity,
                    airflow: num(2)?,
                    temp_c: num(3)?,
                    timestamp,
                },
                clamps,
            ))
        };
        match row() {
            Ok((rec, clamps)) => {
                out.clamp_count += clamps;
                out.records.push(rec);
            }
            Err(message) => out.row_errors.push(RowError { line: idx + 1, message }),
        }
    }
    Ok(out)
}

pub fn serialize_env(records: &[EnvTelemetry], delimiter: char) -> String {
    let d = delimiter.to_string();
    let mut out = ENV_COLUMNS.join(&d);
    out.push('\n');
    for r in records {
        let cells = [
            r.sensor_id.clone(),
            format_num(r.humidity_pct),
            format_num(r.airflow),
            format_num(r.temp_c),
            r.timestamp.to_string(),
        ];
        out.push_str(&cells.join(&d));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> SnapshotSchema {
        SnapshotSchema::standard(2, '\t')
    }

    const DOC: &str = "node\tstate\tcpu_load\tnode_temp_c\tuser\tjob_id\talerts\tgpu0_util\tgpu0_mem_used\tgpu0_mem_cap\tgpu0_power_w\tgpu0_temp_c\tgpu1_util\tgpu1_mem_used\tgpu1_mem_cap\tgpu1_power_w\tgpu1_temp_c\n\
gpu-0001\tactive\t0.5\t41\talice\t1001\t\t0.9\t100\t1000\t300\t60\t0.1\t10\t1000\t80\t50\n\
cpu-0001\tidle\t0.02\t35\t\t\t\t\t\t\t\t\t\t\t\t\t\n";

    #[test]
    fn two_rows() {
        let out = parse_snapshot(DOC, &schema(), 5).unwrap();
        assert_eq!(out.frame.nodes.len(), 2);
        assert_eq!(out.frame.timestamp, 5);
        assert!(out.row_errors.is_empty());
        let g = &out.frame.nodes["gpu-0001"];
        assert_eq!(g.kind, NodeKind::GpuAccelerated);
        assert_eq!(g.gpus.len(), 2);
        assert_eq!(g.user.as_deref(), Some("alice"));
        let c = &out.frame.nodes["cpu-0001"];
        assert_eq!(c.kind, NodeKind::CpuOnly);
        assert!(c.gpus.is_empty());
    }

    #[test]
    fn round_trip() {
        let first = parse_snapshot(DOC, &schema(), 77).unwrap().frame;
        let text = serialize_snapshot(&first, &schema());
        let again = parse_snapshot(&text, &schema(), 0).unwrap().frame;
        assert_eq!(first, again);
    }

    #[test]
    fn corrupt_cell_is_reported_not_fatal() {
        let doc = DOC.replace("\t0.9\t", "\tzero\t");
        let out = parse_snapshot(&doc, &schema(), 0).unwrap();
        assert_eq!(out.frame.nodes.len(), 1);
        assert_eq!(out.row_errors.len(), 1);
        assert_eq!(out.row_errors[0].line, 2);
        assert!(out.row_errors[0].message.contains("gpu0_util"));
    }

    #[test]
    fn clamping_is_counted() {
        let doc = DOC.replace("\t0.9\t100\t", "\t1.7\t5000\t").replace("idle\t0.02", "off\t0.02");
        let out = parse_snapshot(&doc, &schema(), 0).unwrap();
        let g = &out.frame.nodes["gpu-0001"].gpus[0];
        assert_eq!(g.utilization, 1.0);
        assert_eq!(g.mem_used_bytes, 1000);
        assert_eq!(out.frame.nodes["cpu-0001"].cpu_load, 0.0);
        assert_eq!(out.clamp_count, 3);
        assert!(out.frame.violations().is_empty());
    }

    #[test]
    fn missing_column_is_schema_error() {
        let doc = DOC.replacen("node_temp_c", "temp", 1);
        assert_eq!(
            parse_snapshot(&doc, &schema(), 0).unwrap_err(),
            SchemaError::MissingColumn("node_temp_c".into())
        );
        assert_eq!(parse_snapshot("", &schema(), 0).unwrap_err(), SchemaError::EmptyDocument);
    }

    #[test]
    fn duplicates_and_partial_groups() {
        let dup = format!("{DOC}{}", DOC.lines().nth(1).unwrap());
        let out = parse_snapshot(&dup, &schema(), 0).unwrap();
        assert_eq!(out.row_errors.len(), 1);
        assert!(out.row_errors[0].message.contains("duplicate"));

        let partial = DOC.replace("\t0.1\t10\t1000\t80\t50", "\t0.1\t\t1000\t80\t50");
        let out = parse_snapshot(&partial, &schema(), 0).unwrap();
        assert_eq!(out.row_errors.len(), 1);
    }

    #[test]
    fn percent_units() {
        let s = SnapshotSchema::parse("@delimiter\tcomma\nhost\tnode\nst\tstate\ncpu\tcpu_load\tpercent\nt\tnode_temp_c\n").unwrap();
        let out = parse_snapshot("host,st,cpu,t\nn1,active,50,40\n", &s, 0).unwrap();
        assert_eq!(out.frame.nodes["n1"].cpu_load, 0.5);
    }

    #[test]
    fn env_records() {
        let text = "sensor_id,humidity_pct,airflow,temp_c,timestamp\necopod-1,45.5,1.2,22,1000\necopod-2,140,1.0,21,1000\nbad,x,1,1,1\n";
        let out = parse_env(text, ',').unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[1].humidity_pct, 100.0);
        assert_eq!(out.clamp_count, 1);
        assert_eq!(out.row_errors.len(), 1);
        let again = parse_env(&serialize_env(&out.records, ','), ',').unwrap();
        assert_eq!(again.records, out.records);
    }
}
