//! Column layout of delimited snapshot documents.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::SchemaError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpuMetric {
    Util,
    MemUsed,
    MemCap,
    PowerW,
    TempC,
}

impl GpuMetric {
    pub const ALL: [GpuMetric; 5] = [
        GpuMetric::Util,
        GpuMetric::MemUsed,
        GpuMetric::MemCap,
        GpuMetric::PowerW,
        GpuMetric::TempC,
    ];

    pub fn suffix(self) -> &'static str {
        match self {
            GpuMetric::Util => "util",
            GpuMetric::MemUsed => "mem_used",
            GpuMetric::MemCap => "mem_cap",
            GpuMetric::PowerW => "power_w",
            GpuMetric::TempC => "temp_c",
        }
    }

    fn default_unit(self) -> Unit {
        match self {
            GpuMetric::Util => Unit::Fraction,
            GpuMetric::MemUsed | GpuMetric::MemCap => Unit::Bytes,
            GpuMetric::PowerW => Unit::Watts,
            GpuMetric::TempC => Unit::Celsius,
        }
    }
}

/// The telemetry field a column feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Node,
    State,
    CpuLoad,
    NodeTempC,
    User,
    JobId,
    Alerts,
    Gpu { index: u32, metric: GpuMetric },
}

impl Field {
    pub fn default_unit(self) -> Unit {
        match self {
            Field::CpuLoad => Unit::Fraction,
            Field::NodeTempC => Unit::Celsius,
            Field::Gpu { metric, .. } => metric.default_unit(),
            _ => Unit::Text,
        }
    }

    fn accepts(self, unit: Unit) -> bool {
        use Unit::*;
        match self.default_unit() {
            Fraction => matches!(unit, Fraction | Percent),
            Bytes => matches!(unit, Bytes | KiB | MiB | GiB),
            other => other == unit,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Node => f.write_str("node"),
            Field::State => f.write_str("state"),
            Field::CpuLoad => f.write_str("cpu_load"),
            Field::NodeTempC => f.write_str("node_temp_c"),
            Field::User => f.write_str("user"),
            Field::JobId => f.write_str("job_id"),
            Field::Alerts => f.write_str("alerts"),
            Field::Gpu { index, metric } => write!(f, "gpu{index}_{}", metric.suffix()),
        }
    }
}

impl FromStr for Field {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "node" => Field::Node,
            "state" => Field::State,
            "cpu_load" => Field::CpuLoad,
            "node_temp_c" => Field::NodeTempC,
            "user" => Field::User,
            "job_id" => Field::JobId,
            "alerts" => Field::Alerts,
            other => {
                let unknown = || SchemaError::UnknownField(other.to_string());
                let rest = other.strip_prefix("gpu").ok_or_else(unknown)?;
                let (idx, suffix) = rest.split_once('_').ok_or_else(unknown)?;
                let index: u32 = idx.parse().map_err(|_| unknown())?;
                let metric = GpuMetric::ALL
                    .into_iter()
                    .find(|m| m.suffix() == suffix)
                    .ok_or_else(unknown)?;
                Field::Gpu { index, metric }
            }
        })
    }
}

/// Unit a column's numbers are written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Text,
    Fraction,
    Percent,
    Bytes,
    KiB,
    MiB,
    GiB,
    Celsius,
    Watts,
}

impl Unit {
    /// Multiplier from this unit to the canonical one.
    pub fn scale(self) -> f64 {
        match self {
            Unit::Percent => 0.01,
            Unit::KiB => 1024.0,
            Unit::MiB => 1024.0 * 1024.0,
            Unit::GiB => 1024.0 * 1024.0 * 1024.0,
            _ => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Text => "text",
            Unit::Fraction => "fraction",
            Unit::Percent => "percent",
            Unit::Bytes => "bytes",
            Unit::KiB => "KiB",
            Unit::MiB => "MiB",
            Unit::GiB => "GiB",
            Unit::Celsius => "C",
            Unit::Watts => "W",
        }
    }
}

impl FromStr for Unit {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "text" => Unit::Text,
            "fraction" => Unit::Fraction,
            "percent" | "%" => Unit::Percent,
            "bytes" | "B" => Unit::Bytes,
            "KiB" => Unit::KiB,
            "MiB" => Unit::MiB,
            "GiB" => Unit::GiB,
            "C" | "celsius" => Unit::Celsius,
            "W" | "watts" => Unit::Watts,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub field: Field,
    pub unit: Unit,
}

/// Ordered column specification plus delimiter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotSchema {
    delimiter: char,
    columns: Vec<ColumnSpec>,
}

const REQUIRED: [Field; 4] = [Field::Node, Field::State, Field::CpuLoad, Field::NodeTempC];

impl SnapshotSchema {
    pub fn new(delimiter: char, columns: Vec<ColumnSpec>) -> Result<Self, SchemaError> {
        let mut names = BTreeSet::new();
        let mut fields = BTreeSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(SchemaError::DuplicateColumn(c.name.clone()));
            }
            if !fields.insert(c.field) {
                return Err(SchemaError::DuplicateColumn(c.field.to_string()));
            }
            if !c.field.accepts(c.unit) {
                return Err(SchemaError::BadUnit {
                    column: c.name.clone(),
                    unit: c.unit.as_str().to_string(),
                });
            }
        }
        for req in REQUIRED {
            if !fields.contains(&req) {
                return Err(SchemaError::MissingColumn(req.to_string()));
            }
        }
        for index in gpu_indices(columns.iter().map(|c| c.field)) {
            for metric in GpuMetric::ALL {
                let f = Field::Gpu { index, metric };
                if !fields.contains(&f) {
                    return Err(SchemaError::IncompleteGpuGroup {
                        index,
                        column: f.to_string(),
                    });
                }
            }
        }
        Ok(Self { delimiter, columns })
    }

    /// Canonical schema: column names equal field names, canonical units.
    pub fn standard(gpus: u32, delimiter: char) -> Self {
        let mut fields = vec![
            Field::Node,
            Field::State,
            Field::CpuLoad,
            Field::NodeTempC,
            Field::User,
            Field::JobId,
            Field::Alerts,
        ];
        for index in 0..gpus {
            fields.extend(GpuMetric::ALL.map(|metric| Field::Gpu { index, metric }));
        }
        let columns = fields
            .into_iter()
            .map(|field| ColumnSpec {
                name: field.to_string(),
                field,
                unit: field.default_unit(),
            })
            .collect();
        Self::new(delimiter, columns).expect("standard schema is valid")
    }

    /// Builds a schema from a header whose column names are field names.
    /// Unrecognised columns are ignored.
    pub fn infer(header: &str, delimiter: char) -> Result<Self, SchemaError> {
        let columns = header
            .trim_end_matches('\r')
            .split(delimiter)
            .filter_map(|name| {
                name.parse::<Field>().ok().map(|field| ColumnSpec {
                    name: name.to_string(),
                    field,
                    unit: field.default_unit(),
                })
            })
            .collect();
        Self::new(delimiter, columns)
    }

    /// Infers a schema from the header row of a snapshot document.
    pub fn infer_from_document(text: &str, delimiter: char) -> Result<Self, SchemaError> {
        let header = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .find(|l| !l.starts_with('#') && !l.trim().is_empty())
            .ok_or(SchemaError::EmptyDocument)?;
        Self::infer(header, delimiter)
    }

    /// Delimiter implied by a file extension: comma for `.csv`, tab otherwise.
    pub fn delimiter_for_path(path: &std::path::Path) -> char {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ',',
            _ => '\t',
        }
    }

    /// Parses a schema file.
    ///
    /// ```text
    /// @delimiter<TAB>tab|comma
    /// column_name<TAB>field[<TAB>unit]
    /// ```
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let mut delimiter = '\t';
        let mut columns = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| SchemaError::Syntax {
                line: idx + 1,
                message,
            };
            let parts: Vec<&str> = line.split('\t').map(str::trim).collect();
            if parts[0] == "@delimiter" {
                delimiter = match parts.get(1).copied() {
                    Some("tab") => '\t',
                    Some("comma") => ',',
                    other => return Err(syntax(format!("unsupported delimiter {other:?}"))),
                };
                continue;
            }
            if parts.len() < 2 || parts.len() > 3 {
                return Err(syntax("expected `column<TAB>field[<TAB>unit]`".into()));
            }
            let field: Field = parts[1].parse()?;
            let unit = match parts.get(2) {
                Some(u) => u.parse::<Unit>().map_err(|_| SchemaError::BadUnit {
                    column: parts[0].to_string(),
                    unit: u.to_string(),
                })?,
                None => field.default_unit(),
            };
            columns.push(ColumnSpec {
                name: parts[0].to_string(),
                field,
                unit,
            });
        }
        Self::new(delimiter, columns)
    }

    pub fn delimiter(&self) -> char {
        self.delimiter
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn gpu_indices(&self) -> Vec<u32> {
        gpu_indices(self.columns.iter().map(|c| c.field))
    }

    pub fn header(&self) -> String {
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        names.join(&self.delimiter.to_string())
    }

    /// Maps each schema column to its position in `header`.
    pub(crate) fn bind(&self, header: &str) -> Result<Vec<usize>, SchemaError> {
        let positions: BTreeMap<&str, usize> = header
            .trim_end_matches('\r')
            .split(self.delimiter)
            .enumerate()
            .map(|(i, name)| (name.trim(), i))
            .collect();
        self.columns
            .iter()
            .map(|c| {
                positions
                    .get(c.name.as_str())
                    .copied()
                    .ok_or_else(|| SchemaError::MissingColumn(c.name.clone()))
            })
            .collect()
    }
}

fn gpu_indices(fields: impl Iterator<Item = Field>) -> Vec<u32> {
    let set: BTreeSet<u32> = fields
        .filter_map(|f| match f {
            Field::Gpu { index, .. } => Some(index),
            _ => None,
        })
        .collect();
    set.into_iter().collect()
}
