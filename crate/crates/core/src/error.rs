use std::path::PathBuf;

use thiserror::Error;

/// Rejected caller input (keys, patterns, query text).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InputError {
    #[error("empty {0} key")]
    EmptyKey(&'static str),
    #[error("malformed glob `{pattern}`: {reason}")]
    MalformedGlob {
        pattern: String,
        reason: &'static str,
    },
    #[error("invalid query: {0}")]
    Query(String),
}

/// Snapshot schema problems that make a whole document unreadable.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("column `{0}` appears more than once")]
    DuplicateColumn(String),
    #[error("incomplete gpu column group for gpu{index}: missing `{column}`")]
    IncompleteGpuGroup { index: u32, column: String },
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("unit `{unit}` is not valid for column `{column}`")]
    BadUnit { column: String, unit: String },
    #[error("header does not match schema: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },
    #[error("document is empty")]
    EmptyDocument,
    #[error("schema file line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Invalid configuration (alert rules, templates, scene configs).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("alert rule `{rule_id}`: metric path `{path}` resolves to nothing")]
    UnresolvedMetric { rule_id: String, path: String },
    #[error("alert rule `{rule_id}`: {message}")]
    Rule { rule_id: String, message: String },
    #[error("material template `{template_id}`: {message}")]
    Template {
        template_id: String,
        message: String,
    },
    #[error("scene config: {0}")]
    Scene(String),
}

/// Raised by `frame_to_scene` when a node has no placement.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayoutError {
    #[error("node `{0}` is present in the frame but absent from the layout")]
    MissingNode(String),
    #[error("node `{0}` is placed more than once")]
    DuplicatePlacement(String),
    #[error("unknown material template `{0}`")]
    UnknownTemplate(String),
    #[error("layout config: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SceneError {
    #[error("duplicate render item id `{0}`")]
    DuplicateItem(String),
    #[error("mesh `{0}` is not in the mesh library")]
    UnknownMesh(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HistoryError {
    #[error("rejected append: timestamp {new} is not after latest stored timestamp {latest}")]
    NonMonotonic { latest: i64, new: i64 },
    #[error("timestamp {t} precedes the first stored frame ({first})")]
    OutOfRange { t: i64, first: i64 },
    #[error("history is empty")]
    Empty,
    #[error("bad range: from {from} is after to {to}")]
    BadRange { from: i64, to: i64 },
}

/// Failure to decode persisted triples or frames.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{path}: line {line}: {message}")]
pub struct FormatError {
    pub path: String,
    pub line: usize,
    pub message: String,
}

/// Top-level error that adds file context.
#[derive(Debug, Error)]
pub enum TwinError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl TwinError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TwinError::Io {
            path: path.into(),
            source,
        }
    }
}
