//! Snapshot parsing, synthetic telemetry, conditioning and alert rules.

pub mod alerts;
pub mod condition;
pub mod parse;
pub mod schema;
pub mod sim;

pub use alerts::{default_rules, evaluate_alerts, parse_rules, Alert, AlertRule, Comparator, Severity};
pub use condition::{condition, ConditionedFrame};
pub use parse::{parse_env, parse_snapshot, serialize_env, serialize_snapshot, ParseOutcome, RowError};
pub use schema::{SnapshotSchema, Unit};
pub use sim::{simulate_tick, DriftParams, Simulator, SimulatorConfig};
