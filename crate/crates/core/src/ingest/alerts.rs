//! Threshold alert rules.
//!
//! Rules file format, one rule per line (blank and `#` lines ignored):
//!
//! ```text
//! rule_id<TAB>metric_path<TAB>comparator<TAB>threshold<TAB>severity
//! gpu_temp_high    gpu*.temp_c    gt    85C    critical
//! ```
//!
//! Metric paths are `cpu_load`, `node_temp_c`, or `gpu<sel>.<metric>` where
//! `<sel>` is a glob over the GPU index (`gpu*`, `gpu0`, `gpu?`) and
//! `<metric>` is one of `util`, `mem_used`, `mem_cap`, `mem_frac`,
//! `power_w`, `temp_c`. When a GPU selector matches several GPUs, the rule
//! tests the most extreme value in the comparator's direction (max for
//! `gt`/`ge`, min for `lt`/`le`).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::glob::Glob;
use crate::model::{GpuTelemetry, NodeTelemetry, SnapshotFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Gt,
    Ge,
    Lt,
    Le,
}

impl Comparator {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Gt => value > threshold,
            Comparator::Ge => value >= threshold,
            Comparator::Lt => value < threshold,
            Comparator::Le => value <= threshold,
        }
    }

    fn wants_high(self) -> bool {
        matches!(self, Comparator::Gt | Comparator::Ge)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Comparator::Gt => "gt",
            Comparator::Ge => "ge",
            Comparator::Lt => "lt",
            Comparator::Le => "le",
        }
    }
}

impl FromStr for Comparator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gt" | ">" => Ok(Comparator::Gt),
            "ge" | ">=" => Ok(Comparator::Ge),
            "lt" | "<" => Ok(Comparator::Lt),
            "le" | "<=" => Ok(Comparator::Le),
            other => Err(format!("unknown comparator `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warn,
    Critical,
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "warn" | "warning" => Ok(Severity::Warn),
            "critical" => Ok(Severity::Critical),
            other => Err(format!("unknown severity `{other}`")),
        }
    }
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Warn => "warn",
            Severity::Critical => "critical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeMetric {
    CpuLoad,
    NodeTempC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpuField {
    Util,
    MemUsed,
    MemCap,
    MemFrac,
    PowerW,
    TempC,
}

impl GpuField {
    fn read(self, g: &GpuTelemetry) -> f64 {
        match self {
            GpuField::Util => g.utilization,
            GpuField::MemUsed => g.mem_used_bytes as f64,
            GpuField::MemCap => g.mem_capacity_bytes as f64,
            GpuField::MemFrac => g.mem_fraction(),
            GpuField::PowerW => g.power_draw_w,
            GpuField::TempC => g.temp_c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Fraction,
    Celsius,
    Watts,
    Bytes,
}

/// A resolved metric path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricPath {
    Node(NodeMetric),
    Gpu { selector: Glob, field: GpuField },
}

/// Largest GPU index probed when checking that a selector can match.
const MAX_GPU_INDEX: u32 = 64;

impl MetricPath {
    pub fn parse(path: &str) -> Option<MetricPath> {
        match path {
            "cpu_load" => return Some(MetricPath::Node(NodeMetric::CpuLoad)),
            "node_temp_c" => return Some(MetricPath::Node(NodeMetric::NodeTempC)),
            _ => {}
        }
        let (sel, metric) = path.strip_prefix("gpu")?.split_once('.')?;
        let field = match metric {
            "util" | "utilization" => GpuField::Util,
            "mem_used" => GpuField::MemUsed,
            "mem_cap" => GpuField::MemCap,
            "mem_frac" => GpuField::MemFrac,
            "power_w" => GpuField::PowerW,
            "temp_c" => GpuField::TempC,
            _ => return None,
        };
        let selector = Glob::new(sel).ok()?;
        // a selector no GPU index can satisfy resolves to nothing
        (0..=MAX_GPU_INDEX)
            .any(|i| selector.matches(&i.to_string()))
            .then_some(MetricPath::Gpu { selector, field })
    }

    fn dimension(&self) -> Dimension {
        match self {
            MetricPath::Node(NodeMetric::CpuLoad) => Dimension::Fraction,
            MetricPath::Node(NodeMetric::NodeTempC) => Dimension::Celsius,
            MetricPath::Gpu { field, .. } => match field {
                GpuField::Util | GpuField::MemFrac => Dimension::Fraction,
                GpuField::MemUsed | GpuField::MemCap => Dimension::Bytes,
                GpuField::PowerW => Dimension::Watts,
                GpuField::TempC => Dimension::Celsius,
            },
        }
    }

    /// Every value this path selects on `node`.
    pub fn values<'a>(&'a self, node: &'a NodeTelemetry) -> Box<dyn Iterator<Item = f64> + 'a> {
        match self {
            MetricPath::Node(NodeMetric::CpuLoad) => Box::new(std::iter::once(node.cpu_load)),
            MetricPath::Node(NodeMetric::NodeTempC) => Box::new(std::iter::once(node.node_temp_c)),
            MetricPath::Gpu { selector, field } => Box::new(
                node.gpus
                    .iter()
                    .filter(move |g| selector.matches(&g.gpu_index.to_string()))
                    .map(move |g| field.read(g)),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlertRule {
    pub rule_id: String,
    pub metric_path: String,
    pub metric: MetricPath,
    pub comparator: Comparator,
    /// Threshold in the metric's canonical unit.
    pub threshold: f64,
    pub severity: Severity,
}

impl AlertRule {
    pub fn new(
        rule_id: &str,
        metric_path: &str,
        comparator: Comparator,
        threshold: &str,
        severity: Severity,
    ) -> Result<Self, ConfigError> {
        let metric = MetricPath::parse(metric_path).ok_or_else(|| ConfigError::UnresolvedMetric {
            rule_id: rule_id.to_string(),
            path: metric_path.to_string(),
        })?;
        let threshold = parse_threshold(threshold, metric.dimension()).map_err(|message| {
            ConfigError::Rule {
                rule_id: rule_id.to_string(),
                message,
            }
        })?;
        Ok(Self {
            rule_id: rule_id.to_string(),
            metric_path: metric_path.to_string(),
            metric,
            comparator,
            threshold,
            severity,
        })
    }

    /// Most extreme selected value satisfying the rule, if any.
    pub fn evaluate(&self, node: &NodeTelemetry) -> Option<f64> {
        let pick = |a: f64, b: f64| if self.comparator.wants_high() { a.max(b) } else { a.min(b) };
        let extreme = self.metric.values(node).reduce(pick)?;
        self.comparator.holds(extreme, self.threshold).then_some(extreme)
    }
}

fn parse_threshold(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_ascii_alphabetic() || c == '%')
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let n: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("threshold `{text}` is not a number"))?;
    if !n.is_finite() {
        return Err(format!("threshold `{text}` is not finite"));
    }
    let scale = match (dim, unit.trim()) {
        (_, "") => 1.0,
        (Dimension::Fraction, "%") => 0.01,
        (Dimension::Celsius, "C") => 1.0,
        (Dimension::Watts, "W") => 1.0,
        (Dimension::Bytes, "B") => 1.0,
        (Dimension::Bytes, "KiB") => 1024.0,
        (Dimension::Bytes, "MiB") => 1024.0 * 1024.0,
        (Dimension::Bytes, "GiB") => 1024.0 * 1024.0 * 1024.0,
        (_, u) => return Err(format!("unit `{u}` does not fit this metric")),
    };
    Ok(n * scale)
}

/// Parses a rules file; ids must be unique.
pub fn parse_rules(text: &str) -> Result<Vec<AlertRule>, ConfigError> {
    let mut rules = Vec::new();
    let mut ids = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let err = |message: String| ConfigError::Line {
            line: idx + 1,
            message,
        };
        let parts: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [rule_id, path, cmp, threshold, severity] = parts[..] else {
            return Err(err(format!("expected 5 tab-separated fields, found {}", parts.len())));
        };
        if rule_id.is_empty() {
            return Err(err("empty rule id".into()));
        }
        if !ids.insert(rule_id.to_string()) {
            return Err(err(format!("duplicate rule id `{rule_id}`")));
        }
        let cmp = cmp.parse().map_err(err)?;
        let severity = severity.parse().map_err(err)?;
        rules.push(AlertRule::new(rule_id, path, cmp, threshold, severity)?);
    }
    Ok(rules)
}

pub fn format_rules(rules: &[AlertRule]) -> String {
    rules
        .iter()
        .map(|r| {
            format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.rule_id,
                r.metric_path,
                r.comparator.as_str(),
                r.threshold,
                r.severity.as_str()
            )
        })
        .collect()
}

/// Shipped defaults: GPU above 85 °C, node above 75 °C.
pub const DEFAULT_RULES: &str = "\
gpu_temp_high\tgpu*.temp_c\tgt\t85C\tcritical
node_temp_high\tnode_temp_c\tgt\t75C\twarn
";

pub fn default_rules() -> Vec<AlertRule> {
    parse_rules(DEFAULT_RULES).expect("default rules parse")
}

/// A fired rule on one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub node: String,
    pub rule_id: String,
    pub severity: Severity,
    pub value: f64,
    pub timestamp: i64,
}

impl fmt::Display for Alert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} value={}",
            self.severity.as_str(),
            self.node,
            self.rule_id,
            self.value
        )
    }
}

/// One alert per `(node, rule)` pair that fires, ordered by node then rule id.
pub fn evaluate_alerts(frame: &SnapshotFrame, rules: &[AlertRule]) -> Vec<Alert> {
    let mut ordered: Vec<&AlertRule> = rules.iter().collect();
    ordered.sort_by(|a, b| a.rule_id.cmp(&b.rule_id));
    let mut out = Vec::new();
    for node in frame.nodes.values() {
        for rule in &ordered {
            if let Some(value) = rule.evaluate(node) {
                out.push(Alert {
                    node: node.node_name.clone(),
                    rule_id: rule.rule_id.clone(),
                    severity: rule.severity,
                    value,
                    timestamp: frame.timestamp,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeKind, NodeState};

    fn node(name: &str, temps: &[f64]) -> NodeTelemetry {
        NodeTelemetry {
            node_name: name.into(),
            kind: NodeKind::GpuAccelerated,
            state: NodeState::Active,
            cpu_load: 0.4,
            node_temp_c: 40.0,
            alerts: vec![],
            user: None,
            job_id: None,
            gpus: temps
                .iter()
                .enumerate()
                .map(|(i, t)| GpuTelemetry {
                    gpu_index: i as u32,
                    utilization: 0.5,
                    mem_used_bytes: 10,
                    mem_capacity_bytes: 100,
                    power_draw_w: 200.0,
                    temp_c: *t,
                })
                .collect(),
        }
    }

    fn frame(nodes: Vec<NodeTelemetry>) -> SnapshotFrame {
        let mut f = SnapshotFrame::new(9);
        for n in nodes {
            f.insert(n);
        }
        f
    }

    #[test]
    fn no_match() {
        let f = frame(vec![node("a", &[60.0, 60.0]), node("b", &[60.0, 60.0])]);
        assert!(evaluate_alerts(&f, &default_rules()).is_empty());
    }

    #[test]
    fn single_hot_gpu() {
        let f = frame(vec![node("a", &[60.0, 60.0]), node("b", &[60.0, 90.0])]);
        let alerts = evaluate_alerts(&f, &default_rules());
        assert_eq!(alerts.len(), 1);
        assert_eq!(alerts[0].node, "b");
        assert_eq!(alerts[0].rule_id, "gpu_temp_high");
        assert_eq!(alerts[0].value, 90.0);
        assert_eq!(alerts[0].timestamp, 9);
    }

    #[test]
    fn unresolved_paths_fail_at_load() {
        let bad = "r1\tgpu*.fan_rpm\tgt\t5\twarn\n";
        assert!(matches!(parse_rules(bad), Err(ConfigError::UnresolvedMetric { .. })));
        let bad = "r1\tgpux.temp_c\tgt\t5\twarn\n";
        assert!(matches!(parse_rules(bad), Err(ConfigError::UnresolvedMetric { .. })));
        let bad = "r1\tnode_temp_c\tgt\t5W\twarn\n";
        assert!(matches!(parse_rules(bad), Err(ConfigError::Rule { .. })));
        let dup = "r1\tcpu_load\tgt\t0.5\twarn\nr1\tcpu_load\tlt\t0.1\twarn\n";
        assert!(matches!(parse_rules(dup), Err(ConfigError::Line { line: 2, .. })));
        let inf = "r1\tcpu_load\tgt\tinf\twarn\n";
        assert!(parse_rules(inf).is_err());
    }

    #[test]
    fn units_and_selectors() {
        let rules = parse_rules("m\tgpu1.mem_used\tge\t1KiB\twarn\np\tgpu?.util\tlt\t20%\tcritical\n").unwrap();
        assert_eq!(rules[0].threshold, 1024.0);
        assert_eq!(rules[1].threshold, 0.2);
        let mut n = node("a", &[50.0, 50.0]);
        n.gpus[1].mem_used_bytes = 2048;
        n.gpus[1].mem_capacity_bytes = 4096;
        n.gpus[0].utilization = 0.1;
        let alerts = evaluate_alerts(&frame(vec![n]), &rules);
        let ids: Vec<_> = alerts.iter().map(|a| a.rule_id.as_str()).collect();
        assert_eq!(ids, ["m", "p"]);
        assert_eq!(alerts[1].value, 0.1);
    }

    #[test]
    fn format_parse_round_trip() {
        let rules = default_rules();
        assert_eq!(parse_rules(&format_rules(&rules)).unwrap(), rules);
    }
}
