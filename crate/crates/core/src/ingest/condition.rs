//! Conditioning: alerts plus the set of nodes that changed since the last frame.

use std::collections::BTreeSet;

use super::alerts::{evaluate_alerts, Alert, AlertRule};
use crate::model::SnapshotFrame;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedFrame {
    /// The input frame with fired rule ids merged into each node's `alerts`.
    pub frame: SnapshotFrame,
    pub alerts: Vec<Alert>,
    /// Nodes whose telemetry differs from the previous frame, including
    /// nodes that appeared or disappeared. All nodes when there is no
    /// previous frame.
    pub changed: BTreeSet<String>,
}

pub fn condition(
    frame: &SnapshotFrame,
    rules: &[AlertRule],
    previous: Option<&SnapshotFrame>,
) -> ConditionedFrame {
    let alerts = evaluate_alerts(frame, rules);
    let changed = match previous {
        None => frame.nodes.keys().cloned().collect(),
        Some(prev) => {
            let mut set: BTreeSet<String> = frame
                .nodes
                .iter()
                .filter(|(name, node)| prev.nodes.get(*name) != Some(*node))
                .map(|(name, _)| name.clone())
                .collect();
            set.extend(
                prev.nodes
                    .keys()
                    .filter(|name| !frame.nodes.contains_key(*name))
                    .cloned(),
            );
            set
        }
    };
    let mut out = frame.clone();
    for alert in &alerts {
        if let Some(node) = out.nodes.get_mut(&alert.node) {
            node.alerts.push(alert.rule_id.clone());
        }
    }
    for node in out.nodes.values_mut() {
        node.alerts.sort();
        node.alerts.dedup();
    }
    ConditionedFrame {
        frame: out,
        alerts,
        changed,
    }
}
