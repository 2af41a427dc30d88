//! Focus queries: conjunctive predicates over node name, user, job and
//! alert rule id.
//!
//! Text form is whitespace-separated `key=value` tokens, e.g.
//! `node=gpu-00* user="alice"`. Keys: `node` (glob), `user`, `job`
//! (alias `job_id`), `alert`. Values may be double-quoted.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::InputError;
use crate::glob::Glob;
use crate::model::{NodeTelemetry, SnapshotFrame};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "FocusFields", into = "FocusFields")]
pub struct FocusQuery {
    node: Option<Glob>,
    user: Option<String>,
    job_id: Option<String>,
    alert: Option<String>,
}

/// Wire form of a query.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocusFields {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", alias = "job")]
    pub job_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert: Option<String>,
}

impl TryFrom<FocusFields> for FocusQuery {
    type Error = InputError;

    fn try_from(f: FocusFields) -> Result<Self, InputError> {
        let q = FocusQuery {
            node: f.node.as_deref().map(Glob::new).transpose()?,
            user: f.user,
            job_id: f.job_id,
            alert: f.alert,
        };
        if q.predicate_count() == 0 {
            return Err(InputError::Query("focus query needs at least one predicate".into()));
        }
        Ok(q)
    }
}

impl From<FocusQuery> for FocusFields {
    fn from(q: FocusQuery) -> Self {
        FocusFields {
            node: q.node.map(|g| g.as_str().to_string()),
            user: q.user,
            job_id: q.job_id,
            alert: q.alert,
        }
    }
}

impl FocusQuery {
    pub fn parse(text: &str) -> Result<Self, InputError> {
        let mut f = FocusFields::default();
        for token in text.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| InputError::Query(format!("expected key=value, found `{token}`")))?;
            let value = value
                .strip_prefix('"')
                .and_then(|v| v.strip_suffix('"'))
                .unwrap_or(value);
            if value.is_empty() {
                return Err(InputError::Query(format!("empty value for `{key}`")));
            }
            let slot = match key {
                "node" => &mut f.node,
                "user" => &mut f.user,
                "job" | "job_id" => &mut f.job_id,
                "alert" => &mut f.alert,
                other => return Err(InputError::Query(format!("unknown key `{other}`"))),
            };
            if slot.replace(value.to_string()).is_some() {
                return Err(InputError::Query(format!("`{key}` given twice")));
            }
        }
        f.try_into()
    }

    pub fn predicate_count(&self) -> usize {
        [self.node.is_some(), self.user.is_some(), self.job_id.is_some(), self.alert.is_some()]
            .iter()
            .filter(|b| **b)
            .count()
    }

    pub fn matches(&self, node: &NodeTelemetry) -> bool {
        self.node.as_ref().is_none_or(|g| g.matches(&node.node_name))
            && self.user.as_ref().is_none_or(|u| node.user.as_ref() == Some(u))
            && self.job_id.as_ref().is_none_or(|j| node.job_id.as_ref() == Some(j))
            && self.alert.as_ref().is_none_or(|a| node.alerts.iter().any(|x| x == a))
    }
}

impl fmt::Display for FocusQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(g) = &self.node {
            parts.push(format!("node={}", g.as_str()));
        }
        for (k, v) in [("user", &self.user), ("job", &self.job_id), ("alert", &self.alert)] {
            if let Some(v) = v {
                parts.push(format!("{k}={v}"));
            }
        }
        f.write_str(&parts.join(" "))
    }
}

/// Names of nodes matching every predicate, in name order.
pub fn focus(frame: &SnapshotFrame, query: &FocusQuery) -> Vec<String> {
    frame
        .nodes
        .values()
        .filter(|n| query.matches(n))
        .map(|n| n.node_name.clone())
        .collect()
}
