//! Guards the instancing rule on hand-built batches and corrupted
//! template registries: every member must resolve to the same mesh and the
//! same per-material parameters.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::plan::Batch;
use crate::scene::{RenderItem, TemplateRegistry};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Two members disagree on a per-material parameter (or on mesh or
    /// template id).
    Differs {
        first: String,
        second: String,
        parameter: String,
        first_value: String,
        second_value: String,
    },
    /// A member disagrees with the batch key.
    KeyMismatch {
        item: String,
        parameter: String,
        batch_value: String,
        item_value: String,
    },
    UnknownTemplate { item: String, template_id: String },
    /// Registry entry stored under a different id than its own.
    RegistryMismatch { key: String, template_id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Differs { first, second, parameter, first_value, second_value } => {
                write!(f, "`{first}` and `{second}` differ in {parameter}: {first_value} vs {second_value}")
            }
            Violation::KeyMismatch { item, parameter, batch_value, item_value } => {
                write!(f, "`{item}` has {parameter} {item_value}, batch has {batch_value}")
            }
            Violation::UnknownTemplate { item, template_id } => {
                write!(f, "`{item}` references unknown template `{template_id}`")
            }
            Violation::RegistryMismatch { key, template_id } => {
                write!(f, "registry key `{key}` holds template `{template_id}`")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalityReport {
    pub mesh_id: String,
    pub template_id: String,
    pub violations: Vec<Violation>,
}

impl fmt::Display for LegalityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "batch ({}, {}): {} violation(s)", self.mesh_id, self.template_id, self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for LegalityReport {}

/// Everything that must be identical across an instanced batch.
fn signature(item: &RenderItem, registry: &TemplateRegistry) -> Option<Vec<(&'static str, String)>> {
    let t = registry.get(&item.template_id)?;
    let mut sig = vec![
        ("mesh_id", item.mesh_id.clone()),
        ("template_id", item.template_id.clone()),
        ("resolved_template_id", t.template_id.clone()),
    ];
    sig.extend(t.params.fields());
    Some(sig)
}

/// Compares every member with the first resolvable one and with the batch
/// key. Any difference is a violation.
pub fn validate_batch_legality(batch: &Batch, registry: &TemplateRegistry) -> Result<(), LegalityReport> {
    let mut violations = Vec::new();
    if let Some(t) = registry.get(&batch.template_id) {
        if t.template_id != batch.template_id {
            violations.push(Violation::RegistryMismatch {
                key: batch.template_id.clone(),
                template_id: t.template_id.clone(),
            });
        }
    }
    let mut reference: Option<(&str, Vec<(&'static str, String)>)> = None;
    for item in &batch.instances {
        for (parameter, batch_value, item_value) in [
            ("mesh_id", &batch.mesh_id, &item.mesh_id),
            ("template_id", &batch.template_id, &item.template_id),
        ] {
            if batch_value != item_value {
                violations.push(Violation::KeyMismatch {
                    item: item.item_id.clone(),
                    parameter: parameter.into(),
                    batch_value: batch_value.clone(),
                    item_value: item_value.clone(),
                });
            }
        }
        let Some(sig) = signature(item, registry) else {
            violations.push(Violation::UnknownTemplate {
                item: item.item_id.clone(),
                template_id: item.template_id.clone(),
            });
            continue;
        };
        match &reference {
            None => reference = Some((&item.item_id, sig)),
            Some((first, ref_sig)) => violations.extend(diff_signatures(first, ref_sig, &item.item_id, &sig)),
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(LegalityReport {
            mesh_id: batch.mesh_id.clone(),
            template_id: batch.template_id.clone(),
            violations,
        })
    }
}

fn diff_signatures(
    first: &str,
    a: &[(&'static str, String)],
    second: &str,
    b: &[(&'static str, String)],
) -> Vec<Violation> {
    let lookup = |sig: &[(&'static str, String)], k: &str| {
        sig.iter().find(|(n, _)| *n == k).map(|(_, v)| v.clone()).unwrap_or_else(|| "<absent>".into())
    };
    let mut names: Vec<&'static str> = a.iter().chain(b).map(|(n, _)| *n).collect();
    names.sort_unstable();
    names.dedup();
    names
        .into_iter()
        .filter_map(|n| {
            let (va, vb) = (lookup(a, n), lookup(b, n));
            (va != vb).then(|| Violation::Differs {
                first: first.to_string(),
                second: second.to_string(),
                parameter: n.to_string(),
                first_value: va,
                second_value: vb,
            })
        })
        .collect()
}
