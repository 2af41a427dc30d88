//! GPU-instancing batch planner.
//!
//! Items sharing a `(mesh_id, template_id)` pair go into one batch; per-instance
//! properties and transforms never split a batch.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SceneError;
use crate::scene::RenderItem;

/// One instanced draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub mesh_id: String,
    pub template_id: String,
    /// Members ordered by item id.
    pub instances: Vec<RenderItem>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

type Key = (String, String);

/// Groups items into batches ordered by `(mesh_id, template_id)`.
pub fn plan_batches(items: &[RenderItem]) -> Result<Vec<Batch>, SceneError> {
    let mut seen = HashSet::with_capacity(items.len());
    for item in items {
        if !seen.insert(item.item_id.as_str()) {
            return Err(SceneError::DuplicateItem(item.item_id.clone()));
        }
    }
    let groups: BTreeMap<Key, Vec<RenderItem>> = items
        .par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<Key, Vec<RenderItem>>, item| {
            acc.entry((item.mesh_id.clone(), item.template_id.clone()))
                .or_default()
                .push(item.clone());
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, mut v) in b {
                a.entry(k).or_default().append(&mut v);
            }
            a
        });
    Ok(groups
        .into_iter()
        .map(|((mesh_id, template_id), mut instances)| {
            instances.sort_by(|a, b| a.item_id.cmp(&b.item_id));
            Batch {
                mesh_id,
                template_id,
                instances,
            }
        })
        .collect())
}

/// Compact batch description: key plus member ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub mesh_id: String,
    pub template_id: String,
    pub item_ids: Vec<String>,
}

impl From<&Batch> for BatchSummary {
    fn from(b: &Batch) -> Self {
        Self {
            mesh_id: b.mesh_id.clone(),
            template_id: b.template_id.clone(),
            item_ids: b.instances.iter().map(|i| i.item_id.clone()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Element, InstanceProps, Transform};

    pub(crate) fn item(id: &str, mesh: &str, template: &str, load: f64) -> RenderItem {
        RenderItem {
            item_id: id.into(),
            node: "n".into(),
            element: Element::Base,
            mesh_id: mesh.into(),
            template_id: template.into(),
            instance: InstanceProps { load, ..Default::default() },
            transform: Transform { position: [0.0; 3], scale: [1.0; 3] },
        }
    }

    #[test]
    fn same_mesh_and_template_share_a_batch() {
        let items = vec![item("c", "m", "t", 0.1), item("a", "m", "t", 0.5), item("b", "m", "t", 0.9)];
        let batches = plan_batches(&items).unwrap();
        assert_eq!(batches.len(), 1);
        let ids: Vec<_> = batches[0].instances.iter().map(|i| i.item_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn different_templates_split() {
        let items = vec![item("a", "m", "t1", 0.1), item("b", "m", "t2", 0.1)];
        assert_eq!(plan_batches(&items).unwrap().len(), 2);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let items = vec![item("a", "m", "t", 0.1), item("a", "m2", "t", 0.1)];
        assert_eq!(plan_batches(&items).unwrap_err(), SceneError::DuplicateItem("a".into()));
    }

    #[test]
    fn ordering() {
        let items = vec![item("1", "b", "x", 0.0), item("2", "a", "z", 0.0), item("3", "a", "y", 0.0)];
        let keys: Vec<_> = plan_batches(&items)
            .unwrap()
            .iter()
            .map(|b| format!("{}/{}", b.mesh_id, b.template_id))
            .collect();
        assert_eq!(keys, ["a/y", "a/z", "b/x"]);
    }
}
