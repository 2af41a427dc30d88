//! Minimal per-frame property deltas between two scenes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::build::Scene;
use super::encode::InstanceProps;

/// Shader property id of an `InstanceProps` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PropertyId {
    Load,
    OutlineEnabled,
    IdleFlag,
    OffFlag,
    AlertFlag,
}

impl PropertyId {
    pub const ALL: [PropertyId; 5] = [
        PropertyId::Load,
        PropertyId::OutlineEnabled,
        PropertyId::IdleFlag,
        PropertyId::OffFlag,
        PropertyId::AlertFlag,
    ];

    pub fn read(self, p: &InstanceProps) -> f64 {
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        match self {
            PropertyId::Load => p.load,
            PropertyId::OutlineEnabled => flag(p.outline_enabled),
            PropertyId::IdleFlag => flag(p.idle_flag),
            PropertyId::OffFlag => flag(p.off_flag),
            PropertyId::AlertFlag => flag(p.alert_flag),
        }
    }

    pub fn write(self, p: &mut InstanceProps, value: f64) -> Result<(), ApplyError> {
        let flag = || match value {
            0.0 => Ok(false),
            1.0 => Ok(true),
            _ => Err(ApplyError::BadValue { property: self, value }),
        };
        match self {
            PropertyId::Load => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(ApplyError::BadValue { property: self, value });
                }
                p.load = value;
            }
            PropertyId::OutlineEnabled => p.outline_enabled = flag()?,
            PropertyId::IdleFlag => p.idle_flag = flag()?,
            PropertyId::OffFlag => p.off_flag = flag()?,
            PropertyId::AlertFlag => p.alert_flag = flag()?,
        }
        Ok(())
    }
}

/// Changed per-instance properties of one render item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderPropertyUpdate {
    pub item_id: String,
    pub material_slot: u32,
    pub props: BTreeMap<PropertyId, f64>,
}

/// The two scenes differ in more than per-instance properties; a full
/// rebuild is required.
#[derive(Debug, Clone, PartialEq, Eq, Error, Default, Serialize, Deserialize)]
#[error("structural change: {} added, {} removed, {} rebound", added.len(), removed.len(), rebound.len())]
pub struct StructuralChange {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    /// Items whose mesh, template or transform changed.
    pub rebound: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApplyError {
    #[error("update references unknown item `{0}`")]
    UnknownItem(String),
    #[error("invalid value {value} for {property:?}")]
    BadValue { property: PropertyId, value: f64 },
    #[error("empty update for `{0}`")]
    Empty(String),
}

/// One update per item whose instance properties changed, listing only
/// the changed properties. Values compare bitwise so applying the result
/// reproduces `next` exactly.
pub fn diff_updates(prev: &Scene, next: &Scene) -> Result<Vec<RenderPropertyUpdate>, StructuralChange> {
    let prev_ids: BTreeSet<&String> = prev.items.keys().collect();
    let next_ids: BTreeSet<&String> = next.items.keys().collect();
    let mut change = StructuralChange {
        added: next_ids.difference(&prev_ids).map(|s| s.to_string()).collect(),
        removed: prev_ids.difference(&next_ids).map(|s| s.to_string()).collect(),
        rebound: Vec::new(),
    };
    let mut updates = Vec::new();
    for (id, new) in &next.items {
        let Some(old) = prev.items.get(id) else { continue };
        if old.mesh_id != new.mesh_id || old.template_id != new.template_id || old.transform != new.transform {
            change.rebound.push(id.clone());
            continue;
        }
        let props: BTreeMap<PropertyId, f64> = PropertyId::ALL
            .into_iter()
            .filter(|p| p.read(&old.instance).to_bits() != p.read(&new.instance).to_bits())
            .map(|p| (p, p.read(&new.instance)))
            .collect();
        if !props.is_empty() {
            updates.push(RenderPropertyUpdate {
                item_id: id.clone(),
                material_slot: 0,
                props,
            });
        }
    }
    if change.added.is_empty() && change.removed.is_empty() && change.rebound.is_empty() {
        Ok(updates)
    } else {
        Err(change)
    }
}

/// Applies updates in place. Validates every update before touching the
/// scene, so a failed call leaves it unchanged.
pub fn apply_updates(scene: &mut Scene, updates: &[RenderPropertyUpdate]) -> Result<(), ApplyError> {
    let mut staged = Vec::with_capacity(updates.len());
    for u in updates {
        if u.props.is_empty() {
            return Err(ApplyError::Empty(u.item_id.clone()));
        }
        let item = scene
            .items
            .get(&u.item_id)
            .ok_or_else(|| ApplyError::UnknownItem(u.item_id.clone()))?;
        let mut inst = item.instance;
        for (p, v) in &u.props {
            p.write(&mut inst, *v)?;
        }
        staged.push((u.item_id.as_str(), inst));
    }
    for (id, inst) in staged {
        scene.items.get_mut(id).expect("checked above").instance = inst;
    }
    Ok(())
}
