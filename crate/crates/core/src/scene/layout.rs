//! Rack/stack placement of nodes and their sub-elements.
//!
//! Racks sit side by side along x. Inside a rack, slots fill a stack
//! bottom-up (y) and then move to the next stack (x). With no racks
//! configured, every node in the frame is placed automatically in name
//! order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::LayoutError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub position: [f64; 3],
    pub scale: [f64; 3],
}

/// Generated node names: `prefix` + zero-padded counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NameRange {
    pub prefix: String,
    pub start: u32,
    pub count: u32,
    #[serde(default = "default_width")]
    pub width: usize,
}

fn default_width() -> usize {
    4
}

impl NameRange {
    pub fn names(&self) -> impl Iterator<Item = String> + '_ {
        (self.start..self.start + self.count).map(move |i| format!("{}{:0w$}", self.prefix, i, w = self.width))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RackSpec {
    pub name: String,
    /// Explicit node names in slot order.
    #[serde(default)]
    pub nodes: Vec<String>,
    /// Generated names appended after `nodes`.
    #[serde(default)]
    pub ranges: Vec<NameRange>,
}

/// Sizes of node sub-elements, relative to the node origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElementGeometry {
    pub base_scale: [f64; 3],
    pub bar_scale: [f64; 3],
    pub bar_pitch: f64,
    pub bar_origin_y: f64,
    pub outline_margin: f64,
}

impl Default for ElementGeometry {
    fn default() -> Self {
        Self {
            base_scale: [1.0, 0.4, 1.0],
            bar_scale: [0.8, 0.025, 0.01],
            bar_pitch: 0.032,
            bar_origin_y: -0.09,
            outline_margin: 0.04,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub nodes_per_stack: u32,
    pub stacks_per_rack: u32,
    pub node_height: f64,
    pub stack_spacing: f64,
    pub rack_spacing: f64,
    #[serde(rename = "rack")]
    pub racks: Vec<RackSpec>,
    pub geometry: ElementGeometry,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            nodes_per_stack: 10,
            stacks_per_rack: 4,
            node_height: 0.45,
            stack_spacing: 1.4,
            rack_spacing: 7.0,
            racks: Vec::new(),
            geometry: ElementGeometry::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub rack: String,
    pub slot: u32,
    pub origin: [f64; 3],
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.nodes_per_stack == 0 || self.stacks_per_rack == 0 {
            return Err(LayoutError::Invalid("nodes_per_stack and stacks_per_rack must be positive".into()));
        }
        Ok(())
    }

    pub fn is_auto(&self) -> bool {
        self.racks.is_empty()
    }

    fn slot_origin(&self, rack_index: usize, slot: u32) -> [f64; 3] {
        let stack = slot / self.nodes_per_stack;
        let level = slot % self.nodes_per_stack;
        [
            rack_index as f64 * self.rack_spacing + stack as f64 * self.stack_spacing,
            level as f64 * self.node_height,
            0.0,
        ]
    }

    /// Placement of every configured node.
    pub fn placements(&self) -> Result<BTreeMap<String, Placement>, LayoutError> {
        let mut out = BTreeMap::new();
        for (ri, rack) in self.racks.iter().enumerate() {
            let names = rack
                .nodes
                .iter()
                .cloned()
                .chain(rack.ranges.iter().flat_map(|r| r.names()));
            for (slot, name) in names.enumerate() {
                let slot = slot as u32;
                let p = Placement {
                    rack: rack.name.clone(),
                    slot,
                    origin: self.slot_origin(ri, slot),
                };
                if out.insert(name.clone(), p).is_some() {
                    return Err(LayoutError::DuplicatePlacement(name));
                }
            }
        }
        Ok(out)
    }

    /// Placement of `names` in order, filling racks of
    /// `nodes_per_stack * stacks_per_rack` slots.
    pub fn auto_placements<'a>(&self, names: impl Iterator<Item = &'a String>) -> BTreeMap<String, Placement> {
        let per_rack = (self.nodes_per_stack * self.stacks_per_rack).max(1) as usize;
        names
            .enumerate()
            .map(|(i, name)| {
                let (ri, slot) = (i / per_rack, (i % per_rack) as u32);
                (
                    name.clone(),
                    Placement {
                        rack: format!("rack-{:02}", ri + 1),
                        slot,
                        origin: self.slot_origin(ri, slot),
                    },
                )
            })
            .collect()
    }
}

impl ElementGeometry {
    fn front(&self) -> f64 {
        self.base_scale[2] / 2.0 + self.bar_scale[2] / 2.0
    }

    pub fn base(&self, origin: [f64; 3]) -> Transform {
        Transform {
            position: origin,
            scale: self.base_scale,
        }
    }

    pub fn node_outline(&self, origin: [f64; 3]) -> Transform {
        let m = 1.0 + 2.0 * self.outline_margin;
        Transform {
            position: origin,
            scale: self.base_scale.map(|s| s * m),
        }
    }

    /// Bar `bar` (0 utilization, 1 memory, 2 power) of GPU `gpu`.
    pub fn bar(&self, origin: [f64; 3], gpu: u32, bar: u32) -> Transform {
        let row = (gpu * 3 + bar) as f64;
        Transform {
            position: [
                origin[0],
                origin[1] + self.bar_origin_y + row * self.bar_pitch,
                origin[2] + self.front(),
            ],
            scale: self.bar_scale,
        }
    }

    pub fn gpu_outline(&self, origin: [f64; 3], gpu: u32) -> Transform {
        let middle = self.bar(origin, gpu, 1);
        Transform {
            position: middle.position,
            scale: [
                self.bar_scale[0] * (1.0 + 2.0 * self.outline_margin),
                3.0 * self.bar_pitch,
                self.bar_scale[2],
            ],
        }
    }
}
