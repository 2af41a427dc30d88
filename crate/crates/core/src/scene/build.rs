//! Frame to render items.
//!
//! Per node: one base, one node outline, and per GPU three bars
//! (utilization, memory, power) plus one GPU outline. Item ids are
//! `node/<name>/<element>` and depend only on the node name and GPU index,
//! so they are stable across restarts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::color::Palette;
use super::encode::{outline_encode, power_fill, shade, Appearance, InstanceProps};
use super::layout::{LayoutConfig, Placement, Transform};
use super::template::{ids, PowerBarParams, ShaderKind, ShaderParams, TemplateRegistry};
use crate::error::LayoutError;
use crate::model::{NodeKind, NodeState, NodeTelemetry, SnapshotFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Base,
    NodeOutline,
    GpuUtil(u32),
    GpuMem(u32),
    GpuPower(u32),
    GpuOutline(u32),
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Base => f.write_str("base"),
            Element::NodeOutline => f.write_str("outline"),
            Element::GpuUtil(g) => write!(f, "gpu{g}/util"),
            Element::GpuMem(g) => write!(f, "gpu{g}/mem"),
            Element::GpuPower(g) => write!(f, "gpu{g}/power"),
            Element::GpuOutline(g) => write!(f, "gpu{g}/outline"),
        }
    }
}

impl FromStr for Element {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => return Ok(Element::Base),
            "outline" => return Ok(Element::NodeOutline),
            _ => {}
        }
        let bad = || format!("unknown element `{s}`");
        let (gpu, part) = s.strip_prefix("gpu").and_then(|r| r.split_once('/')).ok_or_else(bad)?;
        let g: u32 = gpu.parse().map_err(|_| bad())?;
        match part {
            "util" => Ok(Element::GpuUtil(g)),
            "mem" => Ok(Element::GpuMem(g)),
            "power" => Ok(Element::GpuPower(g)),
            "outline" => Ok(Element::GpuOutline(g)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Element {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn item_id(node: &str, element: Element) -> String {
    format!("node/{node}/{element}")
}

/// One drawable object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderItem {
    pub item_id: String,
    pub node: String,
    pub element: Element,
    pub mesh_id: String,
    pub template_id: String,
    pub instance: InstanceProps,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub mesh: String,
    pub template: String,
}

fn bind(mesh: &str, template: &str) -> Binding {
    Binding {
        mesh: mesh.into(),
        template: template.into(),
    }
}

/// Mesh and material used for each element kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElementBindings {
    pub base_gpu: Binding,
    pub base_cpu: Binding,
    pub util_bar: Binding,
    pub mem_bar: Binding,
    pub power_bar: Binding,
    pub node_outline: Binding,
    pub gpu_outline: Binding,
}

pub mod meshes {
    pub const CHASSIS_GPU: &str = "chassis_2u";
    pub const CHASSIS_CPU: &str = "chassis_1u";
    pub const BAR: &str = "bar";
    pub const OUTLINE_NODE: &str = "outline_box";
    pub const OUTLINE_GPU: &str = "outline_frame";
}

impl Default for ElementBindings {
    fn default() -> Self {
        Self {
            base_gpu: bind(meshes::CHASSIS_GPU, ids::NODE_BASE_GPU),
            base_cpu: bind(meshes::CHASSIS_CPU, ids::NODE_BASE_CPU),
            util_bar: bind(meshes::BAR, ids::GPU_BAR),
            mem_bar: bind(meshes::BAR, ids::GPU_BAR),
            power_bar: bind(meshes::BAR, ids::POWER_BAR),
            node_outline: bind(meshes::OUTLINE_NODE, ids::OUTLINE_NODE),
            gpu_outline: bind(meshes::OUTLINE_GPU, ids::OUTLINE_GPU),
        }
    }
}

impl ElementBindings {
    pub fn all(&self) -> [(&'static str, &Binding); 7] {
        [
            ("base_gpu", &self.base_gpu),
            ("base_cpu", &self.base_cpu),
            ("util_bar", &self.util_bar),
            ("mem_bar", &self.mem_bar),
            ("power_bar", &self.power_bar),
            ("node_outline", &self.node_outline),
            ("gpu_outline", &self.gpu_outline),
        ]
    }
}

/// Temperatures above which outlines are shown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub node_temp_c: f64,
    pub gpu_temp_c: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            node_temp_c: 75.0,
            gpu_temp_c: 85.0,
        }
    }
}

/// Render items keyed by item id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scene {
    pub items: BTreeMap<String, RenderItem>,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item_list(&self) -> Vec<RenderItem> {
        self.items.values().cloned().collect()
    }
}

/// Closed-form item count: `1 + 3g + g + 1` per node with `g` GPUs.
pub fn expected_item_count(gpus_per_node: impl IntoIterator<Item = usize>) -> usize {
    gpus_per_node.into_iter().map(|g| 1 + 3 * g + g + 1).sum()
}

/// Everything needed to turn frames into scenes.
#[derive(Debug, Clone)]
pub struct SceneBuilder {
    pub layout: LayoutConfig,
    pub templates: TemplateRegistry,
    pub bindings: ElementBindings,
    pub palette: Palette,
    pub tolerances: Tolerances,
    fixed: Option<BTreeMap<String, Placement>>,
}

impl SceneBuilder {
    pub fn new(
        layout: LayoutConfig,
        templates: TemplateRegistry,
        bindings: ElementBindings,
        palette: Palette,
        tolerances: Tolerances,
    ) -> Result<Self, LayoutError> {
        layout.validate()?;
        palette.validate().map_err(LayoutError::Invalid)?;
        for (element, b) in bindings.all() {
            let t = templates
                .get(&b.template)
                .ok_or_else(|| LayoutError::UnknownTemplate(b.template.clone()))?;
            let expected = match element {
                "base_gpu" | "base_cpu" => ShaderKind::NodeBase,
                "util_bar" | "mem_bar" => ShaderKind::GpuBar,
                "power_bar" => ShaderKind::PowerBar,
                _ => ShaderKind::Outline,
            };
            if t.shader_kind() != expected {
                return Err(LayoutError::Invalid(format!(
                    "element `{element}` needs a {expected:?} template, `{}` is {:?}",
                    b.template,
                    t.shader_kind()
                )));
            }
        }
        let fixed = if layout.is_auto() {
            None
        } else {
            Some(layout.placements()?)
        };
        Ok(Self {
            layout,
            templates,
            bindings,
            palette,
            tolerances,
            fixed,
        })
    }

    pub fn with_defaults() -> Self {
        Self::new(
            LayoutConfig::default(),
            TemplateRegistry::defaults(),
            ElementBindings::default(),
            Palette::default(),
            Tolerances::default(),
        )
        .expect("defaults are consistent")
    }

    fn power_params(&self) -> &PowerBarParams {
        match &self.templates.get(&self.bindings.power_bar.template).map(|t| &t.params) {
            Some(ShaderParams::PowerBar(p)) => p,
            _ => unreachable!("checked in SceneBuilder::new"),
        }
    }

    /// Builds every render item for `frame`; nodes are encoded in parallel.
    pub fn build(&self, frame: &SnapshotFrame) -> Result<Scene, LayoutError> {
        let auto;
        let placements = match &self.fixed {
            Some(p) => p,
            None => {
                auto = self.layout.auto_placements(frame.nodes.keys());
                &auto
            }
        };
        let per_node: Vec<Vec<RenderItem>> = frame
            .nodes
            .par_iter()
            .map(|(name, node)| {
                let place = placements
                    .get(name)
                    .ok_or_else(|| LayoutError::MissingNode(name.clone()))?;
                Ok(self.node_items(node, place.origin))
            })
            .collect::<Result<_, LayoutError>>()?;
        let items = per_node
            .into_iter()
            .flatten()
            .map(|item| (item.item_id.clone(), item))
            .collect();
        Ok(Scene { items })
    }

    /// Items for one node, in element order.
    pub fn node_items(&self, node: &NodeTelemetry, origin: [f64; 3]) -> Vec<RenderItem> {
        let geo = &self.layout.geometry;
        let b = &self.bindings;
        let mut items = Vec::with_capacity(2 + 4 * node.gpus.len());
        let mut push = |element: Element, binding: &Binding, instance: InstanceProps, transform: Transform| {
            items.push(RenderItem {
                item_id: item_id(&node.node_name, element),
                node: node.node_name.clone(),
                element,
                mesh_id: binding.mesh.clone(),
                template_id: binding.template.clone(),
                instance,
                transform,
            })
        };

        let base_binding = match node.kind {
            NodeKind::GpuAccelerated => &b.base_gpu,
            NodeKind::CpuOnly => &b.base_cpu,
        };
        let base = InstanceProps {
            load: node.cpu_load.clamp(0.0, 1.0),
            outline_enabled: false,
            idle_flag: node.state == NodeState::Idle,
            off_flag: node.state == NodeState::Off,
            alert_flag: !node.alerts.is_empty(),
        };
        push(Element::Base, base_binding, base, geo.base(origin));
        let outline = |on: bool| InstanceProps {
            outline_enabled: on,
            ..Default::default()
        };
        push(
            Element::NodeOutline,
            &b.node_outline,
            outline(outline_encode(node.node_temp_c, self.tolerances.node_temp_c)),
            geo.node_outline(origin),
        );

        let power = self.power_params();
        for gpu in &node.gpus {
            let g = gpu.gpu_index;
            let bar = |load: f64| InstanceProps {
                load: load.clamp(0.0, 1.0),
                ..Default::default()
            };
            push(Element::GpuUtil(g), &b.util_bar, bar(gpu.utilization), geo.bar(origin, g, 0));
            push(Element::GpuMem(g), &b.mem_bar, bar(gpu.mem_fraction()), geo.bar(origin, g, 1));
            push(
                Element::GpuPower(g),
                &b.power_bar,
                bar(power_fill(gpu.power_draw_w, power)),
                geo.bar(origin, g, 2),
            );
            push(
                Element::GpuOutline(g),
                &b.gpu_outline,
                outline(outline_encode(gpu.temp_c, self.tolerances.gpu_temp_c)),
                geo.gpu_outline(origin, g),
            );
        }
        items
    }

    /// What the item's shader draws.
    pub fn appearance(&self, item: &RenderItem) -> Option<Appearance> {
        let t = self.templates.get(&item.template_id)?;
        Some(shade(&t.params, &item.instance, &self.palette))
    }
}

/// Builds the scene for `frame` with `builder`'s layout, templates and palette.
pub fn frame_to_scene(frame: &SnapshotFrame, builder: &SceneBuilder) -> Result<Scene, LayoutError> {
    builder.build(frame)
}
