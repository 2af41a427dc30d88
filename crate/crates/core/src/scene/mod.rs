//! Visual encoding: shader semantics, layout, scene construction and deltas.

pub mod build;
pub mod color;
pub mod diff;
pub mod encode;
pub mod layout;
pub mod template;

pub use build::{
    expected_item_count, frame_to_scene, item_id, Binding, Element, ElementBindings, RenderItem, Scene,
    SceneBuilder, Tolerances,
};
pub use color::{Color, Gradient, Palette, RedRegion};
pub use diff::{apply_updates, diff_updates, ApplyError, PropertyId, RenderPropertyUpdate, StructuralChange};
pub use encode::{
    gpu_bar_encode, node_base_encode, outline_encode, power_bar_encode, shade, Appearance, ColorRole,
    InstanceProps,
};
pub use layout::{LayoutConfig, Placement, Transform};
pub use template::{MaterialTemplate, PowerBarParams, ShaderKind, ShaderParams, TemplateRegistry};
