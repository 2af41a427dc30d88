//! Material templates: a shader plus its per-material parameter values.
//!
//! Two render items can share an instanced draw only if they reference the
//! same template; everything that varies per item lives in `InstanceProps`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShaderKind {
    NodeBase,
    GpuBar,
    PowerBar,
    Outline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBarParams {
    /// Draw mapped to an empty bar (`Min`).
    pub min_w: f64,
    /// Draw mapped to a full bar (`Max`).
    pub max_w: f64,
    /// Fill fraction above which the bar turns red (`NormalizedLarge`).
    pub normalized_large: f64,
}

impl Default for PowerBarParams {
    fn default() -> Self {
        Self {
            min_w: 0.0,
            max_w: 400.0,
            normalized_large: 0.9,
        }
    }
}

/// Per-material parameters, tagged by shader.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shader", rename_all = "snake_case")]
pub enum ShaderParams {
    NodeBase {
        /// Texture mixed into the computed color (`BaseMap`).
        base_texture_id: String,
    },
    GpuBar,
    PowerBar(PowerBarParams),
    Outline {
        thickness: f64,
        proportion: f64,
    },
}

impl ShaderParams {
    pub fn kind(&self) -> ShaderKind {
        match self {
            ShaderParams::NodeBase { .. } => ShaderKind::NodeBase,
            ShaderParams::GpuBar => ShaderKind::GpuBar,
            ShaderParams::PowerBar(_) => ShaderKind::PowerBar,
            ShaderParams::Outline { .. } => ShaderKind::Outline,
        }
    }

    /// `(name, value)` pairs for every per-material parameter, shader
    /// included, used when comparing two materials field by field.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("shader", format!("{:?}", self.kind()))];
        match self {
            ShaderParams::NodeBase { base_texture_id } => {
                out.push(("base_texture_id", base_texture_id.clone()))
            }
            ShaderParams::GpuBar => {}
            ShaderParams::PowerBar(p) => {
                out.push(("min_w", p.min_w.to_string()));
                out.push(("max_w", p.max_w.to_string()));
                out.push(("normalized_large", p.normalized_large.to_string()));
            }
            ShaderParams::Outline {
                thickness,
                proportion,
            } => {
                out.push(("thickness", thickness.to_string()));
                out.push(("proportion", proportion.to_string()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialTemplate {
    pub template_id: String,
    #[serde(flatten)]
    pub params: ShaderParams,
}

impl MaterialTemplate {
    pub fn new(template_id: impl Into<String>, params: ShaderParams) -> Result<Self, ConfigError> {
        let t = Self {
            template_id: template_id.into(),
            params,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn shader_kind(&self) -> ShaderKind {
        self.params.kind()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |message: &str| {
            Err(ConfigError::Template {
                template_id: self.template_id.clone(),
                message: message.to_string(),
            })
        };
        if self.template_id.is_empty() {
            return bad("empty template id");
        }
        match &self.params {
            ShaderParams::PowerBar(p) => {
                if !(p.min_w.is_finite() && p.max_w.is_finite()) || p.min_w >= p.max_w {
                    return bad("power bar requires finite min_w < max_w");
                }
                if !(p.normalized_large > 0.0 && p.normalized_large <= 1.0) {
                    return bad("normalized_large must lie in (0, 1]");
                }
            }
            ShaderParams::Outline {
                thickness,
                proportion,
            } => {
                if !(*thickness > 0.0 && thickness.is_finite()) {
                    return bad("outline thickness must be positive");
                }
                if !(*proportion > 0.0 && proportion.is_finite()) {
                    return bad("outline proportion must be positive");
                }
            }
            ShaderParams::NodeBase { base_texture_id } if base_texture_id.is_empty() => {
                return bad("node base requires a base_texture_id");
            }
            _ => {}
        }
        Ok(())
    }
}

/// Templates by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, MaterialTemplate>,
}

impl TemplateRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, template: MaterialTemplate) -> Result<(), ConfigError> {
        template.validate()?;
        self.templates.insert(template.template_id.clone(), template);
        Ok(())
    }

    /// Registers `template` under `key` without checking that the key
    /// equals the template's own id. Batch legality checks detect the
    /// mismatch; this exists to load registries exactly as found.
    pub fn insert_unchecked(&mut self, key: impl Into<String>, template: MaterialTemplate) {
        self.templates.insert(key.into(), template);
    }

    pub fn get(&self, id: &str) -> Option<&MaterialTemplate> {
        self.templates.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &MaterialTemplate)> {
        self.templates.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Builds a registry from `id -> params` entries (the config form).
    pub fn from_params(entries: BTreeMap<String, ShaderParams>) -> Result<Self, ConfigError> {
        let mut reg = Self::new();
        for (id, params) in entries {
            reg.insert(MaterialTemplate::new(id, params)?)?;
        }
        Ok(reg)
    }

    pub fn to_params(&self) -> BTreeMap<String, ShaderParams> {
        self.templates
            .iter()
            .map(|(k, v)| (k.clone(), v.params.clone()))
            .collect()
    }
}

pub mod ids {
    pub const NODE_BASE_GPU: &str = "node_base.gpu";
    pub const NODE_BASE_CPU: &str = "node_base.cpu";
    pub const GPU_BAR: &str = "gpu_bar";
    pub const POWER_BAR: &str = "power_bar";
    pub const OUTLINE_NODE: &str = "outline.node";
    pub const OUTLINE_GPU: &str = "outline.gpu";
}

impl TemplateRegistry {
    /// The shipped template set: one base per chassis type, the shared
    /// utilization/memory bar, the power bar, and two outline proportions.
    pub fn defaults() -> Self {
        let entries = [
            (
                ids::NODE_BASE_GPU,
                ShaderParams::NodeBase {
                    base_texture_id: "casing_gpu_2u".into(),
                },
            ),
            (
                ids::NODE_BASE_CPU,
                ShaderParams::NodeBase {
                    base_texture_id: "casing_cpu_1u".into(),
                },
            ),
            (ids::GPU_BAR, ShaderParams::GpuBar),
            (ids::POWER_BAR, ShaderParams::PowerBar(PowerBarParams::default())),
            (
                ids::OUTLINE_NODE,
                ShaderParams::Outline {
                    thickness: 0.04,
                    proportion: 1.0,
                },
            ),
            (
                ids::OUTLINE_GPU,
                ShaderParams::Outline {
                    thickness: 0.02,
                    proportion: 0.33,
                },
            ),
        ];
        Self::from_params(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
            .expect("default templates are valid")
    }
}
