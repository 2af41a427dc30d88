//! The four instancing-compatible shaders as pure functions.
//!
//! Each encoder maps a telemetry reading to what the shader draws. The
//! scene builder stores only the per-instance inputs (`InstanceProps`);
//! [`shade`] reproduces the drawn result from those inputs plus the
//! material template, which is exactly the computation a renderer runs.

use serde::{Deserialize, Serialize};

use super::color::{Color, Palette};
use super::template::{PowerBarParams, ShaderParams};
use crate::model::NodeState;

/// Per-instance shader inputs. These may differ between members of one
/// instanced batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InstanceProps {
    /// `Load`: fraction in `[0, 1]`.
    pub load: f64,
    /// `OutlineEnabled`.
    pub outline_enabled: bool,
    pub idle_flag: bool,
    pub off_flag: bool,
    pub alert_flag: bool,
}

impl InstanceProps {
    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.load) && !(self.idle_flag && self.off_flag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeBaseLook {
    pub color: Color,
    pub alert_strip: bool,
}

/// Node body: black when off, gray when idle, otherwise the load gradient.
/// The alert strip is independent of state.
pub fn node_base_encode(state: NodeState, cpu_load: f64, has_alert: bool, palette: &Palette) -> NodeBaseLook {
    let color = match state {
        NodeState::Off => palette.off,
        NodeState::Idle => palette.idle,
        NodeState::Active => palette.node_load.sample(cpu_load),
    };
    NodeBaseLook {
        color,
        alert_strip: has_alert,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarLook {
    pub fill: f64,
    pub color: Color,
}

/// Utilization or memory bar: the colored region covers `load` of the bar,
/// the rest is masked.
pub fn gpu_bar_encode(load: f64, palette: &Palette) -> BarLook {
    let fill = load.clamp(0.0, 1.0);
    BarLook {
        fill,
        color: palette.gpu_bar.sample(fill),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBarLook {
    pub fill: f64,
    pub color: Color,
    /// Set when the fill exceeds `normalized_large`; the part of the bar
    /// above that mark is drawn red.
    pub overload: bool,
}

/// Normalized fill of a power reading under the material's calibration.
pub fn power_fill(draw_w: f64, params: &PowerBarParams) -> f64 {
    ((draw_w - params.min_w) / (params.max_w - params.min_w)).clamp(0.0, 1.0)
}

pub fn power_bar_encode(draw_w: f64, params: &PowerBarParams, palette: &Palette) -> PowerBarLook {
    let fill = power_fill(draw_w, params);
    power_bar_look(fill, params, palette)
}

fn power_bar_look(fill: f64, params: &PowerBarParams, palette: &Palette) -> PowerBarLook {
    PowerBarLook {
        fill,
        color: palette.power_bar.sample(fill),
        overload: fill > params.normalized_large,
    }
}

/// Outline is shown only when the temperature strictly exceeds tolerance.
pub fn outline_encode(temp_c: f64, tolerance_c: f64) -> bool {
    temp_c > tolerance_c
}

/// Role of a drawn color; only the last three may be red.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorRole {
    Body,
    BarFill,
    AlertStrip,
    OverloadSegment,
    Outline,
}

impl ColorRole {
    pub fn may_be_red(self) -> bool {
        matches!(
            self,
            ColorRole::AlertStrip | ColorRole::OverloadSegment | ColorRole::Outline
        )
    }
}

/// Everything a shader draws for one instance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Appearance {
    /// Fraction of the mesh covered by the primary color (1 for bodies).
    pub fill: f64,
    pub colors: Vec<(ColorRole, Color)>,
    /// `[from, to]` span of the bar drawn in red.
    pub red_segment: Option<(f64, f64)>,
}

/// Evaluates a material's shader on one instance's inputs.
pub fn shade(params: &ShaderParams, props: &InstanceProps, palette: &Palette) -> Appearance {
    match params {
        ShaderParams::NodeBase { .. } => {
            let state = if props.off_flag {
                NodeState::Off
            } else if props.idle_flag {
                NodeState::Idle
            } else {
                NodeState::Active
            };
            let look = node_base_encode(state, props.load, props.alert_flag, palette);
            let mut colors = vec![(ColorRole::Body, look.color)];
            if look.alert_strip {
                colors.push((ColorRole::AlertStrip, palette.red));
            }
            Appearance {
                fill: 1.0,
                colors,
                red_segment: None,
            }
        }
        ShaderParams::GpuBar => {
            let look = gpu_bar_encode(props.load, palette);
            Appearance {
                fill: look.fill,
                colors: vec![(ColorRole::BarFill, look.color)],
                red_segment: None,
            }
        }
        ShaderParams::PowerBar(p) => {
            let look = power_bar_look(props.load.clamp(0.0, 1.0), p, palette);
            let mut colors = vec![(ColorRole::BarFill, look.color)];
            let red_segment = look.overload.then(|| {
                colors.push((ColorRole::OverloadSegment, palette.red));
                (p.normalized_large, look.fill)
            });
            Appearance {
                fill: look.fill,
                colors,
                red_segment,
            }
        }
        ShaderParams::Outline { .. } => Appearance {
            fill: if props.outline_enabled { 1.0 } else { 0.0 },
            colors: if props.outline_enabled {
                vec![(ColorRole::Outline, palette.red)]
            } else {
                Vec::new()
            },
            red_segment: None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::color::{DARK_BLUE, DARK_PURPLE, ORANGE};

    fn pal() -> Palette {
        Palette::default()
    }

    #[test]
    fn node_base_examples() {
        let off = node_base_encode(NodeState::Off, 0.7, false, &pal());
        assert_eq!(off.color, Color::BLACK);
        assert!(!off.alert_strip);
        assert_eq!(node_base_encode(NodeState::Active, 0.0, false, &pal()).color, DARK_BLUE);
        assert_eq!(node_base_encode(NodeState::Active, 1.0, false, &pal()).color, ORANGE);
        assert_eq!(node_base_encode(NodeState::Idle, 0.3, false, &pal()).color, pal().idle);
        assert!(node_base_encode(NodeState::Off, 0.0, true, &pal()).alert_strip);

        // midpoint computed independently from the stop values
        let mid = node_base_encode(NodeState::Active, 0.5, true, &pal());
        let expect = Color::new((0.05 + 1.0) / 2.0, (0.10 + 0.55) / 2.0, (0.35 + 0.10) / 2.0);
        assert!((mid.color.r - expect.r).abs() < 1e-15);
        assert!((mid.color.g - expect.g).abs() < 1e-15);
        assert!((mid.color.b - expect.b).abs() < 1e-15);
        assert!(mid.alert_strip);
    }

    #[test]
    fn gpu_bar_examples() {
        assert_eq!(gpu_bar_encode(0.0, &pal()), BarLook { fill: 0.0, color: DARK_PURPLE });
        assert_eq!(gpu_bar_encode(1.0, &pal()), BarLook { fill: 1.0, color: Color::WHITE });
        let q = gpu_bar_encode(0.25, &pal());
        assert_eq!(q.fill, 0.25);
        let expect = [0.20 * 0.75 + 0.25, 0.05 * 0.75 + 0.25, 0.30 * 0.75 + 0.25];
        assert!((q.color.r - expect[0]).abs() < 1e-15);
        assert!((q.color.g - expect[1]).abs() < 1e-15);
        assert!((q.color.b - expect[2]).abs() < 1e-15);
    }

    #[test]
    fn power_bar_examples() {
        let p = PowerBarParams { min_w: 50.0, max_w: 450.0, normalized_large: 0.9 };
        let low = power_bar_encode(50.0, &p, &pal());
        assert_eq!((low.fill, low.color, low.overload), (0.0, DARK_PURPLE, false));
        let mid = power_bar_encode(250.0, &p, &pal());
        assert_eq!(mid.fill, 0.5);
        assert!(!mid.overload);
        assert_eq!(mid.color, pal().power_bar.sample(0.5));
        let over = power_bar_encode(900.0, &p, &pal());
        assert_eq!(over.fill, 1.0);
        assert!(over.overload);
        let never = PowerBarParams { normalized_large: 1.0, ..p };
        assert!(!power_bar_encode(900.0, &never, &pal()).overload);
        // exactly at the mark: strict comparison
        let at = PowerBarParams { min_w: 0.0, max_w: 400.0, normalized_large: 0.5 };
        let look = power_bar_encode(200.0, &at, &pal());
        assert_eq!(look.fill, 0.5);
        assert!(!look.overload);
    }

    #[test]
    fn outline_examples() {
        assert!(!outline_encode(70.0, 85.0));
        assert!(outline_encode(90.0, 85.0));
        assert!(!outline_encode(85.0, 85.0));
    }

    #[test]
    fn shade_power_overload_segment() {
        let p = PowerBarParams::default();
        let props = InstanceProps { load: 0.95, ..Default::default() };
        let app = shade(&ShaderParams::PowerBar(p), &props, &pal());
        assert_eq!(app.red_segment, Some((0.9, 0.95)));
        assert!(app.colors.iter().any(|(r, _)| *r == ColorRole::OverloadSegment));
    }

    #[test]
    fn shade_matches_encoders() {
        let props = InstanceProps { load: 0.3, idle_flag: true, alert_flag: true, ..Default::default() };
        let app = shade(&ShaderParams::NodeBase { base_texture_id: "x".into() }, &props, &pal());
        assert_eq!(app.colors, vec![(ColorRole::Body, pal().idle), (ColorRole::AlertStrip, pal().red)]);
    }
}
