//! Colors, two-stop gradients and the palette that fixes the color policy.

use serde::{Deserialize, Serialize};

/// Linear RGB triple, components in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Color {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Color {
    pub const BLACK: Color = Color::new(0.0, 0.0, 0.0);
    pub const WHITE: Color = Color::new(1.0, 1.0, 1.0);

    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Self { r, g, b }
    }

    pub fn is_valid(&self) -> bool {
        [self.r, self.g, self.b].iter().all(|c| (0.0..=1.0).contains(c))
    }
}

impl From<[f64; 3]> for Color {
    fn from([r, g, b]: [f64; 3]) -> Self {
        Color { r, g, b }
    }
}

impl From<Color> for [f64; 3] {
    fn from(c: Color) -> Self {
        [c.r, c.g, c.b]
    }
}

/// Linear blend between two stops. `sample(0)` and `sample(1)` return the
/// stops bit-exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gradient {
    pub low: Color,
    pub high: Color,
}

impl Gradient {
    pub const fn new(low: Color, high: Color) -> Self {
        Self { low, high }
    }

    pub fn sample(&self, t: f64) -> Color {
        let t = t.clamp(0.0, 1.0);
        // a*(1-t) + b*t keeps both endpoints exact, unlike a + (b-a)*t
        let mix = |a: f64, b: f64| (a * (1.0 - t) + b * t).clamp(0.0, 1.0);
        Color {
            r: mix(self.low.r, self.high.r),
            g: mix(self.low.g, self.high.g),
            b: mix(self.low.b, self.high.b),
        }
    }
}

/// Colors that read as "red". Only alert strips, over-tolerance outlines
/// and power-overload segments may land here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RedRegion {
    pub min_r: f64,
    pub max_g: f64,
    pub max_b: f64,
}

impl Default for RedRegion {
    fn default() -> Self {
        Self {
            min_r: 0.6,
            max_g: 0.35,
            max_b: 0.35,
        }
    }
}

impl RedRegion {
    pub fn contains(&self, c: Color) -> bool {
        c.r >= self.min_r && c.g <= self.max_g && c.b <= self.max_b
    }

    /// Whether any sample of `g` lands in the region. Each bound is linear
    /// in `t`, so the admissible `t` set is an interval.
    pub fn intersects(&self, g: &Gradient) -> bool {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        // admit t where slope * t + offset >= 0
        let mut clip = |slope: f64, offset: f64| {
            if slope == 0.0 {
                if offset < 0.0 {
                    hi = -1.0;
                }
            } else if slope > 0.0 {
                lo = lo.max(-offset / slope);
            } else {
                hi = hi.min(-offset / slope);
            }
        };
        clip(g.high.r - g.low.r, g.low.r - self.min_r);
        clip(g.low.g - g.high.g, self.max_g - g.low.g);
        clip(g.low.b - g.high.b, self.max_b - g.low.b);
        lo <= hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Palette {
    /// Node base by CPU load: dark blue to orange.
    pub node_load: Gradient,
    /// GPU utilization and memory bars: dark purple to white.
    pub gpu_bar: Gradient,
    pub power_bar: Gradient,
    pub idle: Color,
    pub off: Color,
    pub red: Color,
    pub red_region: RedRegion,
}

pub const DARK_BLUE: Color = Color::new(0.05, 0.10, 0.35);
pub const ORANGE: Color = Color::new(1.0, 0.55, 0.10);
pub const DARK_PURPLE: Color = Color::new(0.20, 0.05, 0.30);
pub const GRAY: Color = Color::new(0.5, 0.5, 0.5);
pub const RED: Color = Color::new(0.90, 0.08, 0.08);

impl Default for Palette {
    fn default() -> Self {
        Self {
            node_load: Gradient::new(DARK_BLUE, ORANGE),
            gpu_bar: Gradient::new(DARK_PURPLE, Color::WHITE),
            power_bar: Gradient::new(DARK_PURPLE, Color::WHITE),
            idle: GRAY,
            off: Color::BLACK,
            red: RED,
            red_region: RedRegion::default(),
        }
    }
}

impl Palette {
    /// Checks component ranges and that red stays reserved: the gradients
    /// and state colors must stay out of the red region while `red` itself
    /// must fall inside it.
    pub fn validate(&self) -> Result<(), String> {
        let named = [
            ("node_load.low", self.node_load.low),
            ("node_load.high", self.node_load.high),
            ("gpu_bar.low", self.gpu_bar.low),
            ("gpu_bar.high", self.gpu_bar.high),
            ("power_bar.low", self.power_bar.low),
            ("power_bar.high", self.power_bar.high),
            ("idle", self.idle),
            ("off", self.off),
            ("red", self.red),
        ];
        for (name, c) in named {
            if !c.is_valid() {
                return Err(format!("palette color `{name}` has components outside [0,1]"));
            }
        }
        if !self.red_region.contains(self.red) {
            return Err("palette `red` lies outside the red region".into());
        }
        for (name, c) in [("idle", self.idle), ("off", self.off)] {
            if self.red_region.contains(c) {
                return Err(format!("palette color `{name}` falls in the red region"));
            }
        }
        for (name, g) in [
            ("node_load", self.node_load),
            ("gpu_bar", self.gpu_bar),
            ("power_bar", self.power_bar),
        ] {
            if self.red_region.intersects(&g) {
                return Err(format!("gradient `{name}` passes through the red region"));
            }
        }
        Ok(())
    }
}
